"""
Dragon training versus plain equilibrium propagation
=====================================================

Train the same small Ising network on the synthetic 8x8 digits twice, once
penalizing a single free sample per image and once penalizing ten, then fit
the error-versus-epoch power law for both.
"""

import numpy as np

from isingdragon.analysis import compare_runs
from isingdragon.data import synthetic_digits
from isingdragon.network import init_params
from isingdragon.samplers import AnnealConfig
from isingdragon.trainers import LearningRates, train_run

train = synthetic_digits(30, seed=0, flip_prob=0.3)
test = synthetic_digits(10, seed=1, flip_prob=0.3)
print(train.X.shape, "training images,", np.bincount(train.y), "per class")

# small learning rates keep the curves in the power-law regime for longer
rates = LearningRates(3e-4, 3e-4, 6e-5, 6e-5)
cfg = AnnealConfig.fast()

runs = []
for method, m in [("eqprop", 1), ("dragon", 10)]:
    run = train_run(init_params(0, 64, 32), train, method, m, 25, rates, cfg, seed=0,
                    test=test, dataset_hash=train.hash)
    print(method, "m=%d" % m, "train error:",
          " ".join("%.2f" % e for _, e in run.curve()))
    runs.append(run)

# z is minus the slope of log(error) against log(epoch)
report = compare_runs(runs, reference_epoch=25)
print()
print(report.to_text())
