"""
Low-energy landscape before and after training
==============================================

Sample low-energy states of each test image's Hamiltonian, embed them in 2D
with SMACOF on Hamming distances, and colour the points by decoded class.
"""

from isingdragon.analysis import landscape_snapshot, snapshot_svg
from isingdragon.data import synthetic_digits
from isingdragon.network import init_params
from isingdragon.samplers import AnnealConfig
from isingdragon.trainers import LearningRates, train_run

train = synthetic_digits(10, 0, n_classes=4, split="train")
test = synthetic_digits(5, 1, n_classes=4, split="test")
cfg = AnnealConfig.fast()

params = init_params(0, 64, 24, n_classes=4)
before = landscape_snapshot(params, test, 10, cfg, seed=0, epoch=0)

params = train_run(params, train, "dragon", 5, 5, LearningRates(), cfg, 0).params
after = landscape_snapshot(params, test, 10, cfg, seed=0, epoch=5)

# ratio of mean between-class to mean within-class embedded distance
for snap in (before, after):
    print("epoch %d: %d points, stress %.3f, separation %.2f"
          % (snap.epoch, len(snap.classes), snap.stress, snap.separation("class")))
    snapshot_svg(snap, "landscape_epoch%d.svg" % snap.epoch, title="epoch %d" % snap.epoch)
print("wrote landscape_epoch0.svg and landscape_epoch5.svg")
