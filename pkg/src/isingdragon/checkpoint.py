"""Versioned plain-text checkpoint container for network parameters.

Layout (one record per line)::

    isingdragon-checkpoint <version>
    kind network|deep
    <key> <value>            # dimensions, n_classes, redundancy, config_hash
    tensor <name> <rows> <cols>
    <row of floats, repr precision>
    ...
    end
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .deep import DeepNetworkParams
from .network import NetworkParams

MAGIC = "isingdragon-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


def _tensor_lines(name, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    out = [f"tensor {name} {arr.shape[0]} {arr.shape[1]}"]
    out += [" ".join(repr(float(v)) for v in row) for row in arr]
    return out


def dumps(params, config_hash: str = "", version: int = VERSION) -> str:
    lines = [f"{MAGIC} {version}"]
    if isinstance(params, NetworkParams):
        lines += ["kind network", f"n_input {params.n_input}", f"n_hidden {params.n_hidden}",
                  f"n_output {params.n_output}", f"n_classes {params.n_classes}",
                  f"redundancy {params.redundancy}", f"config_hash {config_hash or '-'}"]
        lines += _tensor_lines("W", params.W)
        lines += _tensor_lines("J", params.J)
        lines += _tensor_lines("b_h", params.b_h[None, :])
        lines += _tensor_lines("b_o", params.b_o[None, :])
    elif isinstance(params, DeepNetworkParams):
        lines += ["kind deep", f"n_input {params.W.shape[1]}",
                  "layers " + " ".join(str(n) for n in params.layers),
                  f"n_classes {params.n_classes}", f"redundancy {params.redundancy}",
                  f"config_hash {config_hash or '-'}"]
        lines += _tensor_lines("W", params.W)
        for l, j in enumerate(params.J):
            lines += _tensor_lines(f"J{l}", j)
        for l, b in enumerate(params.b):
            lines += _tensor_lines(f"b{l}", b[None, :])
    else:
        raise TypeError(f"cannot checkpoint {type(params).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str, reader_version: int = VERSION):
    """Parse a checkpoint; returns (params, header dict, notes)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise CorruptCheckpointError("missing checkpoint header")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise CorruptCheckpointError("unreadable version field") from None
    notes = []
    if version > reader_version:
        raise CheckpointVersionError(
            f"container version {version} is newer than this reader (version {reader_version})")
    if version < reader_version:
        notes.append(f"read version {version} container with version {reader_version} reader")
    if lines[-1].strip() != "end":
        raise CorruptCheckpointError("container truncated (no end marker)")
    header: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    i = 1
    body = lines[:-1]
    while i < len(body):
        tok = body[i].split()
        if not tok:
            i += 1
            continue
        if tok[0] == "tensor":
            try:
                name, rows, cols = tok[1], int(tok[2]), int(tok[3])
                block = body[i + 1:i + 1 + rows]
                if len(block) != rows:
                    raise ValueError("missing rows")
                arr = np.array([[float(v) for v in row.split()] for row in block])
                if arr.shape != (rows, cols):
                    raise ValueError(f"tensor {name} has shape {arr.shape}, header says {(rows, cols)}")
            except (IndexError, ValueError) as exc:
                raise CorruptCheckpointError(f"line {i + 1}: {exc}") from None
            tensors[name] = arr
            i += 1 + rows
        else:
            header[tok[0]] = " ".join(tok[1:])
            i += 1
    try:
        kind = header["kind"]
        n_classes = int(header["n_classes"])
        redundancy = int(header["redundancy"])
        if kind == "network":
            dims = (int(header["n_hidden"]), int(header["n_input"]), int(header["n_output"]))
            W, J = tensors["W"], tensors["J"]
            b_h, b_o = tensors["b_h"][0], tensors["b_o"][0]
            if W.shape != dims[:2] or J.shape != (dims[0], dims[2]) \
                    or b_h.shape != (dims[0],) or b_o.shape != (dims[2],):
                raise CheckpointDimensionError("tensor shapes disagree with declared dimensions")
            params = NetworkParams(W, J, b_h, b_o, n_classes, redundancy)
        elif kind == "deep":
            layers = [int(v) for v in header["layers"].split()]
            W = tensors["W"]
            Js = tuple(tensors[f"J{l}"] for l in range(len(layers) - 1))
            bs = tuple(tensors[f"b{l}"][0] for l in range(len(layers)))
            if W.shape != (layers[0], int(header["n_input"])) or \
                    any(b.shape[0] != n for b, n in zip(bs, layers)):
                raise CheckpointDimensionError("tensor shapes disagree with declared layers")
            params = DeepNetworkParams(W, Js, bs, n_classes, redundancy)
        else:
            raise CorruptCheckpointError(f"unknown kind {kind!r}")
    except KeyError as exc:
        raise CorruptCheckpointError(f"missing field {exc}") from None
    except CheckpointError:
        raise
    except ValueError as exc:
        raise CheckpointDimensionError(str(exc)) from None
    return params, header, notes


def save(params, path, config_hash: str = ""):
    Path(path).write_text(dumps(params, config_hash))


def load(path, reader_version: int = VERSION):
    params, header, notes = loads(Path(path).read_text(), reader_version)
    return params
