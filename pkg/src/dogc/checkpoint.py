"""Portable checkpoint format for solver states.

Layout (all multi-byte integers little-endian):

    bytes 0..9    magic ``b"DOGC-CKPT\\x00"``
    bytes 10..13  format version, uint32 (currently 1)
    bytes 14..21  header length H, uint64
    bytes 22..    UTF-8 JSON header of H bytes, then the array payload

The JSON header carries every scalar field of the state plus an ``arrays``
list of ``{"name", "rows", "cols"}`` records; the payload is the matching
sequence of row-major little-endian float64 blocks. The similarity matrix
is stored dense.
"""
import json
import struct

import numpy as np
import scipy.sparse as sp

from .errors import DataValidationError
from .solver import SolverState
from .updates import GraphHyperParams

MAGIC = b"DOGC-CKPT\x00"
VERSION = 1


def _blob(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_state(state, path):
    """Write a solver state to ``path`` in the versioned checkpoint format."""
    S = state.S.toarray() if sp.issparse(state.S) else np.asarray(state.S)
    arrays = [("S", S), ("F", state.F), ("Y", state.Y), ("Q", state.Q),
              ("W", state.W), ("xi_rows", state.xi_rows.reshape(-1, 1))]
    if state.P is not None:
        arrays.append(("P", state.P))
    if state.D is not None:
        arrays.append(("D", np.asarray(state.D).reshape(-1, 1)))
    header = {
        "mode": state.mode,
        "relax_labels": state.relax_labels,
        "fixed_graph": state.fixed_graph,
        "p": state.p,
        "iteration": state.iteration,
        "rng_seed": state.rng_seed,
        "rank_satisfied": state.rank_satisfied,
        "objective_trace": list(map(float, state.objective_trace)),
        "objective_pre_trace": list(map(float, state.objective_pre_trace)),
        "hyper": {"k": state.hyper.k, "xi": state.hyper.xi,
                  "lam": state.hyper.lam, "alpha": state.hyper.alpha,
                  "beta": state.hyper.beta, "gamma": state.hyper.gamma},
        "arrays": [{"name": name, "rows": int(a.shape[0]),
                    "cols": int(a.shape[1])} for name, a in arrays],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for _, a in arrays:
            fh.write(_blob(a))


def load_state(path):
    """Read a checkpoint written by ``save_state``."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataValidationError(f"{path} is not a solver checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise DataValidationError(f"unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        blobs = {}
        for rec in header["arrays"]:
            count = rec["rows"] * rec["cols"]
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise DataValidationError("checkpoint payload is truncated")
            blobs[rec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(
                rec["rows"], rec["cols"]).astype(float)
    hyper = GraphHyperParams(**header["hyper"])
    return SolverState(
        S=sp.csr_array(blobs["S"]),
        F=blobs["F"], Y=blobs["Y"], Q=blobs["Q"], W=blobs["W"],
        hyper=hyper, xi_rows=blobs["xi_rows"].ravel(),
        P=blobs.get("P"), D=blobs["D"].ravel() if "D" in blobs else None,
        p=header["p"], mode=header["mode"],
        relax_labels=header["relax_labels"],
        fixed_graph=header["fixed_graph"],
        objective_trace=header["objective_trace"],
        objective_pre_trace=header["objective_pre_trace"],
        iteration=header["iteration"], rng_seed=header["rng_seed"],
        rank_satisfied=header["rank_satisfied"])
