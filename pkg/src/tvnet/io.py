"""JSON/CSV serialization of solved networks."""
from __future__ import annotations

import csv
import json

import numpy as np

from .data import InputError, ThetaSequence

FORMAT = "tvnet-networks/1"
DENSE_MAX_P = 200
SIG_DIGITS = 12


def num(x):
    """Round to 12 significant digits; also folds -0.0 into 0.0."""
    return float(f"{float(x):.{SIG_DIGITS}g}") + 0.0


def _matrix(M):
    return [[num(v) for v in row] for row in M]


def networks_to_dict(thetas: ThetaSequence, meta=None):
    p = thetas.p
    dense = p <= DENSE_MAX_P
    out = {"format": FORMAT, "p": p, "edge_threshold": num(thetas.edge_threshold),
           "storage": "dense" if dense else "sparse"}
    out.update(meta or {})
    nets = []
    for t, M in zip(thetas.timestamps, thetas.thetas):
        M = np.array(_matrix(M))
        entry = {"time": num(t)}
        if dense:
            entry["matrix"] = M.tolist()
        else:
            rows, cols = np.nonzero(np.triu(M))
            entry["entries"] = [[int(i), int(j), float(M[i, j])] for i, j in zip(rows, cols)]
        iu, ju = np.nonzero(np.triu(np.abs(M) > thetas.edge_threshold, 1))
        entry["edges"] = [[int(i), int(j), float(M[i, j])] for i, j in zip(iu, ju)]
        nets.append(entry)
    out["networks"] = nets
    return out


def networks_from_dict(d):
    """Returns the ThetaSequence and the remaining metadata."""
    if d.get("format") != FORMAT:
        raise InputError(f"not a {FORMAT} document")
    p = int(d["p"])
    mats, times = [], []
    for entry in d["networks"]:
        times.append(float(entry["time"]))
        if "matrix" in entry:
            mats.append(np.array(entry["matrix"], dtype=float))
        else:
            M = np.zeros((p, p))
            for i, j, v in entry["entries"]:
                M[i, j] = M[j, i] = v
            mats.append(M)
    meta = {k: v for k, v in d.items() if k not in ("format", "p", "edge_threshold", "storage", "networks")}
    return ThetaSequence(np.array(mats).reshape(-1, p, p), np.array(times), float(d["edge_threshold"])), meta


def dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def save_networks(path, thetas, meta=None):
    with open(path, "w") as fh:
        fh.write(dumps(networks_to_dict(thetas, meta)))


def load_networks(path):
    with open(path) as fh:
        return networks_from_dict(json.load(fh))


def save_deviation_csv(path, timestamps, deviations):
    """One row per consecutive pair, keyed by the later timestamp."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "deviation"])
        for t, d in zip(timestamps[1:], deviations):
            w.writerow([repr(num(t)), repr(num(d))])
