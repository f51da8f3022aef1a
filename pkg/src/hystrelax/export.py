"""CSV/JSON writers. Floats are written with 17 significant digits."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return path


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def trajectory_rows(traj):
    for k, t in enumerate(traj.times):
        for i, xi in enumerate(traj.x):
            yield (t, xi, traj.sigma[k, i], traj.v[k, i], traj.w[k, i], traj.u[k, i], traj.force[k, i])


def write_trajectory_csv(path, traj) -> Path:
    return write_csv(path, ("t", "x", "sigma", "v", "w", "u", "force"), trajectory_rows(traj))


def write_energy_json(path, traj) -> Path:
    return write_json(path, traj.energy.to_dict())


def write_gap_csv(path, rows) -> Path:
    return write_csv(
        path, ("n", "weak_gap", "state_gap", "cost_gap"),
        ((r.n, r.weak_gap, r.state_gap, r.cost_gap) for r in rows),
    )


def write_history_csv(path, history) -> Path:
    return write_csv(path, ("iter", "j_relaxed"), history)


def read_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
