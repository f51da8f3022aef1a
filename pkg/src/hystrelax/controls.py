"""Controls, admissible control sets and cost integrands."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ConstraintError
from .functions import FunctionSpec


class Control:
    """Piecewise constant in time, nodal in space.

    ``values[k]`` holds the nodal control on ``[time_grid[k], time_grid[k+1])``.
    """

    def __init__(self, time_grid, values):
        grid = np.asarray(time_grid, dtype=float)
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("time grid needs at least two breakpoints")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("time grid must be strictly increasing")
        if grid[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if vals.shape[0] != grid.size - 1:
            raise ValueError(
                f"{grid.size - 1} time cells but {vals.shape[0]} value rows"
            )
        self.time_grid = grid
        self.values = vals
        self._cum = np.vstack(
            [np.zeros(vals.shape[1]), np.cumsum(np.diff(grid)[:, None] * vals, axis=0)]
        )

    @classmethod
    def constant(cls, value, n, horizon, cells=1):
        grid = np.linspace(0.0, horizon, cells + 1)
        return cls(grid, np.full((cells, n), float(value)))

    @classmethod
    def from_cells(cls, cell_values, mesh, horizon):
        """Prolong a coarse ``(time_cells, space_cells)`` array by injection.

        Node ``x_i`` takes the value of the space cell containing it; the
        last node joins the last cell.
        """
        cell_values = np.atleast_2d(np.asarray(cell_values, dtype=float))
        nt, nx = cell_values.shape
        idx = np.minimum((mesh.x / mesh.x_len * nx).astype(int), nx - 1)
        return cls(np.linspace(0.0, horizon, nt + 1), cell_values[:, idx])

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    def __len__(self):
        return self.values.shape[0]

    def cell_index(self, t):
        """Cell holding ``t`` (right-continuous; clipped to the grid)."""
        k = np.searchsorted(self.time_grid, t, side="right") - 1
        return np.clip(k, 0, len(self) - 1)

    def value_at(self, t):
        return self.values[self.cell_index(t)]

    def integral(self, t):
        """``int_0^t u`` per node; the last cell is continued past the horizon."""
        t = np.asarray(t, dtype=float)
        k = self.cell_index(t)
        return self._cum[k] + (t - self.time_grid[k])[..., None] * self.values[k]

    def step_averages(self, times):
        """Mean control over each ``[times[j], times[j+1]]``."""
        times = np.asarray(times, dtype=float)
        cum = self.integral(times)
        return np.diff(cum, axis=0) / np.diff(times)[:, None]

    def refine(self, grid):
        """Same control on a finer grid containing all current breakpoints."""
        grid = np.asarray(grid, dtype=float)
        mids = 0.5 * (grid[:-1] + grid[1:])
        return Control(grid, self.values[self.cell_index(mids)])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {"time_grid": self.time_grid.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["time_grid"], d["values"])

    def __eq__(self, other):
        return (
            isinstance(other, Control)
            and np.array_equal(self.time_grid, other.time_grid)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"Control(cells={len(self)}, n={self.n}, horizon={self.horizon})"


def merged_grid(*controls: Control, extra=None, tol=1e-13) -> np.ndarray:
    """Union of breakpoints, merging points closer than ``tol * horizon``."""
    pts = np.concatenate([c.time_grid for c in controls] + ([] if extra is None else [np.asarray(extra, float)]))
    pts = np.unique(pts)
    scale = max(pts[-1], 1.0)
    keep = np.concatenate([[True], np.diff(pts) > tol * scale])
    return pts[keep]


@dataclass(frozen=True)
class ControlConstraint:
    """Finite admissible set ``U`` with uniform bound ``m``.

    ``mode="finite_set"`` uses the fixed ``points``; ``"finite_set_state_dep"``
    evaluates ``spec`` at ``(t, x, sigma, v, w)``.
    """

    mode: str
    m: float
    points: tuple = ()
    spec: FunctionSpec | None = None
    _fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigError(f"constraint.m must be positive, got {self.m}")
        if self.mode == "finite_set":
            pts = tuple(sorted(set(float(p) for p in self.points)))
            if not pts:
                raise ConfigError("constraint.points must be nonempty")
            if max(abs(p) for p in pts) > self.m:
                raise ConfigError(f"constraint.points exceed the bound m={self.m}")
            object.__setattr__(self, "points", pts)
        elif self.mode == "finite_set_state_dep":
            if self.spec is None:
                raise ConfigError("state-dependent constraint needs a preset")
            object.__setattr__(self, "_fn", self.spec.build())
        else:
            raise ConfigError(f"unknown constraint mode {self.mode!r}")

    @classmethod
    def finite(cls, points, m=None):
        pts = [float(p) for p in points]
        return cls("finite_set", m if m is not None else max(abs(p) for p in pts) or 1.0, tuple(pts))

    @property
    def state_dependent(self) -> bool:
        return self.mode == "finite_set_state_dep"

    def points_at(self, t=0.0, x=0.0, sigma=0.0, v=0.0, w=0.0) -> np.ndarray:
        """Admissible points, sorted along a trailing axis."""
        if not self.state_dependent:
            shape = np.broadcast_shapes(*(np.shape(a) for a in (t, x, sigma, v, w)))
            return np.broadcast_to(np.array(self.points), shape + (len(self.points),))
        return np.sort(self._fn(t, x, sigma, v, w), axis=-1)

    def outer_bounds(self) -> tuple[float, float]:
        """Interval used as the optimization box (the hull at the zero state)."""
        pts = self.points_at()
        return float(np.min(pts)), float(np.max(pts))

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "m": self.m}
        if self.state_dependent:
            d.update(self.spec.to_dict())
        else:
            d["points"] = list(self.points)
        return d


@dataclass(frozen=True)
class CostModel:
    spec: FunctionSpec
    _fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", self.spec.build())

    @classmethod
    def preset(cls, name, **params):
        return cls(FunctionSpec("cost", name, params))

    def __call__(self, t, x, sigma, v, w, u):
        return self._fn(t, x, sigma, v, w, u)

    def to_dict(self) -> dict:
        return self.spec.to_dict()


def check_bound(u, m, where=""):
    bad = np.abs(u) > m * (1.0 + 1e-12) + 1e-12
    if np.any(bad):
        i = int(np.argmax(bad.ravel()))
        raise ConstraintError(
            f"control bound |u| <= {m} violated{where} at flat index {i} "
            f"(u={np.ravel(u)[i]!r})"
        )
