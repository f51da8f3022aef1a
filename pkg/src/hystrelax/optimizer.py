"""Box-constrained minimization of the relaxed cost and the relaxation-gap run.

Controls are parametrized by a coarse ``time_cells x space_cells`` array of
values in ``[min U, max U]`` and prolonged to the solver grid by injection.
Step sizes in :class:`OptimizerConfig` are fractions of the box width.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .controls import Control
from .dynamics import Scenario
from .errors import ConfigError, DomainError, HystRelaxError
from .parallel import pmap
from .relaxation import cost_gap_probe, cost_J_relaxed
from .solver import SolverConfig, solve


class ObjectiveError(HystRelaxError):
    """Objective evaluation failed; ``control_json`` replays the failing control."""

    def __init__(self, message, control_json):
        super().__init__(message)
        self.control_json = control_json


@dataclass(frozen=True)
class OptimizerConfig:
    time_cells: int = 8
    space_cells: int = 1
    method: str = "compass_search"
    max_iters: int = 200
    step_init: float = 0.25
    step_min: float = 1e-3
    fd_eps: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.time_cells < 1 or self.space_cells < 1:
            raise ConfigError("time_cells and space_cells must be >= 1")
        if self.method not in ("compass_search", "projected_fd_gradient"):
            raise ConfigError(f"unknown optimizer method {self.method!r}")
        if not 0 < self.step_min < self.step_init:
            raise ConfigError("need 0 < step_min < step_init")
        if not self.fd_eps > 0:
            raise ConfigError("fd_eps must be positive")


@dataclass
class OptimizeResult:
    u_opt: Control
    cells: np.ndarray
    j_relaxed: float
    iterations: int
    converged: bool
    history: list[tuple[int, float]]
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "j_relaxed": self.j_relaxed,
            "iterations": self.iterations,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "cells": self.cells.tolist(),
            "history": [list(h) for h in self.history],
            "u_opt": self.u_opt.to_dict(),
        }


class RelaxedObjective:
    """``cell values -> J**`` with a memo of already evaluated points."""

    def __init__(self, s: Scenario, cfg: SolverConfig, ocfg: OptimizerConfig):
        self.s, self.cfg, self.ocfg = s, cfg, ocfg
        self.lo, self.hi = s.constraint.outer_bounds()
        self.shape = (ocfg.time_cells, ocfg.space_cells)
        self.evaluations = 0
        self._memo: dict[bytes, float] = {}

    def control(self, cells) -> Control:
        cells = np.clip(np.reshape(cells, self.shape), self.lo, self.hi)
        return Control.from_cells(cells, self.s.mesh, self.s.horizon)

    def __call__(self, cells) -> float:
        cells = np.clip(np.asarray(cells, float), self.lo, self.hi)
        key = cells.tobytes()
        if key in self._memo:
            return self._memo[key]
        u = self.control(cells)
        try:
            j = cost_J_relaxed(self.s, solve(self.s, self.cfg, u), u)
        except DomainError:
            j = np.inf
        except HystRelaxError as exc:
            raise ObjectiveError(
                f"objective failed: {exc}", json.dumps(u.to_dict())
            ) from exc
        self.evaluations += 1
        self._memo[key] = j
        return j


def optimize_relaxed(s: Scenario, cfg: SolverConfig, ocfg: OptimizerConfig, x0=None) -> OptimizeResult:
    """Minimize the relaxed cost over the coarse control box.

    Starts from the box midpoint unless ``x0`` is given.
    """
    f = RelaxedObjective(s, cfg, ocfg)
    width = f.hi - f.lo
    if not width > 0:
        raise ConfigError("relaxed problem needs a nondegenerate control interval")
    dim = ocfg.time_cells * ocfg.space_cells
    x = np.full(dim, 0.5 * (f.lo + f.hi)) if x0 is None else np.clip(np.ravel(x0).astype(float), f.lo, f.hi)
    rng = np.random.default_rng(ocfg.seed)
    if ocfg.method == "compass_search":
        x, fx, it, conv, hist = _compass(f, x, width, ocfg, rng)
    else:
        x, fx, it, conv, hist = _projected_gradient(f, x, width, ocfg)
    cells = x.reshape(f.shape)
    return OptimizeResult(f.control(cells), cells, float(fx), it, conv, hist, f.evaluations)


def _compass(f, x, width, ocfg, rng):
    fx = f(x)
    hist = [(0, float(fx))]
    step = ocfg.step_init * width
    stop = ocfg.step_min * width
    it = 0
    while it < ocfg.max_iters and step >= stop:
        it += 1
        order = rng.permutation(2 * x.size)
        trials = []
        for d in order:
            y = x.copy()
            y[d // 2] += step if d % 2 == 0 else -step
            y = np.clip(y, f.lo, f.hi)
            if not np.array_equal(y, x):
                trials.append(y)
        vals = pmap(f, trials)
        if vals and min(vals) < fx:
            k = int(np.argmin(vals))
            x, fx = trials[k], vals[k]
        else:
            step *= 0.5
        hist.append((it, float(fx)))
    return x, fx, it, step < stop, hist


def _projected_gradient(f, x, width, ocfg):
    fx = f(x)
    hist = [(0, float(fx))]
    eps = ocfg.fd_eps * width
    t = ocfg.step_init * width
    stop = ocfg.step_min * width
    it = 0
    converged = False
    while it < ocfg.max_iters:
        it += 1
        trials = []
        for i in range(x.size):
            y = x.copy()
            y[i] += eps if x[i] + eps <= f.hi else -eps
            trials.append(y)
        vals = pmap(f, trials)
        g = np.array([(v - fx) / (y[i] - x[i]) for i, (v, y) in enumerate(zip(vals, trials))])
        gmax = float(np.max(np.abs(g)))
        if gmax == 0.0:
            converged = True
            hist.append((it, float(fx)))
            break
        while True:
            y = np.clip(x - t * g / gmax, f.lo, f.hi)
            fy = f(y)
            if fy < fx - 1e-4 * float(g @ (x - y)):
                x, fx = y, fy
                t = min(2.0 * t, ocfg.step_init * width)
                break
            t *= 0.5
            if t < stop:
                break
        hist.append((it, float(fx)))
        if t < stop:
            converged = True
            break
    return x, fx, it, converged, hist


@dataclass
class GapReport:
    j_relaxed_min: float
    rows: list
    optimize: OptimizeResult
    relative_gaps: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "j_relaxed_min": self.j_relaxed_min,
            "chattered": [
                dict(r.to_dict(), relative_gap=g) for r, g in zip(self.rows, self.relative_gaps)
            ],
            "optimize": self.optimize.to_dict(),
        }


def relaxation_gap_experiment(s: Scenario, cfg: SolverConfig, ocfg: OptimizerConfig, n_list) -> GapReport:
    """Relaxed optimum, then chattered controls approaching it from ``U``."""
    res = optimize_relaxed(s, cfg, ocfg)
    ref = solve(s, cfg, res.u_opt)
    rows = cost_gap_probe(s, cfg, res.u_opt, n_list, relaxed_traj=ref)
    jmin = res.j_relaxed
    rel = [abs(r.j_chattered - jmin) / (abs(jmin) + 1.0) for r in rows]
    return GapReport(jmin, rows, res, rel)
