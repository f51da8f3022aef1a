"""Control-to-state map: semi-implicit time stepping of the coupled system.

Each step (a) diffuses prey and predator implicitly with explicit reactions,
(b) updates vegetation with the exact increment of ``lambda(v)`` plus the
controlled growth and implicit diffusion, and (c) corrects vegetation against
the band at the *updated* prey/predator densities, either by projection
(the exact inclusion) or by the Yosida resolvent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controls import Control, check_bound, merged_grid
from .dynamics import Scenario, State, eval_reactions
from .errors import BlowUpError, ConfigError, ConstraintError
from .hysteresis import implicit_yosida_step, project
from .mesh import _helmholtz_factor
from .parallel import pmap


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    mode: str = "projection"
    mu: float | None = None
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.mode not in ("projection", "yosida"):
            raise ConfigError(f"unknown hysteresis mode {self.mode!r}")
        if self.mode == "yosida" and not (self.mu is not None and self.mu > 0):
            raise ConfigError(f"yosida mode needs mu > 0, got {self.mu}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError("record_every must be a positive integer")

    @classmethod
    def parse_mode(cls, text: str, **kw) -> "SolverConfig":
        """Build from ``"projection"`` or ``"yosida:MU"``."""
        text = text.strip()
        if text == "projection":
            return cls(mode="projection", **kw)
        if text.startswith("yosida:"):
            try:
                mu = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad hysteresis mode {text!r}") from None
            return cls(mode="yosida", mu=mu, **kw)
        raise ConfigError(f"bad hysteresis mode {text!r} (projection | yosida:MU)")

    @property
    def label(self) -> str:
        return "projection" if self.mode == "projection" else f"yosida:{self.mu:g}"

    def with_(self, **kw) -> "SolverConfig":
        d = dict(dt=self.dt, mode=self.mode, mu=self.mu, record_every=self.record_every)
        d.update(kw)
        return SolverConfig(**d)


@dataclass
class EnergyReport:
    """Measured analogues of the a-priori bounds; nothing here is certified."""

    sup_bound: float
    min_bound: float
    l2_time_derivatives: tuple[float, float, float]
    sup_grad_norms: tuple[float, float, float]
    l2_laplacians: tuple[float, float, float]
    band_violation_max: float

    def to_dict(self) -> dict:
        return {
            "sup_bound": self.sup_bound,
            "min_bound": self.min_bound,
            "l2_time_derivatives": list(self.l2_time_derivatives),
            "sup_grad_norms": list(self.sup_grad_norms),
            "l2_laplacians": list(self.l2_laplacians),
            "band_violation_max": self.band_violation_max,
        }


@dataclass
class Trajectory:
    """Recorded states; row ``k`` of every array belongs to ``times[k]``.

    ``force[k]`` and ``u[k]`` are the hysteresis reaction and the (step-mean)
    control of the step that produced row ``k``; row 0 carries zero force and
    the control of the first step.
    """

    times: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    w: np.ndarray
    force: np.ndarray
    u: np.ndarray
    energy: EnergyReport
    config: SolverConfig
    x: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return self.times.size

    def state(self, k) -> State:
        return State(self.sigma[k], self.v[k], self.w[k])

    @property
    def final_state(self) -> State:
        return self.state(-1)

    def index_at(self, t):
        """Latest recorded row with ``times <= t``."""
        k = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(k, 0, len(self) - 1)


def _n_steps(horizon, dt):
    return max(1, int(math.ceil(horizon / dt - 1e-9)))


class _Stepper:
    def __init__(self, s: Scenario, cfg: SolverConfig):
        self.s, self.cfg = s, cfg
        self.diff = _helmholtz_factor(s.mesh, cfg.dt)
        self.diff_sigma = _helmholtz_factor(s.mesh, s.kappa * cfg.dt)

    def __call__(self, state: State, u):
        s, dt = self.s, self.cfg.dt
        sig, v, w = state.sigma, state.v, state.w
        fu, hv, gw = eval_reactions(s, state, u)
        v1 = self.diff.solve(v + dt * hv)
        w1 = self.diff.solve(w + dt * gw)
        rhs = sig + (s.lam(v1) - s.lam(v)) + dt * fu
        sig_t = self.diff_sigma.solve(rhs)
        lo, hi = s.band(v1, w1)
        if self.cfg.mode == "projection":
            sig1 = project(sig_t, (lo, hi))
        else:
            sig1 = implicit_yosida_step(sig_t, (lo, hi), self.cfg.mu, dt)
        force = (sig_t - sig1) / dt
        return State(sig1, v1, w1), force, lo, hi


def step(s: Scenario, cfg: SolverConfig, state: State, u) -> tuple[State, np.ndarray]:
    """Advance one step under nodal control ``u``; returns ``(state, force)``.

    ``force`` is the discrete selection from the subdifferential at the new
    vegetation density (in projection mode).
    """
    u = s.mesh.check(u)
    check_bound(u, s.constraint.m)
    new, force, _, _ = _Stepper(s, cfg)(state, u)
    _check_finite(new, 1)
    return new, force


def _check_finite(state, k):
    for name, arr in (("sigma", state.sigma), ("v", state.v), ("w", state.w)):
        if not np.all(np.isfinite(arr)):
            raise BlowUpError(f"non-finite {name} at step {k}", step=k)


def solve(s: Scenario, cfg: SolverConfig, u: Control) -> Trajectory:
    """Integrate from the scenario's initial data to its horizon.

    Within a step the control enters through its mean over the step, so
    controls switching faster than ``dt`` are handled consistently.
    """
    mesh = s.mesh
    if u.n != mesh.n:
        raise ValueError(f"control has {u.n} nodes, mesh has {mesh.n}")
    dt = cfg.dt
    nsteps = _n_steps(s.horizon, dt)
    times = dt * np.arange(nsteps + 1)
    U = u.step_averages(times)
    try:
        check_bound(U, s.constraint.m)
    except ConstraintError as exc:
        k = int(np.flatnonzero(np.any(np.abs(U) > s.constraint.m * (1 + 1e-12) + 1e-12, axis=1))[0])
        raise ConstraintError(f"{exc} (step {k}, t={times[k]:g})") from None

    advance = _Stepper(s, cfg)
    rec = [k for k in range(0, nsteps + 1, cfg.record_every)]
    if rec[-1] != nsteps:
        rec.append(nsteps)
    rec_set = set(rec)
    R, n = len(rec), mesh.n
    out = {key: np.empty((R, n)) for key in ("sigma", "v", "w", "force", "u")}

    state = s.initial_state
    wts = mesh.weights
    out["sigma"][0], out["v"][0], out["w"][0] = state.sigma, state.v, state.w
    out["force"][0] = 0.0
    out["u"][0] = U[0]

    stack = state.stacked()
    sup_b, min_b = float(stack.max()), float(stack.min())
    lo0, hi0 = s.band(state.v, state.w)
    band_viol = float(max(np.max(lo0 - state.sigma), np.max(state.sigma - hi0), 0.0))
    ddt2 = np.zeros(3)
    lap2 = np.zeros(3)
    grad_sup = mesh.norm_grad(stack)

    r = 1
    for k in range(1, nsteps + 1):
        new, force, lo, hi = advance(state, U[k - 1])
        new_stack = new.stacked()
        if not np.all(np.isfinite(new_stack)):
            _check_finite(new, k)
        with np.errstate(over="ignore", invalid="ignore"):
            d = new_stack - stack
            ddt2 += (d * d) @ wts / dt
            lp = mesh.laplacian(new_stack)
            lap2 += dt * ((lp * lp) @ wts)
            grad_sup = np.maximum(grad_sup, mesh.norm_grad(new_stack))
        if not (np.all(np.isfinite(ddt2)) and np.all(np.isfinite(lap2))):
            raise BlowUpError(f"state magnitude overflow at step {k}", step=k)
        sup_b = max(sup_b, float(new_stack.max()))
        min_b = min(min_b, float(new_stack.min()))
        band_viol = max(band_viol, float(np.max(lo - new.sigma)), float(np.max(new.sigma - hi)))
        if k in rec_set:
            out["sigma"][r], out["v"][r], out["w"][r] = new.sigma, new.v, new.w
            out["force"][r] = force
            out["u"][r] = U[k - 1]
            r += 1
        state, stack = new, new_stack

    energy = EnergyReport(
        sup_bound=sup_b,
        min_bound=min_b,
        l2_time_derivatives=tuple(float(x) for x in np.sqrt(ddt2)),
        sup_grad_norms=tuple(float(x) for x in grad_sup),
        l2_laplacians=tuple(float(x) for x in np.sqrt(lap2)),
        band_violation_max=max(band_viol, 0.0),
    )
    return Trajectory(times[rec], energy=energy, config=cfg, x=mesh.x, **out)


# -- diagnostics --------------------------------------------------------------

def state_gap_series(s: Scenario, a: Trajectory, b: Trajectory) -> np.ndarray:
    """``|a(t) - b(t)|`` in ``H^3`` at each recorded time."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ValueError("trajectories are recorded on different times")
    wts = s.mesh.weights
    tot = sum(((p - q) ** 2) @ wts for p, q in ((a.sigma, b.sigma), (a.v, b.v), (a.w, b.w)))
    return np.sqrt(tot)


def state_gap(s: Scenario, a: Trajectory, b: Trajectory) -> float:
    """Sup over recorded times of the ``H^3`` distance."""
    return float(np.max(state_gap_series(s, a, b)))


def control_l2_cumulative(s: Scenario, u1: Control, u2: Control, t) -> np.ndarray:
    """``int_0^t |u1 - u2|_H^2`` evaluated at times ``t``."""
    grid = merged_grid(u1, u2)
    mids = 0.5 * (grid[:-1] + grid[1:])
    d = u1.value_at(mids) - u2.value_at(mids)
    rate = (d * d) @ s.mesh.weights
    cum = np.concatenate([[0.0], np.cumsum(rate * np.diff(grid))])
    return np.interp(t, grid, cum)


def lipschitz_probe(s: Scenario, cfg: SolverConfig, u1: Control, u2: Control) -> float:
    """Empirical stability quotient ``max_t |dX(t)|^2 / int_0^t |du|^2``.

    Times where the denominator is below 1e-14 are skipped; identical
    controls give 0.
    """
    t1, t2 = pmap(lambda u: solve(s, cfg, u), (u1, u2))
    num = state_gap_series(s, t1, t2) ** 2
    den = control_l2_cumulative(s, u1, u2, t1.times)
    ok = den >= 1e-14
    if not np.any(ok):
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def weak_strong_probe(s: Scenario, cfg: SolverConfig, u_seq, u_lim: Control) -> list[float]:
    """Sup-in-time state distances from each ``u_seq[i]`` to ``u_lim``."""
    ref = solve(s, cfg, u_lim)
    trajs = pmap(lambda u: solve(s, cfg, u), u_seq)
    return [state_gap(s, tr, ref) for tr in trajs]
