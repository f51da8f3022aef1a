"""Scenario data, reaction terms and sampled hypothesis checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import qmc

from .controls import ControlConstraint, CostModel
from .errors import EvaluationError
from .functions import FunctionSpec
from .mesh import Mesh

MODEL_ROLES = ("lambda", "f_lo", "f_hi", "F", "h", "g")

# Box [0, M_BOX] on which hypotheses are sampled (densities are nonnegative and
# bounded, so the model functions only matter there).
M_BOX = 2.0


@dataclass
class State:
    sigma: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def copy(self) -> "State":
        return State(self.sigma.copy(), self.v.copy(), self.w.copy())

    def stacked(self) -> np.ndarray:
        return np.stack([self.sigma, self.v, self.w])


@dataclass(eq=False)
class Scenario:
    """Full model datum. Immutable by convention after construction."""

    model: dict[str, FunctionSpec]
    kappa: float
    horizon: float
    mesh: Mesh
    sigma0: np.ndarray
    v0: np.ndarray
    w0: np.ndarray
    cost: CostModel
    constraint: ControlConstraint
    name: str = "scenario"
    init_spec: dict[str, Any] = field(default_factory=dict)
    fns: dict[str, Callable] = field(init=False, repr=False)

    def __post_init__(self):
        missing = [r for r in MODEL_ROLES if r not in self.model]
        if missing:
            raise ValueError(f"model functions missing: {missing}")
        self.fns = {r: self.model[r].build() for r in MODEL_ROLES}
        for name in ("sigma0", "v0", "w0"):
            arr = self.mesh.check(getattr(self, name))
            arr.setflags(write=False)
            setattr(self, name, arr)

    @property
    def initial_state(self) -> State:
        return State(self.sigma0.copy(), self.v0.copy(), self.w0.copy())

    def lam(self, v):
        return self.fns["lambda"](v)

    def band(self, v, w):
        """Nodal band ends ``(lo, hi)`` at prey ``v`` and predator ``w``."""
        zero = np.zeros_like(v)
        return self.fns["f_lo"](zero, v, w), self.fns["f_hi"](zero, v, w)

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "model": {r: self.model[r].to_dict() for r in MODEL_ROLES},
            "domain": {"x_len": self.mesh.x_len, "n": self.mesh.n},
            "time": {"horizon": self.horizon},
            "kappa": self.kappa,
            "init": self.init_spec,
            "cost": self.cost.to_dict(),
            "constraint": self.constraint.to_dict(),
        }


def _finite_or_raise(arr, fname):
    arr = np.asarray(arr, dtype=float)
    bad = ~np.isfinite(arr)
    if np.any(bad):
        node = int(np.flatnonzero(bad.ravel())[0])
        raise EvaluationError(f"{fname} is not finite at node {node}")
    return arr


def eval_reactions(s: Scenario, state: State, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodal ``(F*u, h, g)``."""
    sig, v, w = state.sigma, state.v, state.w
    fu = _finite_or_raise(s.fns["F"](sig, v, w), "F") * u
    hv = _finite_or_raise(s.fns["h"](sig, v, w), "h")
    gw = _finite_or_raise(s.fns["g"](sig, v, w), "g")
    return fu, hv, gw


# -- validation ---------------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "witness": self.witness}


@dataclass
class ValidationReport:
    checks: list[HypothesisCheck]
    estimates: dict[str, float]
    samples: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failed": self.failed,
            "samples": self.samples,
            "estimates": self.estimates,
            "checks": [c.to_dict() for c in self.checks],
        }

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"[{flag}] {c.name:<12} {c.detail}")
        return "\n".join(lines)


def _halton(dim, n, lo, hi):
    pts = qmc.Halton(d=dim, scramble=False).random(n)
    return np.asarray(lo) + pts * (np.asarray(hi) - np.asarray(lo))


def _lipschitz(fn, lo, hi, n, rel_step=1e-3):
    """Divided-difference estimate of the l1-Lipschitz modulus on a box.

    Returns ``(k, witness_point)``.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    dim = lo.size
    pts = _halton(2 * dim, n, np.zeros(2 * dim), np.ones(2 * dim))
    p = lo + pts[:, :dim] * (hi - lo)
    d = (2.0 * pts[:, dim:] - 1.0) * rel_step * (hi - lo)
    q = np.clip(p + d, lo, hi)
    dist = np.sum(np.abs(q - p), axis=1)
    fp = np.asarray(fn(*p.T), float)
    fq = np.asarray(fn(*q.T), float)
    if fp.ndim > 1:
        diff = np.max(np.abs(fp - fq), axis=tuple(range(1, fp.ndim)))
    else:
        diff = np.abs(fp - fq)
    ok = dist > 0
    ratio = np.where(ok, diff / np.where(ok, dist, 1.0), 0.0)
    if not np.all(np.isfinite(ratio)):
        i = int(np.argmax(~np.isfinite(ratio)))
        return float("inf"), p[i]
    i = int(np.argmax(ratio))
    return float(ratio[i]), p[i]


def _worst(violation, pts, names):
    i = int(np.argmax(violation))
    return float(violation[i]), {k: float(val) for k, val in zip(names, pts[i])}


def _set_hausdorff(a, b):
    d = np.abs(a[..., :, None] - b[..., None, :])
    return np.maximum(d.min(axis=-1).max(axis=-1), d.min(axis=-2).max(axis=-1))


def validate_scenario(s: Scenario, samples: int = 10_000, tol: float = 1e-12) -> ValidationReport:
    """Sample every hypothesis on the box ``[0, M_BOX]``; never raises on failure."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    checks: list[HypothesisCheck] = []
    est: dict[str, float] = {}
    fns = s.fns
    box = M_BOX
    m = s.constraint.m

    # H1: kappa > 0, lambda C^2 with bounded derivatives.
    vv = np.linspace(0.0, box, max(samples, 3))
    eps = 1e-4
    lam0, lamp, lamm = fns["lambda"](vv), fns["lambda"](vv + eps), fns["lambda"](np.maximum(vv - eps, 0.0))
    d1 = (lamp - lamm) / (vv + eps - np.maximum(vv - eps, 0.0))
    d2 = (lamp - 2 * lam0 + lamm)[1:] / eps**2
    est["lambda_d1_sup"] = float(np.max(np.abs(d1)))
    est["lambda_d2_sup"] = float(np.max(np.abs(d2))) if d2.size else 0.0
    h1_ok = s.kappa > 0 and np.isfinite(est["lambda_d1_sup"]) and np.isfinite(est["lambda_d2_sup"])
    checks.append(HypothesisCheck(
        "H1", bool(h1_ok),
        f"kappa={s.kappa:g}, sup|lambda'|~{est['lambda_d1_sup']:.4g}, sup|lambda''|~{est['lambda_d2_sup']:.4g}",
    ))

    # H2: 0 <= f_lo <= f_hi <= 1; h(sigma,0,w) = 0; g(sigma,v,0) = 0.
    vw = _halton(2, samples, [0.0, 0.0], [box, box])
    lo, hi = s.band(vw[:, 0], vw[:, 1])
    viol = np.maximum.reduce([-lo, lo - hi, hi - 1.0, np.zeros_like(lo)])
    viol = np.where(np.isfinite(viol), viol, np.inf)
    worst, wit = _worst(viol, vw, ("v", "w"))
    # R: Hausdorff modulus of the band, max over endpoints of the l1 moduli
    est["lip_band"] = max(
        _lipschitz(lambda v, w: s.band(v, w)[0], [0.0, 0.0], [box, box], samples)[0],
        _lipschitz(lambda v, w: s.band(v, w)[1], [0.0, 0.0], [box, box], samples)[0],
    )
    checks.append(HypothesisCheck(
        "H2:band", worst <= tol,
        "0 <= f_lo <= f_hi <= 1" + ("" if worst <= tol else f" violated by {worst:.3g}"),
        None if worst <= tol else wit,
    ))
    sw = _halton(2, samples, [0.0, 0.0], [1.0, box])
    hz = np.abs(fns["h"](sw[:, 0], np.zeros(samples), sw[:, 1]))
    hz = np.where(np.isfinite(hz), hz, np.inf)
    worst, wit = _worst(hz, sw, ("sigma", "w"))
    checks.append(HypothesisCheck(
        "H2:h-sign", worst <= tol,
        "h(sigma,0,w) = 0" + ("" if worst <= tol else f" violated, |h|={worst:.3g}"),
        None if worst <= tol else wit,
    ))
    gz = np.abs(fns["g"](sw[:, 0], sw[:, 1], np.zeros(samples)))
    gz = np.where(np.isfinite(gz), gz, np.inf)
    worst, wit = _worst(gz, sw, ("sigma", "v"))
    checks.append(HypothesisCheck(
        "H2:g-sign", worst <= tol,
        "g(sigma,v,0) = 0" + ("" if worst <= tol else f" violated, |g|={worst:.3g}"),
        None if worst <= tol else wit,
    ))

    # H3: local Lipschitz continuity of F, h, g on the box.
    worst_k, h3_ok, bad = 0.0, True, None
    for name in ("F", "h", "g"):
        k, wit = _lipschitz(fns[name], [0.0] * 3, [box] * 3, samples)
        est[f"lip_{name}"] = k
        worst_k = max(worst_k, k)
        if not np.isfinite(k):
            h3_ok, bad = False, (name, wit)
    checks.append(HypothesisCheck(
        "H3", h3_ok,
        f"max Lipschitz estimate {worst_k:.4g}" + ("" if h3_ok else f" ({bad[0]} not finite)"),
        None if h3_ok else dict(zip(("sigma", "v", "w"), map(float, bad[1]))),
    ))

    # H4: initial data.
    lo0, hi0 = s.band(s.v0, s.w0)
    viol = np.maximum.reduce([
        -s.v0, -s.w0, lo0 - s.sigma0, s.sigma0 - hi0, np.zeros(s.mesh.n),
    ])
    viol = np.where(np.isfinite(viol), viol, np.inf)
    i = int(np.argmax(viol))
    ok = viol[i] <= tol
    checks.append(HypothesisCheck(
        "H4", bool(ok),
        "v0, w0 >= 0 and sigma0 in band" + ("" if ok else f" violated by {viol[i]:.3g} at node {i}"),
        None if ok else {"node": i, "x": float(s.mesh.x[i])},
    ))

    # U1: presets are piecewise continuous in (t, x), hence measurable.
    checks.append(HypothesisCheck("U1", True, "preset point sets are continuous in (t, x)"))

    # U2, U3: Lipschitz dependence on state and uniform bound.
    T, X = s.horizon, s.mesh.x_len
    state_box_lo, state_box_hi = [0.0, 0.0, 0.0, 0.0, 0.0], [T, X, box, box, box]
    pts5 = _halton(5, samples, state_box_lo, state_box_hi)
    U = s.constraint.points_at(*pts5.T)
    if s.constraint.state_dependent:
        dirs = _halton(3, samples, [-1.0] * 3, [1.0] * 3)
        q5 = pts5.copy()
        q5[:, 2:] = np.clip(pts5[:, 2:] + 1e-3 * box * dirs, 0.0, box)
        dh = _set_hausdorff(U, s.constraint.points_at(*q5.T))
        dist = np.sum(np.abs(q5 - pts5), axis=1)
        ratio = np.where(dist > 0, dh / np.where(dist > 0, dist, 1.0), 0.0)
        est["lip_U"] = float(np.max(np.where(np.isfinite(ratio), ratio, np.inf)))
    else:
        est["lip_U"] = 0.0
    checks.append(HypothesisCheck(
        "U2", bool(np.isfinite(est["lip_U"])), f"Hausdorff-Lipschitz estimate {est['lip_U']:.4g}",
    ))
    absU = np.max(np.abs(U), axis=-1)
    absU = np.where(np.isfinite(absU), absU, np.inf)
    worst, wit = _worst(absU, pts5, ("t", "x", "sigma", "v", "w"))
    ok = worst <= m * (1 + 1e-12)
    checks.append(HypothesisCheck(
        "U3", bool(ok), f"max |U| = {worst:.4g} vs m = {m:g}", None if ok else wit,
    ))

    # q1..q3 on the box with |u| <= m.
    checks.append(HypothesisCheck("q1", True, "preset integrands are continuous in (t, x)"))
    qlo, qhi = [0.0, 0.0, 0.0, 0.0, 0.0, -m], [T, X, box, box, box, m]
    k, wit = _lipschitz(s.cost, qlo, qhi, samples)
    est["lip_q"] = k
    checks.append(HypothesisCheck(
        "q2", bool(np.isfinite(k)), f"Lipschitz estimate {k:.4g}",
        None if np.isfinite(k) else dict(zip(("t", "x", "sigma", "v", "w", "u"), map(float, wit))),
    ))
    p6 = _halton(6, samples, qlo, qhi)
    qv = np.abs(np.asarray(s.cost(*p6.T), float))
    qv = np.where(np.isfinite(qv), qv, np.inf)
    worst, wit = _worst(qv, p6, ("t", "x", "sigma", "v", "w", "u"))
    est["sup_abs_q"] = worst
    checks.append(HypothesisCheck(
        "q3", bool(np.isfinite(worst)), f"sup |q| on box = {worst:.4g}",
        None if np.isfinite(worst) else wit,
    ))
    return ValidationReport(checks, est, samples)
