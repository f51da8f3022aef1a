"""Convexification of the control problem and chattering approximation.

For a finite admissible set ``U`` the bipolar of ``u -> q`` (``+inf`` off
``U``) is the lower convex envelope of the graph points ``(u_i, q(u_i))`` on
``[min U, max U]``. :func:`lower_convex_envelope` builds it as a planar lower
hull; :func:`envelope_values` evaluates it in bulk using the fact that the
minimum over convex combinations with a prescribed mean is attained by at
most two points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import Control, ControlConstraint, merged_grid
from .dynamics import Scenario
from .errors import DomainError
from .mesh import Mesh
from .parallel import pmap
from .solver import SolverConfig, Trajectory, solve, state_gap

HULL_TOL = 1e-12


@dataclass(frozen=True)
class EnvelopeFn:
    """Convex piecewise-linear function through ``(us[i], vals[i])``."""

    us: np.ndarray
    vals: np.ndarray

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.us[0]), float(self.us[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.vals) / np.diff(self.us)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        tol = HULL_TOL * max(1.0, abs(lo), abs(hi))
        if np.any((u < lo - tol) | (u > hi + tol)):
            raise DomainError(f"envelope queried outside [{lo}, {hi}]")
        if self.us.size == 1:
            out = np.full(u.shape, self.vals[0])
        else:
            out = np.interp(np.clip(u, lo, hi), self.us, self.vals)
        return float(out) if out.ndim == 0 else out


def lower_convex_envelope(points) -> EnvelopeFn:
    """Lower hull of planar points (monotone chain), as an :class:`EnvelopeFn`."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    pts = pts[np.argsort(pts[:, 0], kind="stable")]
    if np.any(np.diff(pts[:, 0]) == 0):
        raise ValueError("u-values must be distinct")
    hull: list[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    h = np.array(hull)
    return EnvelopeFn(h[:, 0].copy(), h[:, 1].copy())


def envelope_values(us, qs, u, tol=HULL_TOL):
    """Envelope of ``(us[..., k], qs[..., k])`` at ``u``, vectorized.

    Returns ``(value, i, j, theta)`` where ``u = (1-theta) us[i] + theta us[j]``
    is the cheapest two-point representation. Entries with ``u`` outside the
    hull get ``value = inf``.
    """
    us = np.asarray(us, dtype=float)
    qs = np.asarray(qs, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(us.shape[:-1], qs.shape[:-1], u.shape)
    us = np.broadcast_to(us, shape + us.shape[-1:])
    qs = np.broadcast_to(qs, shape + qs.shape[-1:])
    u = np.broadcast_to(u, shape)
    K = us.shape[-1]
    # single points sitting on u
    hit = np.abs(us - u[..., None]) <= tol
    vals = np.where(hit, qs, np.inf)
    bi = np.argmin(vals, axis=-1)
    best = np.take_along_axis(vals, bi[..., None], -1)[..., 0]
    bj = bi.copy()
    bt = np.zeros(shape)
    # chords (i, j > i) strictly bracketing u, vectorized over j
    for i in range(K - 1):
        ui, qi = us[..., i, None], qs[..., i, None]
        uj, qj = us[..., i + 1:], qs[..., i + 1:]
        lo, hi = np.minimum(ui, uj), np.maximum(ui, uj)
        width = hi - lo
        inside = (lo < u[..., None]) & (u[..., None] < hi) & (width > tol)
        safe = np.where(width > tol, width, 1.0)
        th = (u[..., None] - ui) / np.where(uj >= ui, safe, -safe)
        val = np.where(inside, qi + th * (qj - qi), np.inf)
        k = np.argmin(val, axis=-1)
        cand = np.take_along_axis(val, k[..., None], -1)[..., 0]
        better = cand < best
        best = np.where(better, cand, best)
        bi = np.where(better, i, bi)
        bj = np.where(better, i + 1 + k, bj)
        bt = np.where(better, np.take_along_axis(th, k[..., None], -1)[..., 0], bt)
    return best, bi, bj, bt


# -- cost functionals ---------------------------------------------------------

def _quadrature_pieces(s: Scenario, traj: Trajectory, u: Control):
    """Subintervals of the merged (solver, control) grid inside ``[0, T]``.

    Returns ``(lengths, t_mid, state_rows, u_values)``.
    """
    mesh = s.mesh
    if traj.sigma.shape[1] != mesh.n or u.n != mesh.n:
        raise ValueError("trajectory/control node count does not match the mesh")
    T = s.horizon
    times = np.clip(traj.times, 0.0, T)
    grid = merged_grid(u, extra=np.append(times, T))
    grid = grid[grid <= T * (1 + 1e-14)]
    grid[-1] = T
    mids = 0.5 * (grid[:-1] + grid[1:])
    k = traj.index_at(mids)
    return np.diff(grid), mids, k, u.value_at(mids)


def _integrate(s: Scenario, lengths, integrand) -> float:
    return float(np.sum(lengths * (integrand @ s.mesh.weights)))


def cost_J(s: Scenario, traj: Trajectory, u: Control) -> float:
    """``int_0^T int_Omega q`` along ``traj`` (trapezoid in x, piecewise constant in t)."""
    lengths, tm, k, uv = _quadrature_pieces(s, traj, u)
    x = s.mesh.x[None, :]
    q = s.cost(tm[:, None], x, traj.sigma[k], traj.v[k], traj.w[k], uv)
    return _integrate(s, lengths, np.broadcast_to(q, uv.shape))


def _relaxed_integrand(s: Scenario, tm, sig, v, w, uv):
    x = s.mesh.x[None, :]
    t = tm[:, None]
    pts = s.constraint.points_at(t, x, sig, v, w)
    qs = s.cost(t[..., None], x[..., None], sig[..., None], v[..., None], w[..., None], pts)
    val, _, _, _ = envelope_values(pts, qs, uv)
    if not np.all(np.isfinite(val)):
        r, c = np.argwhere(~np.isfinite(val))[0]
        raise DomainError(
            f"control {uv[r, c]!r} outside co U at t={tm[r]:.6g}, x={s.mesh.x[c]:.6g}"
        )
    return val


def cost_J_relaxed(s: Scenario, traj: Trajectory, u: Control) -> float:
    """Same quadrature as :func:`cost_J` with the convexified integrand."""
    lengths, tm, k, uv = _quadrature_pieces(s, traj, u)
    val = _relaxed_integrand(s, tm, traj.sigma[k], traj.v[k], traj.w[k], uv)
    return _integrate(s, lengths, val)


def admissibility_defect(s: Scenario, traj: Trajectory, u: Control, relaxed: bool = False) -> float:
    """Max distance from ``u(t, x)`` to ``U`` (or ``co U``) along ``traj``."""
    _, tm, k, uv = _quadrature_pieces(s, traj, u)
    pts = s.constraint.points_at(tm[:, None], s.mesh.x[None, :], traj.sigma[k], traj.v[k], traj.w[k])
    if relaxed:
        d = np.maximum(np.maximum(pts.min(-1) - uv, uv - pts.max(-1)), 0.0)
    else:
        d = np.min(np.abs(pts - uv[..., None]), axis=-1)
    return float(np.max(d))


# -- chattering ---------------------------------------------------------------

def chatter(
    u_star: Control,
    constraint: ControlConstraint,
    n: int,
    *,
    scenario: Scenario | None = None,
    traj: Trajectory | None = None,
    mesh: Mesh | None = None,
) -> Control:
    """``U``-valued duty-cycle control whose partial integrals track ``u_star``.

    Every cell of ``u_star`` is split into ``n`` subcells. On each subcell the
    relaxed value is written as a convex combination of two points of ``U``
    and realized by spending the matching fractions of the subcell on them
    (lower point first). With ``scenario`` the two points are the ones
    realizing the convexified cost at the relaxed state, so the chattered
    cost tracks the relaxed one; otherwise the nearest bracketing points are
    used. State-dependent sets are evaluated along ``traj``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if constraint.state_dependent and traj is None:
        raise ValueError("state-dependent constraint needs the relaxed trajectory")
    if scenario is not None and traj is None:
        raise ValueError("cost-aware bracketing needs the relaxed trajectory")
    if mesh is None:
        mesh = scenario.mesh if scenario is not None else None
    nodes = u_star.n
    x = mesh.x if mesh is not None else np.zeros(nodes)

    grid_out = [0.0]
    vals_out: list[np.ndarray] = []
    g = u_star.time_grid
    for c in range(len(u_star)):
        ustar = u_star.values[c]
        edges = np.linspace(g[c], g[c + 1], n + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            if traj is not None:
                r = traj.index_at(a)
                sig, v, w = traj.sigma[r], traj.v[r], traj.w[r]
            else:
                sig = v = w = np.zeros(nodes)
            pts = np.asarray(constraint.points_at(a, x, sig, v, w), dtype=float)
            pts = np.broadcast_to(pts, (nodes, pts.shape[-1]))
            lo_p, hi_p = pts.min(-1), pts.max(-1)
            tol = HULL_TOL * max(1.0, float(np.max(np.abs(pts))))
            bad = (ustar < lo_p - tol) | (ustar > hi_p + tol)
            if np.any(bad):
                node = int(np.argmax(bad))
                raise DomainError(
                    f"u_star={ustar[node]!r} outside co U=[{lo_p[node]}, {hi_p[node]}] "
                    f"at t={a:.6g}, node {node}"
                )
            us = np.clip(ustar, lo_p, hi_p)
            if scenario is not None:
                qs = scenario.cost(a, x[:, None], sig[:, None], v[:, None], w[:, None], pts)
                _, i, j, th = envelope_values(pts, qs, us, tol=tol)
            else:
                i, j, th = _nearest_bracket(pts, us, tol)
            rows = np.arange(nodes)
            p_i, p_j = pts[rows, i], pts[rows, j]
            low_first = p_i <= p_j
            first = np.where(low_first, p_i, p_j)
            second = np.where(low_first, p_j, p_i)
            frac_second = np.where(low_first, th, 1.0 - th)
            split = a + (1.0 - frac_second) * (b - a)
            inner = np.unique(split[(split > a) & (split < b)])
            if inner.size:
                keep = np.concatenate([[True], np.diff(inner) > 1e-14 * (b - a)])
                inner = inner[keep]
            cuts = np.concatenate([[a], inner, [b]])
            for lo_t, hi_t in zip(cuts[:-1], cuts[1:]):
                mid = 0.5 * (lo_t + hi_t)
                row = np.where(mid < split, first, second)
                if vals_out and np.array_equal(row, vals_out[-1]):
                    grid_out[-1] = hi_t
                else:
                    vals_out.append(row)
                    grid_out.append(hi_t)
    grid_out[-1] = u_star.horizon
    return Control(np.array(grid_out), np.array(vals_out))


def _nearest_bracket(pts, u, tol):
    """Indices of the closest points of ``U`` below and above ``u``."""
    below = np.where(pts <= u[:, None] + tol, pts, -np.inf)
    above = np.where(pts >= u[:, None] - tol, pts, np.inf)
    i = np.argmax(below, axis=-1)
    j = np.argmin(above, axis=-1)
    rows = np.arange(pts.shape[0])
    width = pts[rows, j] - pts[rows, i]
    th = np.where(width > tol, (u - pts[rows, i]) / np.where(width > tol, width, 1.0), 0.0)
    return i, j, np.clip(th, 0.0, 1.0)


def weak_gap(u_a: Control, u_b: Control, mesh: Mesh) -> float:
    """``sup_{s<=t} |int_s^t (u_a - u_b)|_H`` over the merged breakpoint grid.

    The partial integral is piecewise linear between merged breakpoints and
    the norm of a difference is convex, so the grid maximum is the exact
    supremum.
    """
    if u_a.n != mesh.n or u_b.n != mesh.n:
        raise ValueError("control node count does not match the mesh")
    if not np.isclose(u_a.horizon, u_b.horizon, rtol=1e-12, atol=0.0):
        raise ValueError("controls have different horizons")
    grid = merged_grid(u_a, u_b)
    G = u_a.integral(grid) - u_b.integral(grid)
    if not np.any(G):
        return 0.0
    wts = mesh.weights
    norms = (G * G) @ wts
    best, arg = -np.inf, (0, 0)
    block = 1024
    Gw = G * wts
    for start in range(0, G.shape[0], block):
        gram = Gw[start:start + block] @ G.T
        d2 = norms[start:start + block, None] + norms[None, :] - 2.0 * gram
        k = int(np.argmax(d2))
        r, c = divmod(k, d2.shape[1])
        if d2[r, c] > best:
            best, arg = d2[r, c], (start + r, c)
    d = G[arg[0]] - G[arg[1]]
    return float(np.sqrt(np.sum(wts * d * d)))


# -- chattering probe ---------------------------------------------------------

@dataclass
class GapRow:
    n: int
    weak_gap: float
    state_gap: float
    cost_gap: float
    j_chattered: float
    j_relaxed: float
    fixed_state_cost_gap: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cost_gap_probe(s: Scenario, cfg: SolverConfig, u_star: Control, n_list, *, relaxed_traj=None) -> list[GapRow]:
    """Chatter ``u_star`` at each ``n`` and measure the three convergences.

    ``cost_gap`` compares the relaxed cost along the relaxed trajectory with
    the original cost of the chattered control along its own trajectory;
    ``fixed_state_cost_gap`` evaluates the chattered cost along the relaxed
    trajectory instead.
    """
    ref = relaxed_traj if relaxed_traj is not None else solve(s, cfg, u_star)
    j_rel = cost_J_relaxed(s, ref, u_star)

    def one(n):
        gamma = chatter(u_star, s.constraint, n, scenario=s, traj=ref)
        tr = solve(s, cfg, gamma)
        j_n = cost_J(s, tr, gamma)
        return GapRow(
            n=int(n),
            weak_gap=weak_gap(u_star, gamma, s.mesh),
            state_gap=state_gap(s, tr, ref),
            cost_gap=abs(j_rel - j_n),
            j_chattered=j_n,
            j_relaxed=j_rel,
            fixed_state_cost_gap=abs(j_rel - cost_J(s, ref, gamma)),
        )

    return pmap(one, list(n_list))
