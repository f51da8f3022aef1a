"""Preset catalog of model functions.

Every preset is a factory taking keyword parameters and returning a
vectorized callable. Scenarios refer to presets by name plus params so they
stay serializable; :func:`build` turns such a reference into the callable.

Signatures by role:

- ``lambda``: ``(v)``
- ``f_lo``, ``f_hi``, ``F``, ``h``, ``g``: ``(sigma, v, w)``; the band ends
  ignore ``sigma``
- ``cost``: ``(t, x, sigma, v, w, u)``
- ``constraint``: ``(t, x, sigma, v, w)`` returning points on a trailing axis
- ``init``: ``(x)``; ``band-mid`` is special-cased by the scenario builder
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError

ROLES = ("lambda", "f_lo", "f_hi", "F", "h", "g", "cost", "constraint", "init")

_REGISTRY: dict[str, dict[str, Callable[..., Callable]]] = {r: {} for r in ROLES}


def register(role: str, name: str):
    def deco(factory):
        _REGISTRY[role][name] = factory
        return factory

    return deco


def available(role: str | None = None):
    if role is None:
        return {r: sorted(_REGISTRY[r]) for r in ROLES}
    return sorted(_REGISTRY[role])


@dataclass(frozen=True)
class FunctionSpec:
    """A preset reference: role, name and parameters."""

    role: str
    preset: str
    params: dict[str, Any] = field(default_factory=dict)

    def build(self) -> Callable:
        return build(self.role, self.preset, self.params)

    def to_dict(self) -> dict:
        return {"preset": self.preset, "params": dict(self.params)}


def build(role: str, preset: str, params: dict | None = None) -> Callable:
    if role not in _REGISTRY:
        raise ConfigError(f"unknown function role {role!r}")
    try:
        factory = _REGISTRY[role][preset]
    except KeyError:
        raise ConfigError(
            f"{role}: unknown preset {preset!r} (known: {', '.join(available(role))})"
        ) from None
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"{role}.{preset}: bad params: {exc}") from None


def _full(value, *arrays):
    shape = np.broadcast_shapes(*(np.shape(a) for a in arrays))
    return np.full(shape, float(value))


# -- lambda(v) ---------------------------------------------------------------

@register("lambda", "saturating")
def _lambda_saturating(a=0.5):
    return lambda v: a * v / (1.0 + v)


@register("lambda", "linear")
def _lambda_linear(a=1.0):
    return lambda v: a * np.asarray(v, dtype=float)


@register("lambda", "zero")
def _lambda_zero():
    return lambda v: np.zeros_like(np.asarray(v, dtype=float))


# -- band ends ---------------------------------------------------------------

@register("f_hi", "budworm")
def _f_hi_budworm(b1=1.0):
    return lambda sigma, v, w: 1.0 / (1.0 + b1 * v) + 0.0 * w


@register("f_lo", "budworm")
def _f_lo_budworm(b1=1.0, b2=1.0):
    return lambda sigma, v, w: 1.0 / ((1.0 + b1 * v) * (1.0 + b2 * w))


@register("f_hi", "constant")
@register("f_lo", "constant")
def _band_constant(value=0.0):
    return lambda sigma, v, w: _full(value, v, w)


# -- reactions F, h, g -------------------------------------------------------

@register("F", "logistic")
def _F_logistic():
    return lambda sigma, v, w: sigma * (1.0 - sigma) + 0.0 * (v + w)


@register("h", "logistic")
def _h_logistic(r=1.0, c=0.5):
    return lambda sigma, v, w: r * v * (sigma - c * v) + 0.0 * w


@register("g", "predator")
def _g_predator(d=1.0, e=0.5):
    return lambda sigma, v, w: w * (d * v - e) + 0.0 * sigma


@register("F", "constant")
@register("h", "constant")
@register("g", "constant")
def _reaction_constant(value=0.0):
    return lambda sigma, v, w: _full(value, sigma, v, w)


# -- cost integrands q(t, x, sigma, v, w, u) ---------------------------------

@register("cost", "constant")
def _q_constant(value=1.0):
    return lambda t, x, sigma, v, w, u: _full(value, t, x, sigma, v, w, u)


@register("cost", "linear-u")
def _q_linear_u(c=1.0):
    return lambda t, x, sigma, v, w, u: c * u + 0.0 * (t + x + sigma)


@register("cost", "concave-u")
def _q_concave_u(a=1.0, center=0.5):
    """State-free ``-a (u - center)^2``."""
    return lambda t, x, sigma, v, w, u: -a * (u - center) ** 2 + 0.0 * (t + x + sigma)


@register("cost", "convex-u")
def _q_convex_u(a=1.0, center=0.5):
    return lambda t, x, sigma, v, w, u: a * (u - center) ** 2 + 0.0 * (t + x + sigma)


@register("cost", "tracking")
def _q_tracking(
    w_sigma=1.0, sigma_ref=1.0, w_v=0.0, v_ref=0.0, w_w=0.0, w_ref=0.0, c1=0.0, c2=0.0
):
    """Quadratic tracking of all three densities plus a polynomial control cost."""

    def q(t, x, sigma, v, w, u):
        return (
            w_sigma * (sigma - sigma_ref) ** 2
            + w_v * (v - v_ref) ** 2
            + w_w * (w - w_ref) ** 2
            + c1 * u
            + c2 * u * u
            + 0.0 * (t + x)
        )

    return q


# -- state-dependent admissible point sets -----------------------------------

@register("constraint", "predator-capped")
def _u_predator_capped(m=1.0, beta=1.0):
    """``{0, m / (1 + beta * max(w, 0))}``: spraying capped by predator density."""

    def points(t, x, sigma, v, w):
        top = m / (1.0 + beta * np.maximum(w, 0.0)) + 0.0 * (t + x + sigma + v)
        return np.stack([np.zeros_like(top), top], axis=-1)

    return points


# -- initial data ------------------------------------------------------------

@register("init", "constant")
def _init_constant(value=0.0):
    return lambda x: np.full(np.shape(x), float(value))


@register("init", "gauss-bump")
def _init_gauss_bump(base=0.0, amp=1.0, center=0.5, width=0.1):
    """``base + amp * exp(-((x - center)/width)^2 / 2)``; ``center`` in absolute units."""
    return lambda x: base + amp * np.exp(-0.5 * ((np.asarray(x) - center) / width) ** 2)
