"""Scenario JSON loading and validation.

See ``docs/config.md`` for the schema. Validation errors are raised as
:class:`~hystrelax.errors.ConfigError` with dotted key paths.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from .controls import Control, ControlConstraint, CostModel
from .dynamics import MODEL_ROLES, Scenario
from .errors import ConfigError
from .functions import FunctionSpec, build
from .mesh import Mesh
from .optimizer import OptimizerConfig
from .solver import SolverConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PresetRef(_Strict):
    preset: str
    params: dict[str, Any] = Field(default_factory=dict)


class ModelSection(_Strict):
    lambda_: PresetRef = Field(alias="lambda")
    f_lo: PresetRef
    f_hi: PresetRef
    F: PresetRef
    h: PresetRef
    g: PresetRef


class DomainSection(_Strict):
    x_len: PositiveFloat
    n: int = Field(ge=3)


class TimeSection(_Strict):
    horizon: PositiveFloat


InitValue = Union[PresetRef, list[float]]


class InitSection(_Strict):
    sigma0: InitValue
    v0: InitValue
    w0: InitValue


class ConstraintSection(_Strict):
    mode: Literal["finite_set", "finite_set_state_dep"]
    m: PositiveFloat
    points: Optional[list[float]] = None
    preset: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _mode_fields(self):
        if self.mode == "finite_set" and not self.points:
            raise ValueError("finite_set mode needs a nonempty 'points' list")
        if self.mode == "finite_set_state_dep" and not self.preset:
            raise ValueError("finite_set_state_dep mode needs 'preset'")
        return self


class SolverSection(_Strict):
    dt: PositiveFloat = 1e-3
    hysteresis: str = "projection"
    record_every: int = Field(default=1, ge=1)


class OptimizerSection(_Strict):
    time_cells: int = Field(default=8, ge=1)
    space_cells: int = Field(default=1, ge=1)
    method: Literal["compass_search", "projected_fd_gradient"] = "compass_search"
    max_iters: int = Field(default=200, ge=1)
    step_init: PositiveFloat = 0.25
    step_min: PositiveFloat = 1e-3
    fd_eps: PositiveFloat = 1e-4


class ExperimentSection(_Strict):
    n_list: list[int] = Field(default_factory=lambda: [8, 32, 128])
    mu_list: list[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4])


class ControlSection(_Strict):
    value: Optional[float] = None
    cells: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.value is None) == (self.cells is None):
            raise ValueError("give exactly one of 'value' or 'cells'")
        return self


class ScenarioConfig(_Strict):
    name: str = "scenario"
    description: str = ""
    model: ModelSection
    domain: DomainSection
    time: TimeSection
    kappa: PositiveFloat
    init: InitSection
    cost: PresetRef
    constraint: ConstraintSection
    solver: SolverSection = Field(default_factory=SolverSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    control: Optional[ControlSection] = None
    seed: int = 0


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"] if not str(p).startswith(("function-", "list[")))
        lines.append(f"{loc or '<root>'}: {e['msg']}")
    return "; ".join(lines)


def parse_config(raw: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


# -- preset files -------------------------------------------------------------

def preset_names() -> list[str]:
    root = resources.files("hystrelax") / "data" / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_config(name: str) -> dict:
    root = resources.files("hystrelax") / "data" / "presets"
    f = root / f"{name}.json"
    if not f.is_file():
        raise ConfigError(f"unknown scenario preset {name!r} (known: {', '.join(preset_names())})")
    return json.loads(f.read_text())


def load_config(path: str | Path) -> dict:
    """Read a scenario JSON file.

    A bare preset name, or a missing ``presets/<name>.json`` path whose stem is
    a bundled preset, resolves to the bundled copy.
    """
    p = Path(path)
    if p.is_file():
        try:
            return json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in preset_names():
        return preset_config(stem)
    raise ConfigError(f"config file not found: {path}")


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


# -- builders -----------------------------------------------------------------

def _init_field(ref, mesh, name):
    if isinstance(ref, list):
        arr = np.asarray(ref, dtype=float)
        if arr.size != mesh.n:
            raise ConfigError(f"init.{name}: expected {mesh.n} nodal values, got {arr.size}")
        return arr
    return np.asarray(build("init", ref.preset, ref.params)(mesh.x), dtype=float) * np.ones(mesh.n)


def build_scenario(raw: dict | ScenarioConfig) -> Scenario:
    cfg = raw if isinstance(raw, ScenarioConfig) else parse_config(raw)
    mesh = Mesh(cfg.domain.x_len, cfg.domain.n)
    model = {}
    for role in MODEL_ROLES:
        ref = getattr(cfg.model, "lambda_" if role == "lambda" else role)
        spec = FunctionSpec(role, ref.preset, dict(ref.params))
        spec.build()
        model[role] = spec

    v0 = _init_field(cfg.init.v0, mesh, "v0")
    w0 = _init_field(cfg.init.w0, mesh, "w0")
    s0 = cfg.init.sigma0
    if isinstance(s0, PresetRef) and s0.preset == "band-mid":
        zero = np.zeros(mesh.n)
        lo = model["f_lo"].build()(zero, v0, w0)
        hi = model["f_hi"].build()(zero, v0, w0)
        frac = float(s0.params.get("frac", 0.5))
        sigma0 = lo + frac * (hi - lo)
    else:
        sigma0 = _init_field(s0, mesh, "sigma0")

    c = cfg.constraint
    if c.mode == "finite_set":
        constraint = ControlConstraint("finite_set", c.m, tuple(c.points))
    else:
        constraint = ControlConstraint(
            "finite_set_state_dep", c.m, spec=FunctionSpec("constraint", c.preset, dict(c.params))
        )
    cost = CostModel(FunctionSpec("cost", cfg.cost.preset, dict(cfg.cost.params)))
    init_spec = {
        k: (v if isinstance(v, list) else v.model_dump())
        for k, v in (("sigma0", cfg.init.sigma0), ("v0", cfg.init.v0), ("w0", cfg.init.w0))
    }
    return Scenario(
        model=model,
        kappa=cfg.kappa,
        horizon=cfg.time.horizon,
        mesh=mesh,
        sigma0=sigma0,
        v0=v0,
        w0=w0,
        cost=cost,
        constraint=constraint,
        name=cfg.name,
        init_spec=init_spec,
    )


def build_solver_config(raw: dict | ScenarioConfig) -> SolverConfig:
    cfg = raw if isinstance(raw, ScenarioConfig) else parse_config(raw)
    sc = cfg.solver
    return SolverConfig.parse_mode(sc.hysteresis, dt=sc.dt, record_every=sc.record_every)


def build_optimizer_config(raw: dict | ScenarioConfig) -> OptimizerConfig:
    cfg = raw if isinstance(raw, ScenarioConfig) else parse_config(raw)
    o = cfg.optimizer
    return OptimizerConfig(
        time_cells=o.time_cells,
        space_cells=o.space_cells,
        method=o.method,
        max_iters=o.max_iters,
        step_init=o.step_init,
        step_min=o.step_min,
        fd_eps=o.fd_eps,
        seed=cfg.seed,
    )


def build_control(raw: dict | ScenarioConfig, s: Scenario) -> Control:
    """Control for ``simulate``/``mu-study``; defaults to the midpoint of co U."""
    cfg = raw if isinstance(raw, ScenarioConfig) else parse_config(raw)
    c = cfg.control
    if c is None:
        lo, hi = s.constraint.outer_bounds()
        return Control.constant(0.5 * (lo + hi), s.mesh.n, s.horizon)
    if c.value is not None:
        return Control.constant(c.value, s.mesh.n, s.horizon)
    try:
        return Control.from_cells(c.cells, s.mesh, s.horizon)
    except ValueError as exc:
        raise ConfigError(f"control.cells: {exc}") from None


def load_scenario(path_or_name: str | Path) -> Scenario:
    return build_scenario(load_config(path_or_name))
