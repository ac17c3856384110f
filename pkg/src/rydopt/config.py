"""Declarative run configuration (YAML).

Physical numbers are given in MHz (ordinary frequency), us and um and are
converted once when the library objects are built. Unknown keys and
ill-typed values are rejected with the offending line number.
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from rydopt.basis import Truncation, build_basis
from rydopt.errors import ConfigError
from rydopt.hamiltonian import assemble, critical_detuning
from rydopt.lattice import (
    DEFAULT_BLOCKADE_BOUND,
    LatticeGeometry,
    build_bar,
    build_corner_square,
    build_custom,
    perfect_realization,
    reduce_to_superatoms,
)
from rydopt.model import (
    C6_SI,
    DECAY_RATE_KHZ,
    LATTICE_SPACING_UM,
    PhysicalModel,
    c6_si_to_internal,
    mhz_to_angular,
)
from rydopt.observables import TargetState
from rydopt.optimizer import OptimizationProblem
from rydopt.pulse import ControlConstraints, FieldParams, Guess, PulseParams


@dataclass
class ModelSection:
    c6_si: float = C6_SI
    lattice_spacing_um: float = LATTICE_SPACING_UM
    gamma_decay_per_us: float = DECAY_RATE_KHZ * 1e-3


@dataclass
class GeometrySection:
    kind: str = "bar"
    rows: int = 3
    cols: int = 8
    side: int = 10
    block: int = 2
    sites: list[list[float]] | None = None
    partition: list[list[int]] | None = None
    blockade_bound_a: float = DEFAULT_BLOCKADE_BOUND


@dataclass
class EnsembleSection:
    filling: float = 1.0
    n_realizations: int = 1
    seed: int = 0


@dataclass
class BasisSection:
    blockade_radius_um: float | None = None
    max_excitations: int | None = None


@dataclass
class ConstraintsSection:
    omega_max_mhz: float = 0.4
    delta_max_mhz: float = 2.0
    omega_bandwidth_mhz: float = 8.3
    delta_bandwidth_mhz: float = 0.5
    omega_rise_us: float = 0.060
    delta_rise_us: float = 1.0
    delta_start_mhz: float | None = None
    # a number, or "critical" for the all-ground/all-excited crossing
    delta_end_mhz: float | str | None = None


@dataclass
class GuessSection:
    kind: str = "constant"
    start_mhz: float = 0.0
    end_mhz: float | None = None


@dataclass
class PulseSection:
    duration_us: float = 4.0
    dt_us: float = 1e-3
    report_dt_us: float | None = None
    omega_guess: GuessSection = field(default_factory=GuessSection)
    delta_guess: GuessSection = field(default_factory=GuessSection)


@dataclass
class TargetSection:
    kind: str = "crystal"
    n_excitations: int | None = None
    theta: float = 0.0
    coefficients: list[float] | None = None
    final_delta_mhz: float | None = None


@dataclass
class OptimizerSection:
    budget: int = 1000
    n_super_iterations: int = 5
    n_freqs: int = 3
    seed: int = 0
    tol: float = 1e-10


@dataclass
class SpectrumSection:
    delta_min_mhz: float = -0.5
    delta_max_mhz: float = 2.0
    n_points: int = 201


@dataclass
class StaircaseSection:
    lengths: list[int] = field(default_factory=lambda: list(range(4, 15)))
    rows: int = 3
    delta_mhz: float | None = None


@dataclass
class DetectionSection:
    omega_m_mhz: float = 0.4
    t_max_us: float = 10.0
    dt_us: float = 0.01
    theta_target: float = math.pi / 2
    n_gamma: int = 21
    n_alpha: int = 37
    unit: int = 0
    n_shots: int = 1000
    shot_seed: int = 0
    # experimental readout latency; recorded, not simulated
    latency_us: float = 10.0


@dataclass
class SimulateSection:
    record_interval_us: float = 0.01
    adiabaticity: bool = True


@dataclass
class OutputSection:
    dir: str = "out"
    figures: bool = True
    figure_format: str = "png"


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    basis: BasisSection = field(default_factory=BasisSection)
    constraints: ConstraintsSection = field(default_factory=ConstraintsSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    target: TargetSection = field(default_factory=TargetSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    staircase: StaircaseSection = field(default_factory=StaircaseSection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


# --- parsing -----------------------------------------------------------------

_CONSTRUCTOR = yaml.SafeLoader("")


def _plain(node: yaml.Node):
    """(value, line) tree; mappings keep per-key line numbers."""
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = _CONSTRUCTOR.construct_object(k)
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _plain(v)
        return out, line
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v) for v in node.value], line
    return _CONSTRUCTOR.construct_object(node), line


def _strip(tree):
    value, _ = tree
    if isinstance(value, dict):
        return {k: _strip(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_strip(v) for v in value]
    return value


def _coerce(value, hint, where: str, tree):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if value is None and type(None) in args:
            return None
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(value, arg, where, tree)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(errors[0])
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return _section(hint, tree, where.split(": ")[-1] + ".")
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        (item,) = typing.get_args(hint)
        prefix = where.split(": ", 1)[1]
        return [_coerce(_strip(t), item, f"line {t[1]}: {prefix}", t) for t in tree[0]]
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        # YAML 1.1 reads "1e-3" (no dot) as a string
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported type {hint}")


def _section(cls, tree, prefix: str = ""):
    mapping, _ = tree
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for key, sub in mapping.items():
        line = sub[1]
        if key not in hints:
            known = ", ".join(hints)
            raise ConfigError(f"line {line}: unknown key '{prefix}{key}' (expected one of: {known})")
        kwargs[key] = _coerce(_strip(sub), hints[key], f"line {line}: {prefix}{key}", sub)
    return cls(**kwargs)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{source}: line {mark.line + 1}: {exc.problem}") from None
    if node is None:
        return RunConfig()
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{source}: line 1: top level must be a mapping")
    try:
        return _section(RunConfig, _plain(node))
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


# --- building library objects ------------------------------------------------


def build_model(cfg: RunConfig) -> PhysicalModel:
    m = cfg.model
    if m.c6_si <= 0 or m.lattice_spacing_um <= 0 or m.gamma_decay_per_us < 0:
        raise ConfigError("model constants must be positive")
    return PhysicalModel(c6_si_to_internal(m.c6_si), m.lattice_spacing_um, m.gamma_decay_per_us)


def build_geometry(cfg: RunConfig, cols: int | None = None) -> LatticeGeometry:
    g = cfg.geometry
    if g.kind == "bar":
        return build_bar(g.rows, g.cols if cols is None else cols)
    if g.kind == "corner_square":
        return build_corner_square(g.side, g.block)
    if g.kind == "custom":
        if not g.sites:
            raise ConfigError("custom geometry needs 'sites'")
        return build_custom(g.sites, g.partition)
    raise ConfigError(f"unknown geometry kind {g.kind!r} (bar, corner_square, custom)")


def build_truncation(cfg: RunConfig) -> Truncation:
    return Truncation(cfg.basis.blockade_radius_um, cfg.basis.max_excitations)


def perfect_terms(cfg: RunConfig, model: PhysicalModel | None = None, geometry: LatticeGeometry | None = None):
    model = model or build_model(cfg)
    geometry = geometry or build_geometry(cfg)
    chain = reduce_to_superatoms(perfect_realization(geometry), model, cfg.geometry.blockade_bound_a)
    return assemble(chain, build_basis(chain, build_truncation(cfg)), model)


def _endpoint(value, cfg: RunConfig, name: str) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        if value != "critical":
            raise ConfigError(f"constraints.{name}: expected a number or 'critical', got {value!r}")
        return critical_detuning(perfect_terms(cfg))
    return mhz_to_angular(value)


def build_constraints(cfg: RunConfig) -> ControlConstraints:
    c = cfg.constraints
    return ControlConstraints(
        omega_max=mhz_to_angular(c.omega_max_mhz),
        delta_max=mhz_to_angular(c.delta_max_mhz),
        omega_bandwidth=c.omega_bandwidth_mhz,
        delta_bandwidth=c.delta_bandwidth_mhz,
        omega_rise=c.omega_rise_us,
        delta_rise=c.delta_rise_us,
        delta_start=_endpoint(c.delta_start_mhz, cfg, "delta_start_mhz"),
        delta_end=_endpoint(c.delta_end_mhz, cfg, "delta_end_mhz"),
    )


def _guess(g: GuessSection) -> Guess:
    if g.kind not in {"constant", "linear"}:
        raise ConfigError(f"unknown guess kind {g.kind!r} (constant, linear)")
    end = None if g.end_mhz is None else mhz_to_angular(g.end_mhz)
    return Guess(g.kind, mhz_to_angular(g.start_mhz), end)


def build_guess(cfg: RunConfig) -> PulseParams:
    p = cfg.pulse
    return PulseParams(p.duration_us, FieldParams(_guess(p.omega_guess)), FieldParams(_guess(p.delta_guess)))


def build_target(cfg: RunConfig) -> TargetState:
    t = cfg.target
    return TargetState(
        t.kind,
        n_excitations=t.n_excitations,
        theta=t.theta,
        coefficients=tuple(t.coefficients or ()),
    )


def final_delta(cfg: RunConfig, constraints: ControlConstraints) -> float | None:
    if cfg.target.final_delta_mhz is not None:
        return mhz_to_angular(cfg.target.final_delta_mhz)
    return constraints.delta_end


def build_problem(cfg: RunConfig) -> OptimizationProblem:
    cons = build_constraints(cfg)
    o = cfg.optimizer
    return OptimizationProblem(
        geometry=build_geometry(cfg),
        model=build_model(cfg),
        target=build_target(cfg),
        guess=build_guess(cfg),
        constraints=cons,
        filling=cfg.ensemble.filling,
        n_realizations=cfg.ensemble.n_realizations,
        ensemble_seed=cfg.ensemble.seed,
        truncation=build_truncation(cfg),
        budget=o.budget,
        n_super_iterations=o.n_super_iterations,
        n_freqs=o.n_freqs,
        seed=o.seed,
        dt=cfg.pulse.dt_us,
        tol=o.tol,
        final_delta=final_delta(cfg, cons),
        blockade_bound=cfg.geometry.blockade_bound_a,
    )
