"""Run configuration: YAML schema, unit handling, and built-in defaults.

Configs are plain YAML with nested sections (see ``configs/`` for committed
examples).  Scalar values may carry a unit suffix, e.g. ``11 kPa`` or
``0.4 N``; everything is converted to strict SI at parse time.  Bare
numbers are taken as SI already.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .models import registered_models
from .probabilistic import TruncatedNormalPrior
from .sweep import CouplingSweepSpec, ObservationPlan, SweepSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


#: SI conversion factors for accepted unit suffixes.
UNIT_FACTORS = {
    "Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9,
    "m": 1.0, "mm": 1e-3, "cm": 1e-2, "um": 1e-6,
    "N": 1.0, "kN": 1e3, "mN": 1e-3,
    "V": 1.0, "kV": 1e3,
    "A": 1.0, "mA": 1e-3,
    "ohm.m": 1.0, "ohm*m": 1.0, "ohm m": 1.0, "Ohm.m": 1.0, "Ohm m": 1.0,
}

_INF_TOKENS = {"inf", ".inf", "infinity", "+inf"}


def parse_quantity(value, where: str = "value") -> float:
    """Parse a number, an infinity token, or a ``<number> <unit>`` string."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in _INF_TOKENS:
            return math.inf
        try:
            return float(text)
        except ValueError:
            pass
        parts = text.split(None, 1)
        if len(parts) == 2:
            number, unit = parts
            unit = unit.strip()
            if unit in UNIT_FACTORS:
                try:
                    return float(number) * UNIT_FACTORS[unit]
                except ValueError:
                    raise ConfigError(
                        f"{where}: {number!r} is not a number") from None
            raise ConfigError(
                f"{where}: unknown unit {unit!r}; "
                f"accepted: {', '.join(sorted(UNIT_FACTORS))}")
    raise ConfigError(f"{where}: cannot parse {value!r} as a quantity")


def _quantity_list(values, where: str) -> list[float]:
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"{where}: expected a list")
    return [parse_quantity(v, f"{where}[{i}]") for i, v in enumerate(values)]


@dataclass(frozen=True)
class FieldSpec:
    """Observation configuration of one field."""

    field_id: int
    count: int
    snr: float
    coord_range: tuple[float, float]

    def plan(self) -> ObservationPlan:
        return ObservationPlan(count=self.count, snr=self.snr,
                               coord_min=self.coord_range[0],
                               coord_max=self.coord_range[1])


@dataclass(frozen=True)
class AxisSpec:
    """Explicit values or a generated linear/log axis."""

    values: tuple[float, ...] | None = None
    start: float | None = None
    stop: float | None = None
    num: int | None = None
    spacing: str = "log"
    integer: bool = False

    def resolve(self, num_override: int | None = None) -> tuple:
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
        else:
            num = num_override or self.num
            if self.spacing == "log":
                vals = np.geomspace(self.start, self.stop, num)
            elif self.spacing == "linear":
                vals = np.linspace(self.start, self.stop, num)
            else:
                raise ConfigError(f"unknown axis spacing {self.spacing!r}")
        if self.integer:
            return tuple(int(v) for v in np.unique(np.round(vals)).astype(int))
        return tuple(float(v) for v in vals)


@dataclass(frozen=True)
class SweepConfig:
    kind: str = "riig"
    n_obs2: AxisSpec = field(default_factory=AxisSpec)
    snr2: AxisSpec = field(default_factory=AxisSpec)
    snr1: AxisSpec | None = None
    coupling: AxisSpec | None = None
    full_num: tuple[int, int] = (50, 12)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs: model, truth, prior, observations, grid."""

    model: str
    constants: dict
    truth: tuple[float, ...]
    prior: TruncatedNormalPrior
    fields: tuple[FieldSpec, ...]
    grid_shape: tuple[int, ...]
    sweep: SweepConfig | None = None
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.model not in registered_models():
            raise ConfigError(
                f"model: unknown model {self.model!r}; "
                f"registered: {', '.join(registered_models())}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers}")
        ids = [f.field_id for f in self.fields]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"fields: duplicate field ids {ids}")

    def field_spec(self, field_id: int) -> FieldSpec:
        for spec in self.fields:
            if spec.field_id == field_id:
                return spec
        raise ConfigError(f"no field {field_id} configured")

    def riig_sweep_spec(self, full: bool = False) -> SweepSpec:
        if self.sweep is None:
            raise ConfigError("this configuration has no sweep section")
        first = self.field_spec(1)
        try:
            second_range = self.field_spec(2).coord_range
        except ConfigError:
            second_range = first.coord_range
        n_override = self.sweep.full_num[0] if full else None
        s_override = self.sweep.full_num[1] if full else None
        return SweepSpec(
            model_name=self.model, model_constants=dict(self.constants),
            truth=self.truth, prior=self.prior, first_field=first.plan(),
            n_obs2_axis=self.sweep.n_obs2.resolve(n_override),
            snr2_axis=self.sweep.snr2.resolve(s_override),
            grid_shape=self.grid_shape, second_field_range=second_range)

    def coupling_sweep_spec(self) -> CouplingSweepSpec:
        if self.sweep is None or self.sweep.kind != "coupling":
            raise ConfigError("this configuration has no coupling sweep")
        if self.sweep.snr1 is None or self.sweep.coupling is None:
            raise ConfigError("a coupling sweep needs snr1 and coupling axes")
        first = self.field_spec(1)
        second = self.field_spec(2)
        return CouplingSweepSpec(
            model_name=self.model, model_constants=dict(self.constants),
            truth=self.truth, prior=self.prior,
            n_obs1=first.count, n_obs2=second.count,
            first_field_range=first.coord_range,
            second_field_range=second.coord_range,
            snr1_axis=self.sweep.snr1.resolve(),
            snr2_axis=self.sweep.snr2.resolve(),
            coupling_axis=self.sweep.coupling.resolve(),
            grid_shape=self.grid_shape)


def _parse_axis(section, where: str) -> AxisSpec:
    if isinstance(section, (list, tuple)):
        return AxisSpec(values=tuple(
            parse_quantity(v, f"{where}[{i}]") for i, v in enumerate(section)))
    if isinstance(section, dict):
        known = {"start", "stop", "num", "spacing", "integer"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        return AxisSpec(
            start=parse_quantity(section["start"], f"{where}.start"),
            stop=parse_quantity(section["stop"], f"{where}.stop"),
            num=int(section["num"]),
            spacing=section.get("spacing", "log"),
            integer=bool(section.get("integer", False)))
    raise ConfigError(f"{where}: expected a list or start/stop/num mapping")


def _parse_prior(section) -> TruncatedNormalPrior:
    if not isinstance(section, dict):
        raise ConfigError("prior: expected a mapping")
    for key in ("mean", "sd", "lower", "upper"):
        if key not in section:
            raise ConfigError(f"prior.{key}: missing")
    mean = _quantity_list(section["mean"], "prior.mean")
    sd = _quantity_list(section["sd"], "prior.sd")
    lower = _quantity_list(section["lower"], "prior.lower")
    upper = _quantity_list(section["upper"], "prior.upper")
    try:
        return TruncatedNormalPrior(mean=np.array(mean),
                                    variance=np.array(sd) ** 2,
                                    lower=np.array(lower),
                                    upper=np.array(upper))
    except ValueError as exc:
        raise ConfigError(f"prior: {exc}") from exc


def _parse_field(section, index: int) -> FieldSpec:
    where = f"fields[{index}]"
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping")
    try:
        field_id = int(section["id"])
        count = int(section["count"])
        snr = parse_quantity(section["snr"], f"{where}.snr")
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from exc
    coord_range = section.get("range", [0.0, 1.0])
    lo, hi = _quantity_list(coord_range, f"{where}.range")
    if count < 0:
        raise ConfigError(f"{where}.count: must be >= 0")
    if count > 0 and not snr > 0:
        raise ConfigError(f"{where}.snr: must be > 0")
    return FieldSpec(field_id=field_id, count=count, snr=snr,
                     coord_range=(lo, hi))


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    known = {"model", "constants", "truth", "prior", "fields", "grid",
             "sweep", "output_dir", "workers"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
    for key in ("model", "truth", "prior", "fields"):
        if key not in data:
            raise ConfigError(f"{key}: missing")

    constants = {
        name: parse_quantity(value, f"constants.{name}")
        for name, value in (data.get("constants") or {}).items()
    }
    truth = tuple(_quantity_list(data["truth"], "truth"))
    prior = _parse_prior(data["prior"])
    fields = tuple(_parse_field(f, i) for i, f in enumerate(data["fields"]))
    grid = data.get("grid", [100] * prior.dim)
    if isinstance(grid, int):
        grid = [grid] * prior.dim
    grid_shape = tuple(int(n) for n in grid)

    sweep_cfg = None
    if "sweep" in data and data["sweep"] is not None:
        section = data["sweep"]
        kind = section.get("kind", "riig")
        if kind not in ("riig", "coupling"):
            raise ConfigError(f"sweep.kind: unknown kind {kind!r}")
        full_num = tuple(int(n) for n in section.get("full_num", (50, 12)))
        sweep_cfg = SweepConfig(
            kind=kind,
            n_obs2=_parse_axis(section["n_obs2"], "sweep.n_obs2")
            if "n_obs2" in section else AxisSpec(),
            snr2=_parse_axis(section["snr2"], "sweep.snr2"),
            snr1=_parse_axis(section["snr1"], "sweep.snr1")
            if "snr1" in section else None,
            coupling=_parse_axis(section["coupling"], "sweep.coupling")
            if "coupling" in section else None,
            full_num=full_num)

    try:
        return RunConfig(model=data["model"], constants=constants,
                         truth=truth, prior=prior, fields=fields,
                         grid_shape=grid_shape, sweep=sweep_cfg,
                         output_dir=str(data.get("output_dir", "out")),
                         workers=int(data.get("workers", 1)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    with open(path) as handle:
        data = yaml.safe_load(handle)
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def default_config() -> RunConfig:
    """Built-in tensile-test configuration: 16 displacement observations at
    SNR 50 plus 2 current observations at SNR 1.2e4, forces on [0, 0.4] N."""
    return RunConfig(
        model="electromech",
        constants={},
        truth=(11e3, 0.35),
        prior=TruncatedNormalPrior(mean=np.array([10e3, 0.3]),
                                   variance=np.array([2e3, 0.15]) ** 2,
                                   lower=np.array([0.0, 0.0]),
                                   upper=np.array([np.inf, 0.5])),
        fields=(FieldSpec(field_id=1, count=16, snr=50.0,
                          coord_range=(0.0, 0.4)),
                FieldSpec(field_id=2, count=2, snr=1.2e4,
                          coord_range=(0.0, 0.4))),
        grid_shape=(100, 100),
        sweep=SweepConfig(
            kind="riig",
            n_obs2=AxisSpec(start=2, stop=256, num=10, spacing="log",
                            integer=True),
            snr2=AxisSpec(start=80.0, stop=1.2e4, num=6, spacing="log"),
            full_num=(50, 12)),
        output_dir="out",
        workers=1)


def high_noise_second_field_config() -> RunConfig:
    """Variant with many noisy second-field observations (256 at SNR 80)."""
    base = default_config()
    fields = (base.field_spec(1),
              FieldSpec(field_id=2, count=256, snr=80.0,
                        coord_range=(0.0, 0.4)))
    return RunConfig(model=base.model, constants=base.constants,
                     truth=base.truth, prior=base.prior, fields=fields,
                     grid_shape=base.grid_shape, sweep=base.sweep,
                     output_dir=base.output_dir, workers=base.workers)
