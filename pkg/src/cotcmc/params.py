"""Parameter records, validation, normalization and config-file ingestion.

All user-facing quantities are SI (amps, seconds, rad/s).  The hatted
dimensionless quantities are always derived from the physical records,
never supplied directly, so the two views cannot drift apart.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ParameterError",
    "ConfigError",
    "ConverterParams",
    "FilterSpec",
    "SineComponent",
    "PhaseMode",
    "InterferenceSpec",
    "NormalizedParams",
    "SimSettings",
    "normalize",
    "denormalize",
    "load_config",
    "dump_config",
]


class ParameterError(ValueError):
    """A parameter value violates its invariant; the message names the field."""


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


def _require(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ParameterError(f"{name}: {msg}")


def _finite_positive(value: float, name: str) -> None:
    _require(math.isfinite(value), name, f"must be finite, got {value!r}")
    _require(value > 0.0, name, f"must be positive, got {value!r}")


@dataclass(frozen=True)
class ConverterParams:
    """Physical converter constants for constant off-time peak current control.

    m1/m2 are the inductor-current rise/fall slopes [A/s], t_off the fixed
    off time, t_on_min the comparator blanking time, i_max the largest
    admissible peak-current command and i_c the active command.
    """

    m1: float
    m2: float
    t_off: float
    t_on_min: float
    i_max: float
    i_c: float

    def __post_init__(self) -> None:
        for name in ("m1", "m2", "t_off", "t_on_min", "i_max"):
            _finite_positive(getattr(self, name), name)
        _require(math.isfinite(self.i_c), "i_c", "must be finite")
        _require(0.0 <= self.i_c <= self.i_max, "i_c",
                 f"must lie in [0, i_max={self.i_max}], got {self.i_c}")


@dataclass(frozen=True)
class FilterSpec:
    """First-order low-pass filter with time constant tau [s]."""

    tau: float

    def __post_init__(self) -> None:
        _finite_positive(self.tau, "tau")


class PhaseMode(str, Enum):
    """How interference phase relates to switching instants.

    LOCKED restarts the phase at each on-interval start (local time);
    FREERUN evolves the phase in absolute time across cycles.
    """

    LOCKED = "locked"
    FREERUN = "freerun"


@dataclass(frozen=True)
class SineComponent:
    """One sinusoidal interference component: amp*sin(omega*t + phase)."""

    amp: float
    omega: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        _require(math.isfinite(self.amp) and self.amp >= 0.0, "amp",
                 f"must be finite and >= 0, got {self.amp!r}")
        _finite_positive(self.omega, "omega")
        _require(math.isfinite(self.phase), "phase", "must be finite")


@dataclass(frozen=True)
class InterferenceSpec:
    """Amplitude/bandwidth-limited interference as a finite sum of sinusoids.

    The amplitude budget a_ub = sum of component amplitudes and the
    frequency floor omega_l = smallest component frequency are the two
    quantities the stability criteria consume.  An empty component list
    means no interference (a_ub = 0, omega_l = +inf so every
    frequency-attenuation factor collapses to 0).
    """

    components: tuple[SineComponent, ...] = ()
    phase_mode: PhaseMode = PhaseMode.FREERUN

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if not isinstance(self.phase_mode, PhaseMode):
            object.__setattr__(self, "phase_mode", PhaseMode(self.phase_mode))

    @property
    def a_ub(self) -> float:
        return sum(c.amp for c in self.components)

    @property
    def omega_l(self) -> float:
        return min((c.omega for c in self.components), default=math.inf)

    @property
    def omega_max(self) -> float:
        return max((c.omega for c in self.components), default=0.0)

    def with_extra_phase(self, delta: float) -> "InterferenceSpec":
        """Shift every component phase by delta (used for phase screening)."""
        return replace(self, components=tuple(
            replace(c, phase=c.phase + delta) for c in self.components))


@dataclass(frozen=True)
class NormalizedParams:
    """Dimensionless parameter set entering both stability criteria.

    Times are measured in units of t_base and currents in units of
    m1*t_base; t_base and m1 are recorded so the normalization can be
    inverted.  b and d are the filter decay factors over the minimum full
    period and the minimum on time.
    """

    tau_hat: float
    a_ub_hat: float
    i_max_hat: float
    omega_l_hat: float
    t_on_min_hat: float
    t_base: float
    m1: float

    def __post_init__(self) -> None:
        _finite_positive(self.tau_hat, "tau_hat")
        _finite_positive(self.t_on_min_hat, "t_on_min_hat")
        _finite_positive(self.t_base, "t_base")
        _finite_positive(self.m1, "m1")
        for name in ("a_ub_hat", "i_max_hat"):
            v = getattr(self, name)
            _require(math.isfinite(v) and v >= 0.0, name,
                     f"must be finite and >= 0, got {v!r}")
        _require(self.omega_l_hat > 0.0, "omega_l_hat",
                 f"must be positive (possibly +inf), got {self.omega_l_hat!r}")

    @property
    def t_min_hat(self) -> float:
        return self.t_on_min_hat + 1.0

    @property
    def b(self) -> float:
        return math.exp(-self.t_min_hat / self.tau_hat)

    @property
    def d(self) -> float:
        return math.exp(-self.t_on_min_hat / self.tau_hat)

    @property
    def attenuation(self) -> float:
        """1/sqrt(1 + (omega_l*tau)^2) evaluated from the hatted pair."""
        if math.isinf(self.omega_l_hat):
            return 0.0
        x = 2.0 * math.pi * self.omega_l_hat * self.tau_hat
        return 1.0 / math.sqrt(1.0 + x * x)


@dataclass(frozen=True)
class SimSettings:
    """Optional simulation settings with documented defaults."""

    dt_max: float | None = None      # dense-waveform sample step [s]
    n_cycles: int = 500
    tol: float | None = None         # crossing tolerance [s]; default 1e-10*t_off

    def __post_init__(self) -> None:
        if self.dt_max is not None:
            _finite_positive(self.dt_max, "dt_max")
        _require(self.n_cycles >= 1, "n_cycles",
                 f"must be >= 1, got {self.n_cycles}")
        if self.tol is not None:
            _finite_positive(self.tol, "tol")


def normalize(cp: ConverterParams, fs: FilterSpec,
              interference: InterferenceSpec) -> NormalizedParams:
    """Map physical parameters onto the dimensionless set.

    The time base is the fixed off time t_off: in constant off-time
    control the on time varies, and t_min_hat = t_on_min_hat + 1 is only
    coherent when the "+1" is t_off/t_off.
    """
    t_base = cp.t_off
    i_base = cp.m1 * t_base
    omega_l = interference.omega_l
    return NormalizedParams(
        tau_hat=fs.tau / t_base,
        a_ub_hat=interference.a_ub / i_base,
        i_max_hat=cp.i_max / i_base,
        omega_l_hat=omega_l * t_base / (2.0 * math.pi),
        t_on_min_hat=cp.t_on_min / t_base,
        t_base=t_base,
        m1=cp.m1,
    )


def denormalize(np_: NormalizedParams) -> dict[str, float]:
    """Physical quantities recovered from a normalized set.

    The interference budget is returned as a single equivalent sinusoid
    (amp = a_ub, omega = omega_l); normalize() of the result reproduces
    the hatted fields exactly.
    """
    t_base = np_.t_base
    i_base = np_.m1 * t_base
    return {
        "tau": np_.tau_hat * t_base,
        "t_off": t_base,
        "t_on_min": np_.t_on_min_hat * t_base,
        "i_max": np_.i_max_hat * i_base,
        "a_ub": np_.a_ub_hat * i_base,
        "omega_l": np_.omega_l_hat * 2.0 * math.pi / t_base,
        "m1": np_.m1,
    }


_CONVERTER_KEYS = ("m1", "m2", "t_off", "t_on_min", "i_max", "i_c")


def _get_number(table: dict, key: str, context: str, default=None):
    if key not in table:
        if default is not None:
            return default
        raise ConfigError(f"missing key '{context}.{key}'")
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{context}.{key}' must be a number, got {v!r}")
    return float(v)


def load_config(path) -> tuple[ConverterParams, FilterSpec,
                               InterferenceSpec, SimSettings]:
    """Load and validate a TOML configuration file.

    Layout: [converter] m1, m2, t_off, t_on_min, i_max, i_c; [filter] tau;
    repeated [[interference]] amp, omega, phase tables;
    [interference_mode] phase = "locked"|"freerun"; [sim] dt_max,
    n_cycles, tol.  Only [converter] and [filter] are required.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if "converter" not in raw:
        raise ConfigError("missing [converter] table")
    conv = raw["converter"]
    kwargs = {k: _get_number(conv, k, "converter") for k in _CONVERTER_KEYS}
    try:
        cp = ConverterParams(**kwargs)
    except ParameterError as exc:
        raise ConfigError(f"converter: {exc}") from exc

    if "filter" not in raw:
        raise ConfigError("missing [filter] table")
    try:
        fs = FilterSpec(tau=_get_number(raw["filter"], "tau", "filter"))
    except ParameterError as exc:
        raise ConfigError(f"filter: {exc}") from exc

    comps = []
    for i, entry in enumerate(raw.get("interference", [])):
        ctx = f"interference[{i}]"
        try:
            comps.append(SineComponent(
                amp=_get_number(entry, "amp", ctx),
                omega=_get_number(entry, "omega", ctx),
                phase=_get_number(entry, "phase", ctx, default=0.0),
            ))
        except ParameterError as exc:
            raise ConfigError(f"{ctx}: {exc}") from exc

    mode_tbl = raw.get("interference_mode", {})
    mode_name = mode_tbl.get("phase", "freerun")
    try:
        mode = PhaseMode(mode_name)
    except ValueError as exc:
        raise ConfigError(
            f"interference_mode.phase must be 'locked' or 'freerun', "
            f"got {mode_name!r}") from exc
    interference = InterferenceSpec(components=tuple(comps), phase_mode=mode)

    sim_tbl = raw.get("sim", {})
    try:
        sim = SimSettings(
            dt_max=(_get_number(sim_tbl, "dt_max", "sim")
                    if "dt_max" in sim_tbl else None),
            n_cycles=int(sim_tbl.get("n_cycles", 500)),
            tol=(_get_number(sim_tbl, "tol", "sim")
                 if "tol" in sim_tbl else None),
        )
    except ParameterError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    return cp, fs, interference, sim


def dump_config(cp: ConverterParams, fs: FilterSpec,
                interference: InterferenceSpec, sim: SimSettings) -> str:
    """Canonical TOML re-emission of a configuration (round-trip form)."""
    lines = ["[converter]"]
    for k in _CONVERTER_KEYS:
        lines.append(f"{k} = {getattr(cp, k)!r}")
    lines += ["", "[filter]", f"tau = {fs.tau!r}"]
    for c in interference.components:
        lines += ["", "[[interference]]",
                  f"amp = {c.amp!r}", f"omega = {c.omega!r}",
                  f"phase = {c.phase!r}"]
    lines += ["", "[interference_mode]",
              f'phase = "{interference.phase_mode.value}"']
    lines += ["", "[sim]", f"n_cycles = {sim.n_cycles}"]
    if sim.dt_max is not None:
        lines.append(f"dt_max = {sim.dt_max!r}")
    if sim.tol is not None:
        lines.append(f"tol = {sim.tol!r}")
    return "\n".join(lines) + "\n"
