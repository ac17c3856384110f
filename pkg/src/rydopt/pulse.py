"""Control-field parametrization and constraint enforcement.

Each field is ``guess(t) + sum of truncated Fourier series``, saturated at
the amplitude caps and then shaped at the boundaries:

* Omega is multiplied by an envelope with sin^2 ramps, so Omega(0) = Omega(T) = 0.
* Delta is blended convexly towards its pinned endpoint values, which keeps it
  inside the detuning bounds.

Frequencies (bandwidths, basis frequencies) are ordinary frequencies in MHz;
amplitudes are angular (rad/us).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from rydopt.errors import ConfigError, ConstraintError
from rydopt.model import angular_to_mhz, mhz_to_angular

# 10%-90% time of a sin^2 ramp as a fraction of its length
_SIN2_RISE_FRACTION = (2 / math.pi) * (math.asin(math.sqrt(0.9)) - math.asin(math.sqrt(0.1)))
_BANDWIDTH_SLACK = 1e-12


@dataclass(frozen=True)
class ControlConstraints:
    omega_max: float = mhz_to_angular(0.4)
    delta_max: float = mhz_to_angular(2.0)
    omega_bandwidth: float = 8.3
    delta_bandwidth: float = 0.5
    omega_rise: float = 0.060
    delta_rise: float = 1.0
    delta_start: float | None = None
    delta_end: float | None = None

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ConfigError("omega_max must be positive")
        if not self.delta_max > 0:
            raise ConfigError("delta_max must be positive")
        for name in ("delta_start", "delta_end"):
            v = getattr(self, name)
            if v is not None and abs(v) > self.delta_max * (1 + 1e-12):
                raise ConstraintError(f"{name} = {v:.6g} rad/us lies outside the detuning bound")

    @property
    def omega_ramp(self) -> float:
        """Length of the sin^2 edge whose 10-90 time equals ``omega_rise``."""
        return self.omega_rise / _SIN2_RISE_FRACTION

    @property
    def delta_pin_window(self) -> float:
        return self.delta_rise

    def check_duration(self, duration: float) -> None:
        if duration <= 0:
            raise ConfigError("pulse duration must be positive")
        if 2 * self.omega_ramp > duration:
            raise ConstraintError(f"duration {duration} us is shorter than two Omega ramps")
        for bw in (self.omega_bandwidth, self.delta_bandwidth):
            if bw <= 1.0 / duration:
                raise ConstraintError(f"bandwidth {bw} MHz is not above 1/duration")


@dataclass(frozen=True)
class Guess:
    """Smooth starting waveform: ``constant`` (start only) or ``linear`` ramp."""

    kind: str = "constant"
    start: float = 0.0
    end: float | None = None

    def __call__(self, t: np.ndarray, duration: float) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(t, self.start, dtype=float)
        if self.kind == "linear":
            end = self.start if self.end is None else self.end
            return self.start + (end - self.start) * (t / duration)
        raise ConfigError(f"unknown guess kind {self.kind!r}")


@dataclass(frozen=True)
class FourierSeries:
    freqs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]
    cos_coeffs: tuple[float, ...]

    def __call__(self, t: np.ndarray) -> np.ndarray:
        if not self.freqs:
            return np.zeros_like(t, dtype=float)
        nu = np.asarray(self.freqs)[:, None]
        phase = 2 * np.pi * nu * t[None, :]
        return np.asarray(self.sin_coeffs) @ np.sin(phase) + np.asarray(self.cos_coeffs) @ np.cos(phase)

    @classmethod
    def zeros(cls, freqs) -> "FourierSeries":
        freqs = tuple(float(f) for f in freqs)
        return cls(freqs, (0.0,) * len(freqs), (0.0,) * len(freqs))

    @classmethod
    def from_vector(cls, freqs, x) -> "FourierSeries":
        n = len(freqs)
        x = np.asarray(x, dtype=float)
        return cls(tuple(float(f) for f in freqs), tuple(x[:n].tolist()), tuple(x[n:].tolist()))

    def is_zero(self) -> bool:
        return not any(self.sin_coeffs) and not any(self.cos_coeffs)


@dataclass(frozen=True)
class FieldParams:
    guess: Guess = Guess()
    components: tuple[FourierSeries, ...] = ()

    def raw(self, t, duration):
        out = self.guess(t, duration)
        for comp in self.components:
            out = out + comp(t)
        return out

    def max_freq(self) -> float:
        return max((f for c in self.components for f in c.freqs), default=0.0)

    def with_component(self, comp: FourierSeries) -> "FieldParams":
        return replace(self, components=self.components + (comp,))


@dataclass(frozen=True)
class PulseParams:
    duration: float
    omega: FieldParams = FieldParams()
    delta: FieldParams = FieldParams()


@dataclass(frozen=True)
class SampledPulse:
    """Samples on the uniform grid ``t_k = k*dt``, ``k = 0..n_steps``."""

    t: np.ndarray
    omega: np.ndarray
    delta: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1

    def step_controls(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step piecewise-constant controls (trapezoidal midpoint values)."""
        return 0.5 * (self.omega[1:] + self.omega[:-1]), 0.5 * (self.delta[1:] + self.delta[:-1])

    def check(self, constraints: ControlConstraints, atol: float = 1e-12) -> None:
        if np.max(np.abs(self.omega)) > constraints.omega_max + atol:
            raise ConstraintError("Omega exceeds its amplitude cap")
        if np.max(np.abs(self.delta)) > constraints.delta_max + atol:
            raise ConstraintError("Delta exceeds its amplitude bound")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "omega_over_2pi_mhz", "delta_over_2pi_mhz"])
            for t, om, de in zip(self.t, angular_to_mhz(self.omega), angular_to_mhz(self.delta)):
                w.writerow([repr(float(t)), repr(float(om)), repr(float(de))])

    @classmethod
    def from_csv(cls, path) -> "SampledPulse":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header][:3] != ["t_us", "omega_over_2pi_mhz", "delta_over_2pi_mhz"]:
                raise ConfigError(f"{path}: row 1: expected header t_us,omega_over_2pi_mhz,delta_over_2pi_mhz")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise ConfigError(f"{path}: row {lineno}: expected 3 columns, got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ConfigError(f"{path}: row {lineno}: {exc}") from None
        if len(rows) < 2:
            raise ConfigError(f"{path}: need at least two samples")
        arr = np.array(rows)
        t = arr[:, 0]
        steps = np.diff(t)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, t[-1]):
            raise ConfigError(f"{path}: time grid must be uniform and increasing")
        if abs(t[0]) > 1e-12:
            raise ConfigError(f"{path}: row 2: time grid must start at 0")
        return cls(t, mhz_to_angular(arr[:, 1]), mhz_to_angular(arr[:, 2]))


def time_grid(duration: float, dt: float) -> np.ndarray:
    n = int(round(duration / dt))
    if n < 1 or abs(n * dt - duration) > 1e-9 * duration:
        raise ConfigError(f"dt = {dt} does not divide the duration {duration}")
    return np.linspace(0.0, duration, n + 1)


def draw_basis(seed, n_freqs: int, bandwidth: float, duration: float | None = None) -> tuple[float, ...]:
    """Random basis frequencies in (0, bandwidth], sorted.

    When the band holds at least ``n_freqs`` principal harmonics ``k/duration``,
    the draws are those harmonics (``k = 1..n_freqs``) each jittered uniformly
    by up to half a harmonic spacing; otherwise they are uniform over the band.
    """
    if n_freqs < 1:
        raise ConfigError("n_freqs must be at least 1")
    rng = np.random.default_rng(seed)
    if duration is not None and n_freqs / duration <= bandwidth:
        k = np.arange(1, n_freqs + 1)
        freqs = (k + rng.uniform(-0.5, 0.5, n_freqs)) / duration
        freqs = np.clip(freqs, 1e-9, bandwidth)
    else:
        freqs = bandwidth * (1.0 - rng.random(n_freqs))  # (0, bandwidth]
    return tuple(float(f) for f in np.sort(freqs))


def _sin2_ramp(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return np.sin(0.5 * np.pi * x) ** 2


def omega_envelope(t: np.ndarray, duration: float, ramp: float) -> np.ndarray:
    env = _sin2_ramp(t / ramp) * _sin2_ramp((duration - t) / ramp)
    env[0] = 0.0
    env[-1] = 0.0
    return env


def synthesize(params: PulseParams, constraints: ControlConstraints, dt: float = 1e-3) -> SampledPulse:
    tau = params.duration
    constraints.check_duration(tau)
    if params.omega.max_freq() > constraints.omega_bandwidth + _BANDWIDTH_SLACK:
        raise ConstraintError(f"Omega basis frequency {params.omega.max_freq()} MHz above cutoff")
    if params.delta.max_freq() > constraints.delta_bandwidth + _BANDWIDTH_SLACK:
        raise ConstraintError(f"Delta basis frequency {params.delta.max_freq()} MHz above cutoff")
    t = time_grid(tau, dt)

    omega = np.clip(params.omega.raw(t, tau), 0.0, constraints.omega_max)
    omega = omega * omega_envelope(t, tau, constraints.omega_ramp)

    delta = np.clip(params.delta.raw(t, tau), -constraints.delta_max, constraints.delta_max)
    window = min(constraints.delta_pin_window, 0.5 * tau)
    if constraints.delta_end is not None:
        w = _sin2_ramp((t - (tau - window)) / window)
        w[-1] = 1.0
        delta = (1 - w) * delta + w * constraints.delta_end
    if constraints.delta_start is not None:
        w = _sin2_ramp((window - t) / window)
        w[0] = 1.0
        delta = (1 - w) * delta + w * constraints.delta_start
    return SampledPulse(t, omega, delta)


def linear_chirp_reference(
    duration: float,
    delta_start: float,
    delta_end: float,
    omega_peak: float,
    constraints: ControlConstraints | None = None,
    dt: float = 1e-3,
) -> SampledPulse:
    """Quasi-adiabatic baseline: flat-top Omega and a linear detuning sweep."""
    constraints = constraints or ControlConstraints()
    if omega_peak > constraints.omega_max * (1 + 1e-12):
        raise ConstraintError(f"omega_peak {omega_peak:.6g} rad/us exceeds the cap")
    params = PulseParams(
        duration,
        omega=FieldParams(Guess("constant", omega_peak)),
        delta=FieldParams(Guess("linear", delta_start, delta_end)),
    )
    free = replace(constraints, delta_start=None, delta_end=None)
    return synthesize(params, free, dt)


def rise_time(t: np.ndarray, y: np.ndarray, edge: str = "leading") -> float:
    """10%-90% time of the leading (or trailing) edge relative to max |y|."""
    y = np.abs(np.asarray(y))
    if edge == "trailing":
        t, y = t[-1] - t[::-1], y[::-1]
    peak = y.max()
    if peak == 0:
        return math.inf
    i10 = np.argmax(y >= 0.1 * peak)
    i90 = np.argmax(y >= 0.9 * peak)
    return float(t[i90] - t[i10])
