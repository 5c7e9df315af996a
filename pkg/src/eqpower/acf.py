"""Autocorrelation function models for WSS processes.

Four variants are provided:

* :class:`Exponential` -- ``R(tau) = exp(-a |tau|)``
* :class:`Jakes` -- ``R(tau) = J0(2 pi f_D tau)``
* :class:`BandlimitedSinc` -- ``R(tau) = sinc(2 W tau)``
* :class:`Tabulated` -- a finite sampled sequence, zero-extended

All evaluation routes through ``|tau|`` so symmetry is exact to the bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "AcfModel",
    "Exponential",
    "Jakes",
    "BandlimitedSinc",
    "Tabulated",
    "SamplingGrid",
    "eval_acf",
    "nyquist_rate",
    "acf_sequence",
    "DEFAULT_COVERAGE",
]

DEFAULT_COVERAGE = 0.99

# tau within this many table periods of a grid point snaps to the tabulated value
_GRID_SNAP = 1e-9


class AcfModel:
    """Base class of the ACF variants.

    Subclasses implement ``_at(abs_tau)`` for an array of non-negative lags and
    ``_rate(coverage)``.
    """

    band_limited: bool = True

    def _at(self, abs_tau: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _rate(self, coverage: float) -> float:
        raise NotImplementedError

    @property
    def peak(self) -> float:
        """R(0)."""
        return float(self._at(np.zeros(1))[0])


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class Exponential(AcfModel):
    """First-order Markov ACF ``exp(-decay * |tau|)``; decay in 1/s.

    Not band-limited: its PSD is ``2a / (a^2 + w^2)``.
    """

    decay: float = 1.0
    band_limited = False

    def __post_init__(self):
        object.__setattr__(self, "decay", _positive("decay", self.decay))

    def _at(self, abs_tau):
        return np.exp(-self.decay * abs_tau)

    def _rate(self, coverage):
        # fraction of PSD power in |w| <= W is (2/pi) atan(W/a)
        return self.decay / math.pi * math.tan(coverage * math.pi / 2)


@dataclass(frozen=True)
class Jakes(AcfModel):
    """Clarke/Jakes fading ACF ``J0(2 pi f_D tau)``; doppler in Hz."""

    doppler: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "doppler", _positive("doppler", self.doppler))

    def _at(self, abs_tau):
        return special.j0(2 * math.pi * self.doppler * abs_tau)

    def _rate(self, coverage):
        return 2 * self.doppler


@dataclass(frozen=True)
class BandlimitedSinc(AcfModel):
    """Ideal low-pass ACF ``sinc(2 W tau)``; bandwidth in Hz."""

    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bandwidth", _positive("bandwidth", self.bandwidth))

    def _at(self, abs_tau):
        return np.sinc(2 * self.bandwidth * abs_tau)

    def _rate(self, coverage):
        return 2 * self.bandwidth


@dataclass(frozen=True)
class Tabulated(AcfModel):
    """ACF given by samples ``values[k] = R(k * period)``.

    Between grid points the table is interpolated linearly; beyond the last
    entry the ACF is zero, which keeps it square-integrable.
    """

    period: float
    values: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "period", _positive("period", self.period))
        vals = tuple(float(v) for v in np.ravel(self.values))
        if not vals:
            raise ValueError("tabulated ACF needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("tabulated ACF values must be finite")
        if vals[0] <= 0:
            raise ValueError(f"R(0) must be positive, got {vals[0]}")
        if max(abs(v) for v in vals) > vals[0]:
            raise ValueError("tabulated ACF must satisfy |R(k)| <= R(0)")
        object.__setattr__(self, "values", vals)

    def _at(self, abs_tau):
        table = np.append(np.asarray(self.values), 0.0)
        x = abs_tau / self.period
        k = np.rint(x)
        on_grid = np.abs(x - k) <= _GRID_SNAP
        k = np.minimum(k, len(self.values)).astype(np.int64)
        lo = np.minimum(np.floor(x), len(self.values)).astype(np.int64)
        hi = np.minimum(lo + 1, len(self.values))
        frac = x - np.floor(x)
        interp = (1 - frac) * table[lo] + frac * table[hi]
        return np.where(on_grid, table[k], interp)

    def _rate(self, coverage):
        return 1.0 / self.period


@dataclass(frozen=True)
class SamplingGrid:
    """``n`` samples at ``t = i * period``, i = 0..n-1."""

    period: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "period", _positive("period", self.period))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"sample count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def at_rate(cls, rate: float, n: int) -> "SamplingGrid":
        return cls(1.0 / _positive("rate", rate), n)

    @property
    def times(self) -> np.ndarray:
        return self.period * np.arange(self.n)


def eval_acf(model: AcfModel, tau):
    """Evaluate ``R(|tau|)``. Accepts scalars or arrays; scalars give a float."""
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("tau must be finite")
    out = model._at(np.abs(t))
    return float(out) if out.ndim == 0 else out


def nyquist_rate(model: AcfModel, coverage: float = DEFAULT_COVERAGE) -> float:
    """Sampling rate in Hz meeting the Nyquist criterion for ``model``.

    Band-limited variants ignore ``coverage``. For the exponential ACF the
    rate is the one whose half-bandwidth holds ``coverage`` of the PSD power,
    i.e. ``(a/pi) tan(coverage pi / 2)``; Nyquist then holds only
    approximately.
    """
    if not model.band_limited:
        coverage = float(coverage)
        if not (0 < coverage < 1):
            raise ValueError(
                f"coverage must lie in (0, 1) for a non-band-limited ACF, got {coverage}"
            )
    return float(model._rate(coverage))


def acf_sequence(model: AcfModel, grid: SamplingGrid) -> np.ndarray:
    """``[R(0), R(T_s), ..., R((n-1) T_s)]``."""
    return np.asarray(model._at(grid.times), dtype=float)
