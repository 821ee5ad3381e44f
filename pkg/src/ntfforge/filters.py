"""Discrete-time filter construction, impulse responses and frequency responses.

Filters are stored both as flat numerator/denominator coefficient lists (powers
of z^-1, used for serialization and reporting) and as parallel branches of
cascaded low-order sections, which are the numerical ground truth.  Narrowband
high-order designs are unusable in flat polynomial form in double precision
(their computed polynomial roots scatter off the unit disk), so every numeric
operation here runs section-wise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.signal as spsig

from .errors import (
    ConditioningError,
    EvaluationError,
    InvalidSpecError,
    TruncationOverflowError,
)

TRUNCATION_HARD_CAP = 2**20
DEFAULT_ENERGY_TOL = 1e-12
DEFAULT_GRID_POINTS = 4096
_STABILITY_MARGIN = 1e-12

FILTER_KINDS = (
    "lowpass_butterworth",
    "bandpass_butterworth",
    "multiband_butterworth",
    "explicit_rational",
    "explicit_impulse",
)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing angular frequencies on [0, pi], endpoints included."""

    omegas: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        if om.ndim != 1 or om.size < 2:
            raise InvalidSpecError("grid needs at least two points")
        if np.any(np.diff(om) <= 0):
            raise InvalidSpecError("grid frequencies must be strictly increasing")
        if om[0] != 0.0 or abs(om[-1] - np.pi) > 1e-15:
            raise InvalidSpecError("grid must span [0, pi] inclusive")
        object.__setattr__(self, "omegas", om)

    @property
    def count(self) -> int:
        return self.omegas.size

    @classmethod
    def uniform(cls, count: int = DEFAULT_GRID_POINTS) -> "FrequencyGrid":
        if count < 2:
            raise InvalidSpecError("grid count must be >= 2")
        return cls(np.linspace(0.0, np.pi, count))


@dataclass(frozen=True)
class FilterSpec:
    """Declarative description of an output/reconstruction filter.

    ``order`` is the order of each band's Butterworth section; ``bands_hz``
    holds (low, high) edges per band, with low = 0 meaning lowpass.
    """

    kind: str
    fs_hz: float
    order: int = 0
    bands_hz: tuple = ()
    num: tuple = ()
    den: tuple = ()
    impulse: tuple = ()

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InvalidSpecError(f"unknown filter kind {self.kind!r}")
        if self.fs_hz <= 0:
            raise InvalidSpecError("sample rate must be positive")
        object.__setattr__(self, "bands_hz", tuple(tuple(b) for b in self.bands_hz))
        object.__setattr__(self, "num", tuple(float(c) for c in self.num))
        object.__setattr__(self, "den", tuple(float(c) for c in self.den))
        object.__setattr__(self, "impulse", tuple(float(c) for c in self.impulse))
        if self.kind.endswith("butterworth"):
            if self.order < 1:
                raise InvalidSpecError("butterworth order must be >= 1")
            if not self.bands_hz:
                raise InvalidSpecError("butterworth spec needs band edges")
            nyq = self.fs_hz / 2.0
            for lo, hi in self.bands_hz:
                if not (0.0 <= lo < hi):
                    raise InvalidSpecError("band edges must be increasing")
                if hi >= nyq:
                    raise InvalidSpecError(
                        f"band edge {hi} Hz at or above Nyquist {nyq} Hz"
                    )
            spans = sorted(self.bands_hz)
            for (l0, h0), (l1, h1) in zip(spans, spans[1:]):
                if h0 > l1:
                    raise InvalidSpecError("multiband bands must be disjoint")
        elif self.kind == "explicit_rational":
            if not self.num or not self.den:
                raise InvalidSpecError("explicit_rational needs num and den")
            if self.den[0] == 0.0:
                raise InvalidSpecError("denominator leading coefficient is zero")
        elif self.kind == "explicit_impulse":
            if not self.impulse:
                raise InvalidSpecError("explicit_impulse needs samples")

    @property
    def total_band_width_hz(self) -> float:
        return float(sum(hi - lo for lo, hi in self.bands_hz))

    def to_json_dict(self) -> dict:
        if self.kind == "explicit_rational":
            return {"kind": self.kind, "num": list(self.num), "den": list(self.den),
                    "fs_hz": self.fs_hz}
        if self.kind == "explicit_impulse":
            return {"kind": self.kind, "h": list(self.impulse), "fs_hz": self.fs_hz}
        return {"kind": self.kind, "order": self.order,
                "bands_hz": [list(b) for b in self.bands_hz], "fs_hz": self.fs_hz}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FilterSpec":
        kind = d.get("kind")
        if kind == "explicit_rational":
            return cls(kind=kind, fs_hz=d["fs_hz"], num=tuple(d["num"]),
                       den=tuple(d["den"]))
        if kind == "explicit_impulse":
            return cls(kind=kind, fs_hz=d["fs_hz"], impulse=tuple(d["h"]))
        return cls(kind=kind, fs_hz=d["fs_hz"], order=int(d.get("order", 0)),
                   bands_hz=tuple(tuple(b) for b in d.get("bands_hz", ())))

    @classmethod
    def from_json(cls, text: str) -> "FilterSpec":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class RationalFilter:
    """A stable rational filter H(z) = num(z^-1)/den(z^-1).

    ``branches`` is a tuple of parallel branches; each branch is a tuple of
    (b, a) cascade sections stored as coefficient tuples.  The filter response
    is the sum of the branch responses.  num/den are the exactly-combined
    coefficients and always carry a unit leading denominator coefficient.
    """

    num: tuple
    den: tuple
    fs_hz: float
    branches: tuple = ()
    validate_stability: bool = field(default=True, repr=False)

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        if not den or den[0] == 0.0:
            raise InvalidSpecError("denominator leading coefficient must be nonzero")
        if den[0] != 1.0:
            num = tuple(c / den[0] for c in num)
            den = tuple(c / den[0] for c in den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if not self.branches:
            object.__setattr__(self, "branches", (((num, den),),))
        else:
            object.__setattr__(
                self,
                "branches",
                tuple(tuple((tuple(b), tuple(a)) for b, a in br) for br in self.branches),
            )
        if self.fs_hz <= 0:
            raise InvalidSpecError("sample rate must be positive")
        if self.validate_stability:
            radius = self.max_pole_radius()
            if radius >= 1.0 - _STABILITY_MARGIN:
                raise ConditioningError(
                    f"pole radius {radius:.15f} at or beyond the stability margin"
                )

    def poles(self) -> np.ndarray:
        """Poles gathered section-wise (well-conditioned per low-order section)."""
        roots = []
        for branch in self.branches:
            for _, a in branch:
                arr = np.trim_zeros(np.asarray(a, dtype=float), "b")
                if arr.size > 1:
                    roots.extend(np.roots(arr))
        return np.asarray(roots, dtype=complex)

    def max_pole_radius(self) -> float:
        p = self.poles()
        return float(np.max(np.abs(p))) if p.size else 0.0

    def response(self, grid: FrequencyGrid) -> np.ndarray:
        """H(e^{i omega}) on the grid, evaluated branch/section-wise."""
        zinv = np.exp(-1j * grid.omegas)
        total = np.zeros_like(zinv)
        for branch in self.branches:
            acc = np.ones_like(zinv)
            for b, a in branch:
                numv = _polyval_zinv(b, zinv)
                denv = _polyval_zinv(a, zinv)
                bad = np.abs(denv) < 1e-14
                if np.any(bad):
                    w_bad = grid.omegas[np.argmax(bad)]
                    raise EvaluationError(
                        f"denominator vanished at omega={w_bad:.6g}"
                    )
                acc *= numv / denv
            total += acc
        return total

    def filter_signal(self, x: np.ndarray) -> np.ndarray:
        """Run x through the filter (parallel branches of cascaded sections)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for branch in self.branches:
            y = x
            for b, a in branch:
                y = spsig.lfilter(b, a, y)
            out += y
        return out

    @classmethod
    def identity(cls, fs_hz: float) -> "RationalFilter":
        return cls(num=(1.0,), den=(1.0,), fs_hz=fs_hz)


@dataclass(frozen=True)
class ImpulseResponse:
    """Truncated impulse response h_0..h_M with truncation metadata."""

    samples: np.ndarray
    tail_energy_fraction: float
    energy_tol: float
    source: FilterSpec | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidSpecError("impulse response must be a nonempty vector")
        if not (0.0 <= self.tail_energy_fraction < 1.0):
            raise InvalidSpecError("tail energy fraction must be in [0, 1)")
        if self.tail_energy_fraction > self.energy_tol:
            raise InvalidSpecError("tail energy exceeds the truncation tolerance")
        object.__setattr__(self, "samples", arr)

    @property
    def truncation_index(self) -> int:
        return self.samples.size - 1

    @property
    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def to_csv(self) -> str:
        lines = ["n,h"]
        lines += [f"{n},{v:.17g}" for n, v in enumerate(self.samples)]
        return "\n".join(lines) + "\n"


def _polyval_zinv(coeffs, zinv):
    """Evaluate sum_k c_k * zinv^k (coefficients in powers of z^-1)."""
    acc = np.zeros_like(zinv)
    for c in reversed(tuple(coeffs)):
        acc = acc * zinv + c
    return acc


def _band_branch(order: int, lo: float, hi: float, fs_hz: float):
    """One Butterworth branch as a biquad cascade (prewarped bilinear)."""
    if lo <= 0.0:
        sos = spsig.butter(order, hi, btype="lowpass", fs=fs_hz, output="sos")
    else:
        if order % 2:
            raise InvalidSpecError("bandpass butterworth order must be even")
        sos = spsig.butter(order // 2, [lo, hi], btype="bandpass", fs=fs_hz,
                           output="sos")
    return tuple((tuple(row[:3]), tuple(row[3:])) for row in sos)


def _trim(coeffs):
    arr = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    return arr if arr.size else np.zeros(1)


def _combine_branches(branches):
    """Exact flat num/den of a parallel sum of cascades (reporting only)."""
    nums, dens = [], []
    for branch in branches:
        bn, bd = np.array([1.0]), np.array([1.0])
        for b, a in branch:
            bn = np.convolve(bn, _trim(b))
            bd = np.convolve(bd, _trim(a))
        nums.append(bn)
        dens.append(bd)
    num, den = nums[0], dens[0]
    for bn, bd in zip(nums[1:], dens[1:]):
        L = max(len(num) + len(bd), len(bn) + len(den)) - 1
        merged = np.zeros(L)
        t1 = np.convolve(num, bd)
        t2 = np.convolve(bn, den)
        merged[: t1.size] += t1
        merged[: t2.size] += t2
        num = merged
        den = np.convolve(den, bd)
    return tuple(num), tuple(den)


def design_filter(spec: FilterSpec) -> RationalFilter:
    """Build the stable rational filter described by a FilterSpec."""
    if spec.kind == "explicit_rational":
        return RationalFilter(num=spec.num, den=spec.den, fs_hz=spec.fs_hz)
    if spec.kind == "explicit_impulse":
        return RationalFilter(num=spec.impulse, den=(1.0,), fs_hz=spec.fs_hz)
    if spec.kind == "lowpass_butterworth":
        if len(spec.bands_hz) != 1:
            raise InvalidSpecError("lowpass spec takes exactly one band")
        lo, hi = spec.bands_hz[0]
        branches = (_band_branch(spec.order, 0.0, hi, spec.fs_hz),)
    elif spec.kind == "bandpass_butterworth":
        if len(spec.bands_hz) != 1:
            raise InvalidSpecError("bandpass spec takes exactly one band")
        lo, hi = spec.bands_hz[0]
        if lo <= 0.0:
            raise InvalidSpecError("bandpass band must not start at dc")
        branches = (_band_branch(spec.order, lo, hi, spec.fs_hz),)
    else:  # multiband_butterworth
        if len(spec.bands_hz) < 2:
            raise InvalidSpecError("multiband spec needs at least two bands")
        branches = tuple(
            _band_branch(spec.order, lo, hi, spec.fs_hz) for lo, hi in spec.bands_hz
        )
    num, den = _combine_branches(branches)
    return RationalFilter(num=num, den=den, fs_hz=spec.fs_hz, branches=branches)


def impulse_response(
    filt: RationalFilter,
    energy_tol: float = DEFAULT_ENERGY_TOL,
    hard_cap: int = TRUNCATION_HARD_CAP,
    source: FilterSpec | None = None,
) -> ImpulseResponse:
    """Truncate the impulse response at the smallest M whose discarded tail
    energy is at most energy_tol times the total energy.

    Samples come from the exact section recursion; the simulation window is
    extended until the geometric pole-radius bound certifies that the energy
    beyond the window is negligible against the tolerance.
    """
    if not (0.0 < energy_tol < 1.0):
        raise InvalidSpecError("energy_tol must be in (0, 1)")
    radius = filt.max_pole_radius()
    n = 1024
    while True:
        impulse = np.zeros(n)
        impulse[0] = 1.0
        h = filt.filter_signal(impulse)
        total = float(np.dot(h, h))
        if total == 0.0:
            return ImpulseResponse(samples=h[:1], tail_energy_fraction=0.0,
                                   energy_tol=energy_tol, source=source)
        # energy beyond the window, bounded by the geometric decay of the tail
        if radius == 0.0:
            beyond = 0.0
        else:
            r2 = radius * radius
            tail_amp = float(np.max(np.abs(h[-16:])))
            beyond = tail_amp * tail_amp * r2 / (1.0 - r2) * 16.0
        if beyond <= 0.01 * energy_tol * total:
            tail = np.concatenate((np.cumsum(h[::-1] ** 2)[::-1][1:], [0.0]))
            tail += beyond
            ok = np.nonzero(tail <= energy_tol * total)[0]
            if ok.size:
                m = int(ok[0])
                return ImpulseResponse(
                    samples=h[: m + 1],
                    tail_energy_fraction=float(tail[m] / total),
                    energy_tol=energy_tol,
                    source=source,
                )
        if n >= hard_cap:
            raise TruncationOverflowError(
                f"truncation needs more than {hard_cap} samples"
            )
        n = min(4 * n, hard_cap)


def frequency_response(num, den, grid: FrequencyGrid) -> np.ndarray:
    """Evaluate num(z^-1)/den(z^-1) at z = e^{i omega} over the grid."""
    zinv = np.exp(-1j * grid.omegas)
    denv = _polyval_zinv(den, zinv)
    bad = np.abs(denv) < 1e-14
    if np.any(bad):
        w_bad = grid.omegas[np.argmax(bad)]
        raise EvaluationError(f"denominator magnitude < 1e-14 at omega={w_bad:.6g}")
    return _polyval_zinv(num, zinv) / denv


def polynomial_roots(coeffs) -> np.ndarray:
    """Roots via companion-matrix eigenvalues, with a residual sanity check."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0 or not np.any(c):
        raise InvalidSpecError("all-zero polynomial has no defined roots")
    c = np.trim_zeros(c, "f")
    if c.size == 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c)
    # residual |p(r)| against the coefficient scale at the root's magnitude;
    # the magnitude is floored at 1 so roots collapsing to zero keep a scale
    for r in roots:
        powers = max(1.0, abs(r)) ** np.arange(c.size - 1, -1, -1)
        scale = float(np.dot(np.abs(c), powers))
        resid = abs(np.polyval(c, r))
        if resid > 1e-8 * max(scale, 1e-300):
            raise ConditioningError(
                f"root residual {resid:.3e} exceeds 1e-8 of scale {scale:.3e}"
            )
    return roots


def settling_length(filt: RationalFilter, energy_fraction: float = 0.99) -> int:
    """Samples after which the impulse response holds energy_fraction of its energy."""
    h = impulse_response(filt, energy_tol=min(1e-6, (1 - energy_fraction) * 1e-2)).samples
    energy = np.cumsum(h * h)
    total = energy[-1]
    if total == 0.0:
        return 1
    idx = int(np.searchsorted(energy, energy_fraction * total))
    return max(1, idx)
