"""Quadratic objective built from the output-filter impulse response.

The quantization-noise power after the output filter is a quadratic form in
the FIR NTF coefficients; the quadratic matrix is the Toeplitz autocorrelation
of the truncated impulse response.  Quadrature evaluators are provided for the
same quantities so the algebraic path can be cross-checked independently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import DegenerateFilterError, EvaluationError, InvalidSpecError
from .filters import FrequencyGrid, RationalFilter, frequency_response

PSD_EIG_TOL = 1e-9
GRID_DOUBLING_WARN = 1e-3


@dataclass(frozen=True)
class NoiseBudget:
    """Quantization-noise bookkeeping for a uniform quantizer of step delta."""

    delta: float = 2.0

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidSpecError("quantizer step must be positive")

    @property
    def sigma2_eps(self) -> float:
        return self.delta**2 / 12.0

    @property
    def pds_constant(self) -> float:
        """Single-sided noise density over omega in [0, pi]."""
        return self.delta**2 / (12.0 * np.pi)


@dataclass(frozen=True)
class QMatrix:
    """(P+1)x(P+1) symmetric Toeplitz autocorrelation matrix of h."""

    first_row: np.ndarray
    entries: np.ndarray

    def __post_init__(self):
        fr = np.asarray(self.first_row, dtype=float)
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (fr.size, fr.size):
            raise InvalidSpecError("entries shape must match first_row length")
        object.__setattr__(self, "first_row", fr)
        object.__setattr__(self, "entries", entries)

    @property
    def order(self) -> int:
        return self.first_row.size - 1

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class ReducedObjective:
    """The quadratic form a^T Q a restricted to a_0 = 1.

    Evaluates as constant + linear . v + v . quadratic . v over the free
    coefficients v = (a_1 .. a_P).
    """

    quadratic: np.ndarray
    linear: np.ndarray
    constant: float

    def __post_init__(self):
        quad = np.asarray(self.quadratic, dtype=float)
        lin = np.asarray(self.linear, dtype=float)
        if quad.shape != (lin.size, lin.size):
            raise InvalidSpecError("quadratic block must be P x P")
        object.__setattr__(self, "quadratic", quad)
        object.__setattr__(self, "linear", lin)

    def value(self, free_coeffs) -> float:
        v = np.asarray(free_coeffs, dtype=float)
        return float(self.constant + self.linear @ v + v @ self.quadratic @ v)


def build_q_matrix(h, order_p: int) -> QMatrix:
    """Autocorrelation matrix of the impulse response, lags 0..P.

    Accepts an ImpulseResponse or a plain sample vector.  The first row is the
    restricted correlation sum q_k = sum_{i=k}^{M} h_i h_{i-k}; the full matrix
    is materialized Toeplitz-symmetric from it.
    """
    samples = np.asarray(getattr(h, "samples", h), dtype=float)
    if order_p < 1:
        raise InvalidSpecError("order must be >= 1")
    if samples.size == 0 or not np.any(samples):
        raise DegenerateFilterError("impulse response is identically zero")
    m1 = samples.size
    first_row = np.array(
        [np.dot(samples[k:], samples[: m1 - k]) if k < m1 else 0.0
         for k in range(order_p + 1)]
    )
    entries = toeplitz(first_row)
    q = QMatrix(first_row=first_row, entries=entries)
    min_eig = q.min_eigenvalue()
    trace = float(np.trace(entries))
    if min_eig < -PSD_EIG_TOL * trace:
        raise DegenerateFilterError(
            f"autocorrelation matrix not PSD: min eig {min_eig:.3e}, trace {trace:.3e}"
        )
    return q


def reduce_objective(q: QMatrix) -> ReducedObjective:
    """Split a^T Q a with a_0 = 1 into quadratic + linear + constant blocks."""
    m = q.entries
    return ReducedObjective(
        quadratic=m[1:, 1:].copy(),
        linear=2.0 * m[0, 1:].copy(),
        constant=float(m[0, 0]),
    )


def _ntf_magnitude_sq(ntf_num, ntf_den, grid: FrequencyGrid) -> np.ndarray:
    resp = frequency_response(ntf_num, ntf_den, grid)
    return np.abs(resp) ** 2


def merit_integrand(ntf_num, ntf_den, filt: RationalFilter,
                    grid: FrequencyGrid) -> np.ndarray:
    """|H|^2 |NTF|^2 per grid point (the linear-scale noise-density weight)."""
    hmag2 = np.abs(filt.response(grid)) ** 2
    return hmag2 * _ntf_magnitude_sq(ntf_num, ntf_den, grid)


def sigma2_h(ntf_num, ntf_den, filt: RationalFilter, budget: NoiseBudget,
             grid: FrequencyGrid | None = None) -> float:
    """Quantization-noise power at the filter output by trapezoid quadrature.

    Accepts arbitrary rational NTFs so externally supplied designs can be
    scored.  Emits a warning when doubling the grid moves the result by more
    than 0.1% (the grid is then too coarse for this integrand).
    """
    grid = grid or FrequencyGrid.uniform()
    integrand = merit_integrand(ntf_num, ntf_den, filt, grid)
    if not np.all(np.isfinite(integrand)):
        w_bad = grid.omegas[int(np.argmax(~np.isfinite(integrand)))]
        raise EvaluationError(f"non-finite integrand at omega={w_bad:.6g}")
    value = budget.pds_constant * np.trapezoid(integrand, grid.omegas)
    fine = FrequencyGrid.uniform(2 * grid.count - 1)
    value_fine = budget.pds_constant * np.trapezoid(
        merit_integrand(ntf_num, ntf_den, filt, fine), fine.omegas
    )
    if value_fine != 0.0 and abs(value - value_fine) > GRID_DOUBLING_WARN * abs(value_fine):
        warnings.warn(
            f"noise-power quadrature changed by "
            f"{abs(value - value_fine) / abs(value_fine):.2%} on grid doubling; "
            "increase grid_points",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(value)


def sigma2_inband(ntf_num, ntf_den, bands, budget: NoiseBudget,
                  points_per_band: int = 8193) -> float:
    """Noise power of the NTF alone over a union of omega-intervals."""
    bands = [(float(lo), float(hi)) for lo, hi in bands]
    if not bands:
        raise InvalidSpecError("band set must be nonempty")
    for lo, hi in bands:
        if not (0.0 <= lo < hi <= np.pi):
            raise InvalidSpecError("bands must be within [0, pi] and increasing")
    total = 0.0
    for lo, hi in bands:
        om = np.linspace(lo, hi, points_per_band)
        zinv = np.exp(-1j * om)
        numv = _polyval(ntf_num, zinv)
        denv = _polyval(ntf_den, zinv)
        if np.any(np.abs(denv) < 1e-14):
            raise EvaluationError("NTF denominator vanished inside a band")
        mag2 = np.abs(numv / denv) ** 2
        total += np.trapezoid(mag2, om)
    return float(budget.pds_constant * total)


def _polyval(coeffs, zinv):
    acc = np.zeros_like(zinv)
    for c in reversed(tuple(coeffs)):
        acc = acc * zinv + c
    return acc
