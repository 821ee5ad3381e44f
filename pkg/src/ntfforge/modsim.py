"""Nonlinear time-domain simulation of the quantized noise-shaping loop.

The loop runs in error-feedback form, which is exact for FIR noise transfer
functions with a unit leading coefficient: past quantization errors are fed
back through the tail coefficients, so the injected error sees exactly the
designed FIR shape and the signal passes through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CausalityError, InvalidSpecError, NtfForgeError
from .filters import RationalFilter, settling_length

SNR_DB_CAP = 300.0
OVERLOAD_EPS = 1e-12


@dataclass(frozen=True)
class NtfFir:
    """FIR noise transfer function coefficients a_0..a_P with a_0 = 1."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidSpecError("coefficients must be a nonempty vector")
        if arr[0] != 1.0:
            raise InvalidSpecError("leading coefficient must be exactly 1")
        if not np.all(np.isfinite(arr)):
            raise InvalidSpecError("coefficients must be finite")
        object.__setattr__(self, "coeffs", arr)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1


@dataclass(frozen=True)
class Quantizer:
    """Static quantizer with fixed output levels; binary +-1 by default.

    The average gain of the quantizer is taken as one throughout (the usual
    linearized-model assumption when the loop is not overloaded).
    """

    levels: tuple = (-1.0, 1.0)
    delta: float = 2.0

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if len(levels) < 2:
            raise InvalidSpecError("need at least two quantizer levels")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidSpecError("levels must be strictly increasing")
        if self.delta <= 0:
            raise InvalidSpecError("step must be positive")
        object.__setattr__(self, "levels", levels)

    def quantize(self, value: float) -> float:
        """Nearest level; midpoints round toward the higher level."""
        lv = self.levels
        lo, hi = 0, len(lv) - 1
        # binary search over midpoints, ties go up
        while lo < hi:
            mid = (lo + hi) // 2
            if value >= 0.5 * (lv[mid] + lv[mid + 1]):
                lo = mid + 1
            else:
                hi = mid
        return lv[lo]


@dataclass(frozen=True)
class ModTrace:
    """One simulation run: input, quantized output and injected error."""

    input_w: np.ndarray
    output_x: np.ndarray
    quant_error_e: np.ndarray
    overloaded: bool
    transient_discard: int


@dataclass(frozen=True)
class SnrReport:
    """Signal/noise powers after the output filter, in linear and dB."""

    signal_power: float
    noise_power: float
    snr_db: float
    amplitude: float
    method: str

    def to_json_dict(self) -> dict:
        return {
            "signal_power": self.signal_power,
            "noise_power": self.noise_power,
            "snr_db": self.snr_db,
            "amplitude": self.amplitude,
            "method": self.method,
        }


def loop_filters_from_ntf(ntf: NtfFir, stf_choice: str = "unity",
                          delay: int = 1):
    """Feedforward/feedback decomposition of the loop for a chosen signal path.

    Returns (feedforward, feedback) as RationalFilter objects.  These are
    open-loop fragments: the feedforward filter inverts the NTF and its poles
    sit on the NTF zeros, so stability validation is deliberately skipped.
    """
    a = ntf.coeffs
    if a[0] != 1.0:
        raise CausalityError("loop requires a unit leading NTF coefficient")
    one_minus = -a.copy()
    one_minus[0] = 0.0  # 1 - NTF, strictly causal by construction
    if stf_choice == "unity":
        ff_num, ff_den = (1.0,), tuple(a)
        fb_num, fb_den = tuple(one_minus), (1.0,)
    elif stf_choice == "delay":
        if delay < 0:
            raise InvalidSpecError("delay must be nonnegative")
        if delay > 1:
            raise CausalityError(
                "feedback path becomes non-causal for delays beyond one sample"
            )
        ff_num = tuple([0.0] * delay + [1.0])
        ff_den = tuple(a)
        # (1 - NTF) advanced by the delay stays causal because 1 - NTF
        # starts at z^-1
        fb_num = tuple(one_minus[delay:])
        fb_den = (1.0,)
    else:
        raise InvalidSpecError(f"unknown stf choice {stf_choice!r}")
    ff = RationalFilter(num=ff_num, den=ff_den, fs_hz=1.0,
                        validate_stability=False)
    fb = RationalFilter(num=fb_num, den=fb_den, fs_hz=1.0,
                        validate_stability=False)
    return ff, fb


def simulate(ntf: NtfFir, input_w, quantizer: Quantizer | None = None,
             n_discard: int | None = None) -> ModTrace:
    """Run the error-feedback loop over the input sequence.

    Recursion: y(n) = w(n) + sum_k a_k e(n-k), x(n) = quantize(y(n)),
    e(n) = x(n) - y(n).  The stored error satisfies x - w = conv(a, e)
    exactly, so the injected error is shaped by the designed NTF with a
    unity signal path.
    """
    w = np.asarray(input_w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InvalidSpecError("input contains non-finite samples")
    quantizer = quantizer or Quantizer()
    p = ntf.order
    if n_discard is None:
        n_discard = 4 * p
    tail = ntf.coeffs[1:]
    n = w.size
    x = np.empty(n)
    e = np.empty(n)
    buf = [0.0] * p  # buf[k] = e(n-1-k)
    levels = quantizer.levels
    nlev = len(levels)
    binary = nlev == 2
    lo_lv, hi_lv = levels[0], levels[-1]
    mid0 = 0.5 * (lo_lv + hi_lv)
    tail_list = tail.tolist()
    w_list = w.tolist()
    for i in range(n):
        acc = w_list[i]
        for k in range(p):
            acc += tail_list[k] * buf[k]
        if binary:
            xi = hi_lv if acc >= mid0 else lo_lv
        else:
            xi = quantizer.quantize(acc)
        ei = xi - acc
        x[i] = xi
        e[i] = ei
        if p:
            buf.pop()
            buf.insert(0, ei)
    post = e[min(n_discard, n):]
    overloaded = bool(post.size and
                      np.max(np.abs(post)) > quantizer.delta / 2 + OVERLOAD_EPS)
    return ModTrace(input_w=w, output_x=x, quant_error_e=e,
                    overloaded=overloaded, transient_discard=int(n_discard))


def trace_to_csv(trace: ModTrace) -> str:
    lines = ["n,w,x,e"]
    for i, (wv, xv, ev) in enumerate(
            zip(trace.input_w, trace.output_x, trace.quant_error_e)):
        lines.append(f"{i},{wv:.17g},{xv:.17g},{ev:.17g}")
    return "\n".join(lines) + "\n"


def measure_snr(trace: ModTrace, filt: RationalFilter,
                settle: int | None = None) -> SnrReport:
    """SNR through the output filter.

    Signal power is the mean square of the filtered input alone; noise power
    is the mean square of the filtered difference between input and modulator
    output.  Both discard the same settling prefix.
    """
    w = trace.input_w
    x = trace.output_x
    settle_len = settling_length(filt)
    if settle is None:
        settle = max(settle_len, trace.transient_discard)
    n_post = w.size - settle
    if n_post < 8 * settle_len:
        raise InvalidSpecError(
            "trace too short: need at least 8 filter settling lengths after "
            "the discarded prefix"
        )
    sig = filt.filter_signal(w)[settle:]
    noi = filt.filter_signal(w - x)[settle:]
    signal_power = float(np.mean(sig**2))
    noise_power = float(np.mean(noi**2))
    if signal_power == 0.0:
        raise NtfForgeError("signal power is zero; SNR undefined")
    if noise_power == 0.0:
        snr_db = SNR_DB_CAP
    else:
        snr_db = min(SNR_DB_CAP, 10.0 * math.log10(signal_power / noise_power))
    amplitude = float(np.max(np.abs(w))) if w.size else 0.0
    return SnrReport(signal_power=signal_power, noise_power=noise_power,
                     snr_db=snr_db, amplitude=amplitude, method="simulated")


def expected_snr(amplitude: float, sigma2_h: float) -> SnrReport:
    """White-noise SNR prediction for a sinusoid of the given amplitude."""
    if amplitude <= 0:
        raise InvalidSpecError("amplitude must be positive")
    if sigma2_h <= 0:
        raise InvalidSpecError("noise power must be positive")
    ratio = amplitude**2 / (2.0 * sigma2_h)
    return SnrReport(signal_power=amplitude**2 / 2.0, noise_power=sigma2_h,
                     snr_db=10.0 * math.log10(ratio), amplitude=amplitude,
                     method="expected")


def make_test_signal(kind: str, freqs_hz, amplitudes, fs_hz: float,
                     n: int) -> np.ndarray:
    """Coherently sampled test input: every tone is snapped to an integer
    number of cycles over the n samples to avoid leakage."""
    if n <= 0:
        raise InvalidSpecError("length must be positive")
    freqs = [float(f) for f in np.atleast_1d(freqs_hz)]
    amps = [float(a) for a in np.atleast_1d(amplitudes)]
    if kind == "dc":
        if len(amps) != 1:
            raise InvalidSpecError("dc takes exactly one amplitude")
        return np.full(n, amps[0])
    if kind not in ("sine", "multitone"):
        raise InvalidSpecError(f"unknown signal kind {kind!r}")
    if kind == "sine" and len(freqs) != 1:
        raise InvalidSpecError("sine takes exactly one frequency")
    if len(freqs) != len(amps):
        raise InvalidSpecError("amplitude/frequency length mismatch")
    t = np.arange(n)
    out = np.zeros(n)
    for f, a in zip(freqs, amps):
        if not (0.0 < f < fs_hz / 2.0):
            raise InvalidSpecError(f"frequency {f} Hz outside (0, Nyquist)")
        cycles = max(1, round(f * n / fs_hz))
        out += a * np.sin(2.0 * np.pi * cycles * t / n)
    return out
