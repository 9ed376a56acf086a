"""Closed-form linear optics of the non-reciprocal polariton.

Rate convention: kappa and gamma are amplitude decay rates in the HWHM
sense (Lorentzian denominator i*Delta/kappa + 1). All frequencies are in
MHz of ordinary frequency; any 2*pi factors are absorbed into the rates
before they reach this module.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import numerics

THREADS_ENV = "NRPOLARITON_THREADS"

# transmissions below this underflow guard report +inf dB isolation
T_UNDERFLOW = 1e-30


class LinearResponseError(Exception):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Cavity and atom parameters entering the transmission formula.

    kappa is the total cavity amplitude decay; kappa1/kappa2 are the
    external coupling rates through the two mirrors (the remainder
    kappa - kappa1 - kappa2 is intrinsic loss). delta_ac is the
    cavity-atom detuning.
    """

    kappa_mhz: float
    kappa1_mhz: float
    kappa2_mhz: float
    gamma_mhz: float
    delta_ac_mhz: float = 0.0
    c_plus: float = 0.0
    c_minus: float = 0.0

    def __post_init__(self):
        if self.kappa1_mhz <= 0 or self.kappa2_mhz <= 0:
            raise LinearResponseError("mirror coupling rates must be positive")
        if self.kappa_mhz < self.kappa1_mhz + self.kappa2_mhz:
            raise LinearResponseError(
                "kappa must be at least kappa1 + kappa2 (intrinsic loss >= 0)"
            )
        if self.gamma_mhz <= 0:
            raise LinearResponseError("gamma must be positive")
        if self.c_plus < 0 or self.c_minus < 0:
            raise LinearResponseError("cooperativities must be non-negative")

    def cooperativity(self, branch: str) -> float:
        if branch == "+":
            return self.c_plus
        if branch == "-":
            return self.c_minus
        raise LinearResponseError(f"branch must be '+' or '-', got {branch!r}")


@dataclass(frozen=True)
class SpectrumResult:
    """Sampled transmission traces for both probe directions."""

    deltas_mhz: np.ndarray
    t_plus: np.ndarray
    t_minus: np.ndarray
    isolation_db: np.ndarray

    def trace(self, branch: str) -> np.ndarray:
        return self.t_plus if branch == "+" else self.t_minus


def transmission(params: SystemParams, delta_mhz, branch: str):
    """Two-port transmission T(Delta) for one circular polarization.

    T = (4 k1 k2 / k^2) |1 / (i Delta/k + 1 + 2C / (i (Delta+Delta_ac)/g + 1))|^2
    Accepts a scalar or array of probe detunings.
    """
    c = params.cooperativity(branch)
    delta = np.asarray(delta_mhz, dtype=float)
    atom = 1.0 + 1j * (delta + params.delta_ac_mhz) / params.gamma_mhz
    denom = 1.0 + 1j * delta / params.kappa_mhz + 2.0 * c / atom
    prefac = 4.0 * params.kappa1_mhz * params.kappa2_mhz / params.kappa_mhz**2
    t = prefac / np.abs(denom) ** 2
    return float(t) if np.isscalar(delta_mhz) else t


def isolation(params: SystemParams, delta_mhz: float) -> tuple[float, float]:
    """Isolation ratio I = T_minus / T_plus and its dB value at one detuning."""
    tp = transmission(params, delta_mhz, "+")
    tm = transmission(params, delta_mhz, "-")
    if tp < T_UNDERFLOW:
        raise LinearResponseError("forward transmission underflows; isolation undefined")
    ratio = tm / tp
    return ratio, 10.0 * math.log10(ratio)


def ideal_isolation(c_plus: float) -> float:
    """Peak isolation ratio (1 + 2 C_+)^2 at Delta = Delta_ac = 0, C_- = 0."""
    if c_plus < 0:
        raise LinearResponseError("cooperativity must be non-negative")
    return (1.0 + 2.0 * c_plus) ** 2


def _isolation_db_trace(t_plus: np.ndarray, t_minus: np.ndarray) -> np.ndarray:
    out = np.full_like(t_plus, np.inf)
    ok = t_plus > T_UNDERFLOW
    with np.errstate(divide="ignore"):
        out[ok] = 10.0 * np.log10(t_minus[ok] / t_plus[ok])
    return out


def _check_grid(grid: np.ndarray, name: str):
    if grid.ndim != 1 or grid.size == 0:
        raise LinearResponseError(f"{name} grid must be a non-empty 1-D array")
    if grid.size > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise LinearResponseError(f"{name} grid must be strictly monotonic")


def sweep_1d(params: SystemParams, deltas_mhz) -> SpectrumResult:
    """Evaluate both branches on a probe-detuning grid."""
    deltas = np.asarray(deltas_mhz, dtype=float)
    _check_grid(deltas, "delta")
    tp = transmission(params, deltas, "+")
    tm = transmission(params, deltas, "-")
    return SpectrumResult(
        deltas_mhz=deltas, t_plus=tp, t_minus=tm,
        isolation_db=_isolation_db_trace(tp, tm),
    )


def sweep_2d(
    params: SystemParams, deltas_mhz, delta_acs_mhz
) -> list[tuple[float, SpectrumResult]]:
    """1-D sweep per cavity-atom detuning; rows come back in input order."""
    deltas = np.asarray(deltas_mhz, dtype=float)
    delta_acs = np.asarray(delta_acs_mhz, dtype=float)
    _check_grid(deltas, "delta")
    _check_grid(delta_acs, "delta_ac")

    def row(dac: float) -> SpectrumResult:
        return sweep_1d(replace(params, delta_ac_mhz=float(dac)), deltas)

    n_workers = int(os.environ.get(THREADS_ENV, "0")) or min(8, os.cpu_count() or 1)
    if n_workers > 1 and delta_acs.size > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(row, delta_acs))
    else:
        rows = [row(d) for d in delta_acs]
    return [(float(dac), r) for dac, r in zip(delta_acs, rows)]


def find_polariton_peaks(
    spectrum: SpectrumResult, branch: str
) -> list[tuple[float, float]]:
    """Local maxima of one transmission trace, refined by parabolic
    interpolation through the three samples around each discrete maximum.

    Returns (delta_peak, height) pairs sorted by detuning.
    """
    y = spectrum.trace(branch)
    x = spectrum.deltas_mhz
    if np.ptp(y) == 0.0:
        raise LinearResponseError("flat trace: no peaks to locate")
    peaks = []
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            # parabola through (x[i-1..i+1], y[i-1..i+1])
            d1 = y[i] - y[i - 1]
            d2 = y[i] - y[i + 1]
            h = x[i + 1] - x[i]
            if (d1 + d2) != 0:
                shift = 0.5 * h * (d1 - d2) / (d1 + d2)
                height = y[i] + (d1 - d2) ** 2 / (8.0 * (d1 + d2))
            else:
                shift, height = 0.0, y[i]
            peaks.append((float(x[i] + shift), float(height)))
    # interior edge maxima (monotone traces) count as no peak
    if not peaks:
        raise LinearResponseError("no interior local maximum found")
    return sorted(peaks)


def vacuum_rabi_splitting(kappa_mhz: float, gamma_mhz: float, c: float) -> float:
    """Polariton peak separation 2 g_eff = 2 sqrt(2 kappa gamma C)."""
    return 2.0 * math.sqrt(2.0 * kappa_mhz * gamma_mhz * c)


@dataclass(frozen=True)
class SpectrumFit:
    params: SystemParams
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    n_eff: float | None = None


FITTABLE = ("kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz",
            "delta_ac_mhz", "c_plus", "c_minus")

_DEFAULT_BOUNDS = {
    "kappa_mhz": (1e-6, 1e6),
    "kappa1_mhz": (1e-9, 1e6),
    "kappa2_mhz": (1e-9, 1e6),
    "gamma_mhz": (1e-6, 1e6),
    "delta_ac_mhz": (-1e6, 1e6),
    "c_plus": (0.0, 1e9),
    "c_minus": (0.0, 1e9),
}


def fit_spectrum(
    data: SpectrumResult,
    initial: SystemParams,
    free: tuple[str, ...] = ("c_plus",),
    branches: tuple[str, ...] = ("+",),
    g0_mhz: float | None = None,
) -> SpectrumFit:
    """Least-squares fit of the transmission formula to measured traces.

    `free` names the SystemParams fields allowed to vary; the rest stay at
    their `initial` values. When g0 is supplied the effective atom number
    N_eff = g_eff^2 / g0^2 = 2 kappa gamma C_+ / g0^2 is reported.
    """
    for name in free:
        if name not in FITTABLE:
            raise LinearResponseError(f"unknown fit parameter {name!r}")
    target = np.concatenate([data.trace(b) for b in branches])
    if target.size < 5 * len(free):
        raise LinearResponseError(
            "need at least 5 data points per free parameter"
        )
    if np.all(target == 0.0):
        raise LinearResponseError("all-zero spectrum cannot constrain a fit")

    def with_values(values) -> SystemParams:
        return replace(initial, **dict(zip(free, map(float, values))))

    def model(values):
        try:
            p = with_values(values)
        except LinearResponseError:
            # out-of-range trial point: return a huge residual instead
            return np.full_like(target, 1e6)
        return np.concatenate(
            [transmission(p, data.deltas_mhz, b) for b in branches]
        )

    x0 = [getattr(initial, name) for name in free]
    bounds = [_DEFAULT_BOUNDS[name] for name in free]
    result = numerics.fit_least_squares(model, target, x0, bounds=bounds)
    if not result.converged:
        raise LinearResponseError("spectrum fit did not converge")
    fitted = with_values(result.parameters)
    sigma = np.sqrt(np.clip(np.diag(result.covariance_estimate), 0.0, None))
    uncertainties = dict(zip(free, map(float, sigma)))
    n_eff = None
    if g0_mhz is not None:
        n_eff = 2.0 * fitted.kappa_mhz * fitted.gamma_mhz * fitted.c_plus / g0_mhz**2
    return SpectrumFit(
        params=fitted,
        uncertainties=uncertainties,
        residual_norm=result.residual_norm,
        converged=result.converged,
        n_eff=n_eff,
    )


def isolation_bandwidth(params: SystemParams, threshold_db: float) -> float:
    """Full width (MHz) of the contiguous detuning interval around zero where
    the isolation stays at or above `threshold_db`, located by bisection."""
    _, peak_db = isolation(params, 0.0)
    if peak_db < threshold_db:
        raise LinearResponseError(
            f"isolation at zero detuning ({peak_db:.2f} dB) is below the "
            f"{threshold_db:.2f} dB threshold"
        )

    def above(delta: float) -> bool:
        try:
            return isolation(params, delta)[1] >= threshold_db
        except LinearResponseError:
            return True  # T_+ underflow means effectively infinite isolation

    def edge(direction: float) -> float:
        # bracket the crossing, then bisect to 1e-3 MHz
        step = params.kappa_mhz
        lo, hi = 0.0, step * direction
        while above(hi):
            lo, hi = hi, hi + step * direction
            if abs(hi) > 1e7 * params.kappa_mhz:
                raise LinearResponseError("isolation never drops below threshold")
        while abs(hi - lo) > 1e-3:
            mid = 0.5 * (lo + hi)
            if above(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return edge(+1.0) - edge(-1.0)
