"""Lasing threshold and instability of a cavity with gain above a structured continuum.

Below critical coupling the threshold is where the resonance pole crosses
the imaginary axis: ``g_th = gamma_i + pi D(W)`` with ``W`` a real fixed
point of ``W - omega_a = Delta(W)`` inside the band. At critical coupling
no conventional threshold exists; the resonant case has closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .crow import EDGE_RTOL, CrowParams, critical_coupling, crow_spectrum
from .errors import RegimeError
from .numerics import bessel_j
from .reservoir import ReservoirSpectrum, bound_modes, lamb_shift
from .spectral import track_pole

BELOW = "below_critical"
DETUNED = "critical_detuned"
RESONANT = "critical_resonant"


@dataclass(frozen=True)
class ThresholdResult:
    """Threshold gain, oscillation frequency and every fixed-point candidate.

    ``all_fixed_points`` holds ``(W, g_th candidate)`` pairs; ``g_th`` is the
    smallest candidate.
    """

    g_th: float
    omega_osc: float
    regime: str
    all_fixed_points: list = field(default_factory=list)


def threshold_generic(spec: ReservoirSpectrum, omega_a: float, gamma_i: float = 0.0,
                      n_scan: int = 4001) -> ThresholdResult:
    """Threshold from the fixed points of ``W - omega_a = Delta(W)`` in the band.

    Roots are bracketed by a sign scan on ``n_scan`` interior points and
    polished with Brent's method.
    """
    if bound_modes(spec, omega_a):
        raise RegimeError("bound modes present: the coupling is above critical",
                          regime="bound_modes")
    w1, w2 = spec.omega1, spec.omega2
    pad = 1e-9 * spec.width
    grid = np.linspace(w1 + pad, w2 - pad, n_scan)

    def h(w):
        return w - omega_a - lamb_shift(spec, w)

    vals = np.array([h(w) for w in grid])
    roots = list(grid[vals == 0.0])
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        roots.append(brentq(h, grid[i], grid[i + 1], xtol=1e-15 * spec.width, rtol=1e-15))
    if not roots:
        raise RegimeError(
            "no in-band fixed point found; the spectrum violates the assumptions that "
            "guarantee a threshold", regime="no_fixed_point")
    cands = sorted((float(w), gamma_i + math.pi * float(spec.D(w))) for w in roots)
    w_best, g_best = min(cands, key=lambda c: c[1])
    return ThresholdResult(g_best, w_best, BELOW, cands)


def classify_regime(params: CrowParams) -> str:
    """Name the coupling regime of a CROW-coupled cavity.

    Equality with the critical coupling is decided with relative
    tolerance ``EDGE_RTOL``.

    Raises
    ------
    RegimeError
        Above critical coupling (bound modes), or with the cavity outside the band.
    """
    try:
        r_crit = critical_coupling(params)
    except RegimeError as exc:
        raise RegimeError(f"{exc}; bound modes are present", regime="bound_modes") from None
    r = params.ratio
    tol = EDGE_RTOL * max(1.0, r_crit)
    if r < r_crit - tol:
        return BELOW
    if r <= r_crit + tol:
        return RESONANT if abs(params.detuning) <= EDGE_RTOL else DETUNED
    raise RegimeError(
        f"kappa0/kappa = {r:.12g} exceeds the critical coupling {r_crit:.12g}: bound modes "
        "exist and the field does not decay completely (out of scope)",
        regime="bound_modes",
    )


def _closed_threshold(r2: float, x: float) -> float:
    """Normalised threshold ``g_th / 2 kappa`` at ``gamma_i = 0``.

    At critical coupling this is the limit from below: zero when detuned,
    ``r2`` (the top of the neutral interval) at resonance.
    """
    if x == 0.0:
        return r2
    if r2 >= 1.0:
        return 0.0
    y = x / (1.0 - r2)
    return r2 * math.sqrt(max(0.0, 1.0 - y * y))


def threshold_crow(params: CrowParams, gamma_i: float = 0.0) -> ThresholdResult:
    """Closed-form threshold below critical coupling.

    ``W_osc = omega_a / (1 - r^2)`` and
    ``g_th = gamma_i + 2 kappa r^2 sqrt(1 - [x / (1 - r^2)]^2)`` with
    ``x = omega_a / 2 kappa``.
    """
    regime = classify_regime(params)
    if regime != BELOW:
        raise RegimeError(
            f"{regime.replace('_', ' ')} coupling: there is no conventional lasing threshold",
            regime=regime,
        )
    r2 = params.r2
    w_osc = params.omega_a / (1.0 - r2)
    g_th = gamma_i + 2 * params.kappa * _closed_threshold(r2, params.detuning)
    return ThresholdResult(g_th, w_osc, regime, [(w_osc, g_th)])


@dataclass(frozen=True)
class ThresholdCurve:
    r2: np.ndarray
    g_th: np.ndarray
    peak_r2: float
    peak_g_th: float
    detuning: float


def threshold_sweep(detuning: float, r2_grid: Sequence[float]) -> ThresholdCurve:
    """Normalised threshold ``g_th / 2 kappa`` against ``(kappa0/kappa)^2``.

    The grid may end at the critical value ``1 - |detuning|``, where the
    threshold has dropped to zero. The maximum is refined with a bounded
    scalar search around the best grid point.
    """
    r2 = np.asarray(r2_grid, dtype=float)
    crit = 1.0 - abs(detuning)
    if np.any(r2 < 0) or np.any(r2 > crit + EDGE_RTOL * max(1.0, crit)):
        raise ValueError(f"grid must lie in [0, {crit:g}] for detuning {detuning:g}")
    g = np.array([_closed_threshold(v, detuning) for v in r2])
    i = int(np.argmax(g))
    lo = r2[max(i - 1, 0)]
    hi = r2[min(i + 1, r2.size - 1)]
    peak_r2, peak_g = float(r2[i]), float(g[i])
    if hi > lo:
        opt = minimize_scalar(lambda v: -_closed_threshold(v, detuning), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        if -opt.fun >= peak_g:
            peak_r2, peak_g = float(opt.x), float(-opt.fun)
    return ThresholdCurve(r2, g, peak_r2, peak_g, detuning)


def _pole_shift(gamma_loss: float, loss: str):
    """Map the lossy problem onto the lossless one.

    CROW-only loss enters the self-energy as ``Sigma(s + gamma_loss)``, which
    is the lossless pole at gain ``g' + gamma_loss`` shifted by
    ``-gamma_loss``. Global loss is a plain shift.
    """
    if loss == "global":
        return 0.0, -gamma_loss
    if loss == "crow":
        return gamma_loss, -gamma_loss
    raise ValueError("loss must be 'crow' or 'global'")


def growth_rate_track(params: CrowParams, g_values: Sequence[float], gamma_i: float = 0.0,
                      loss: str = "global", seed: Optional[complex] = None,
                      strict: bool = False):
    """Growth rates ``sigma = Re s_p`` along a continuation in gain.

    Returns ``(sigma, poles)``. Points where the pole cannot be resolved
    (it lies on a cut, e.g. a virtual state at zero gain) give ``nan`` and
    a None pole unless ``strict``. Bound-mode parameters are rejected.
    """
    classify_regime(params)
    g_values = np.asarray(g_values, dtype=float)
    if np.any(g_values < 0):
        raise ValueError("gain values must be non-negative")
    extra, shift = _pole_shift(params.gamma_loss, loss)
    spec = crow_spectrum(params)
    poles = track_pole(spec, params.omega_a, g_values - gamma_i + extra, seed=seed,
                       g_start=min(0.0, float(np.min(g_values)) - gamma_i + extra),
                       strict=strict)
    sigma = np.array([math.nan if p is None else p.s_p.real + shift for p in poles])
    return sigma, poles


def growth_rate(params: CrowParams, g: float, gamma_i: float = 0.0, loss: str = "global",
                seed: Optional[complex] = None) -> float:
    """``sigma(g) = Re s_p`` of the tracked resonance pole."""
    sigma, _ = growth_rate_track(params, [g], gamma_i, loss, seed, strict=True)
    return float(sigma[0])


def resonant_critical_solution(kappa: float, g: float, t):
    """Dominant analytic term of ``c_a(t)`` for ``omega_a = 0`` and ``kappa0 = kappa``.

    Returns ``(value, label)``:

    - ``g = 0``: ``J0(2 kappa t)``, ``"decay_J0"`` (exact);
    - ``0 < g < 2 kappa``: ``2g/W sin(W t)`` with ``W = sqrt(4 kappa^2 - g^2)``,
      ``"oscillation"``;
    - ``g = 2 kappa``: ``4 kappa t``, ``"secular"``;
    - ``g > 2 kappa``: ``(g/a) exp(a t)`` with ``a = sqrt(g^2 - 4 kappa^2)``,
      ``"exponential"``.

    Apart from ``g = 0`` a decaying remainder is omitted, so the value is
    only accurate at late times.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if g < 0:
        raise ValueError("gain must be non-negative")
    t = np.asarray(t, dtype=float)
    edge = 2 * kappa
    if g == 0:
        val, label = bessel_j(0, 2 * kappa * t), "decay_J0"
    elif abs(g - edge) <= EDGE_RTOL * edge:
        val, label = 4 * kappa * t, "secular"
    elif g < edge:
        w = math.sqrt(edge**2 - g * g)
        val, label = (2 * g / w) * np.sin(w * t), "oscillation"
    else:
        a = math.sqrt(g * g - edge**2)
        val, label = (g / a) * np.exp(a * t), "exponential"
    val = np.asarray(val, dtype=float)
    return (float(val) if val.ndim == 0 else val), label


def oscillation_parameters(kappa: float, g: float) -> tuple:
    """Amplitude ``2g / W`` and angular frequency ``W`` of the neutral oscillation."""
    if not 0 < g < 2 * kappa:
        raise RegimeError("neutral oscillation needs 0 < g < 2 kappa", regime="critical_resonant")
    w = math.sqrt(4 * kappa * kappa - g * g)
    return 2 * g / w, w


@dataclass(frozen=True)
class LossyEnvelope:
    """Secular envelope ``4 kappa t exp(-gamma_loss t)`` and its maximum."""

    envelope: np.ndarray
    t_peak: float
    peak: float
    order_of_magnitude: float


def lossy_envelope(kappa: float, gamma_loss: float, t) -> LossyEnvelope:
    """Transient amplification at ``g = 2 kappa`` with uniform loss.

    The envelope peaks at ``t* = 1/gamma_loss`` with value
    ``4 kappa / (e gamma_loss)``; ``order_of_magnitude`` is the rough scale
    ``2 kappa / gamma_loss``.
    """
    if not gamma_loss > 0:
        raise ValueError("gamma_loss must be positive: without loss the envelope has no maximum")
    t = np.asarray(t, dtype=float)
    env = 4 * kappa * t * np.exp(-gamma_loss * t)
    return LossyEnvelope(env, 1.0 / gamma_loss, 4 * kappa / (math.e * gamma_loss),
                         2 * kappa / gamma_loss)
