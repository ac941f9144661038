"""Laplace-domain route to the cavity amplitude.

The transform of the cavity amplitude is ``c(s) = i / F(s)`` with
``F(s) = i s - omega_a - i g' - Sigma(s)``. For a passive cavity without
bound modes, closing the inversion contour around the cut gives a real-axis
integral over the band. Poles of the continued ``1/F`` (second sheet for
``Re s < 0``) are the resonances; one crossing into ``Re s > 0`` signals
lasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import RegimeError, RootFindingError
from .numerics import envelope_peaks, find_root_complex, fit_power_law, integrate
from .reservoir import (
    QUAD_TOL,
    ReservoirSpectrum,
    bound_modes,
    continued_self_energy,
    lamb_shift,
    markov_rates,
)

#: pole residual tolerance relative to the half bandwidth
POLE_RTOL = 1e-9
TAIL_TARGETS = {"critical": -0.5, "below_critical": -1.5}
TAIL_WINDOW = 0.25


@dataclass(frozen=True)
class ComplexPole:
    """Zero of ``F(s)``, written ``s_p = -gamma_p - i (omega_a + delta_p)``.

    ``residue`` is the residue of ``c(s) = i / F(s)`` at the pole, so the
    pole contributes ``residue * exp(s_p t)`` to ``c_a(t)``.
    """

    s_p: complex
    sheet: str
    gamma_p: float
    delta_p: float
    residue: complex
    residual: float
    g_prime: float = 0.0

    @property
    def growth_rate(self) -> float:
        """``Re s_p``; positive means the mode grows."""
        return self.s_p.real


def _half_width(spec):
    return 0.5 * spec.width


def pole_function(spec: ReservoirSpectrum, omega_a: float, g_prime: float = 0.0):
    """``F(s) = i s - omega_a - i g' - Sigma(s)`` with the continued self-energy."""
    def F(s):
        return 1j * s - omega_a - 1j * g_prime - continued_self_energy(spec, s)

    return F


def _lamb_on_nodes(spec, w):
    if spec.exact_lamb_shift is not None:
        return spec.weight * np.asarray(spec.exact_lamb_shift(w), dtype=float)
    return np.array([lamb_shift(spec, float(x)) for x in np.atleast_1d(w)])


def spectral_weight(spec: ReservoirSpectrum, omega_a: float, omega):
    """Density ``D / ([w - omega_a - Delta]^2 + pi^2 D^2)`` of the passive decay integral."""
    w = np.asarray(omega, dtype=float)
    d = spec.D(w)
    detune = w - omega_a - _lamb_on_nodes(spec, w)
    return d / (detune**2 + (math.pi * d) ** 2)


def decay_integral(spec: ReservoirSpectrum, omega_a: float, t, tol: float = 1e-10,
                   check_bound_modes: bool = True):
    """Passive amplitude ``c_a(t) = int rho(w) exp(-i w t) dw`` over the band.

    ``rho`` is :func:`spectral_weight`. The integral runs in the angle
    variable ``w = c - h cos Q``, which removes the square-root edge
    behaviour. ``t`` may be a scalar or an array; array input shares the
    quadrature nodes.

    Raises
    ------
    RegimeError
        If the cavity has bound modes: the band integral then misses the
        non-decaying fraction.
    """
    if check_bound_modes:
        bm = bound_modes(spec, omega_a)
        if bm:
            raise RegimeError(
                f"bound modes at {', '.join(f'{x:.6g}' for x in bm)}; the field does not "
                "decay completely and the band integral alone is incomplete",
                regime="bound_modes",
            )
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))

    def f(w):
        rho = spectral_weight(spec, omega_a, w)
        return rho[:, None] * np.exp(-1j * np.outer(w, t_arr))

    res = integrate(spec.on_band(f), 0.0, math.pi, tol)
    out = np.asarray(res.value)
    return complex(out[0]) if np.ndim(t) == 0 else out


def markov_seed(spec: ReservoirSpectrum, omega_a: float, g_prime: float = 0.0) -> complex:
    """Weak-coupling pole estimate ``g' - gamma_R - i (omega_a + Delta_R)``."""
    rates = markov_rates(spec, omega_a)
    return complex(g_prime - rates.gamma_R, -(omega_a + rates.delta_R))


def resonance_pole(spec: ReservoirSpectrum, omega_a: float, g_prime: float = 0.0,
                   seed: Optional[complex] = None, tol: Optional[float] = None) -> ComplexPole:
    """Pole of the continued ``c(s)`` nearest to ``seed``.

    The default seed is the Markovian estimate. Newton iteration runs on
    the continued self-energy, which is analytic across the band cut, so
    the pole may sit on either side of the imaginary axis.

    Raises
    ------
    RootFindingError
        If Newton fails or the converged residual violates the pole
        tolerance.
    """
    F = pole_function(spec, omega_a, g_prime)
    scale = _half_width(spec)
    tol = POLE_RTOL * scale if tol is None else tol
    s0 = markov_seed(spec, omega_a, g_prime) if seed is None else complex(seed)
    s_p = find_root_complex(F, s0, tol=0.1 * tol)
    residual = abs(F(s_p))
    if residual > tol:
        raise RootFindingError(f"pole residual {residual:.3e} exceeds {tol:.3e}", s_p, residual)
    h = 1e-5 * scale
    dF = (F(s_p + h) - F(s_p - h)) / (2 * h)
    return ComplexPole(
        s_p=s_p,
        sheet="first" if s_p.real >= 0 else "second",
        gamma_p=-s_p.real,
        delta_p=-s_p.imag - omega_a,
        residue=1j / dF,
        residual=residual,
        g_prime=g_prime,
    )


def track_pole(spec: ReservoirSpectrum, omega_a: float, g_values: Sequence[float],
               seed: Optional[complex] = None, max_step: Optional[float] = None,
               g_start: float = 0.0, strict: bool = True) -> list:
    """Follow one pole along increasing ``g'`` by continuation.

    The track starts at ``g_start`` (Markov seed unless ``seed`` is given)
    and moves through the sorted targets in steps of at most ``max_step``
    (default ``0.05`` of the half bandwidth), seeding each solve with the
    previous pole. Intermediate points where Newton fails are skipped.
    Failure at a requested value raises when ``strict``, otherwise that
    entry is None (this happens when the pole sits exactly on a cut, as for
    virtual states at zero gain). Returns the poles in the order of
    ``g_values``.
    """
    g_values = np.asarray(g_values, dtype=float)
    if g_values.size == 0:
        return []
    scale = _half_width(spec)
    max_step = 0.05 * scale if max_step is None else max_step
    order = np.argsort(g_values, kind="stable")
    g_cur = min(g_start, float(g_values[order[0]]))
    cur = markov_seed(spec, omega_a, g_cur) if seed is None else complex(seed)
    poles = [None] * g_values.size
    for idx in order:
        target = float(g_values[idx])
        n_sub = max(1, math.ceil((target - g_cur) / max_step - 1e-12))
        for g in np.linspace(g_cur, target, n_sub + 1)[1:-1]:
            try:
                cur = resonance_pole(spec, omega_a, float(g), cur).s_p
            except RootFindingError:
                pass
        try:
            pole = resonance_pole(spec, omega_a, target, cur)
        except RootFindingError:
            if strict:
                raise
            g_cur = target
            continue
        poles[idx] = pole
        cur, g_cur = pole.s_p, target
    return poles


def pole_plus_cut(spec: ReservoirSpectrum, omega_a: float, t, pole: Optional[ComplexPole] = None):
    """Split the passive amplitude into resonance and cut contributions.

    ``pole_term = Z exp(s_p t)`` and ``cut_term = c_a(t) - pole_term`` with
    ``c_a`` from :func:`decay_integral`.
    """
    if pole is None:
        pole = resonance_pole(spec, omega_a, 0.0)
    total = decay_integral(spec, omega_a, t)
    pole_term = pole.residue * np.exp(pole.s_p * np.asarray(t, dtype=float))
    if np.ndim(t) == 0:
        pole_term = complex(pole_term)
    return pole_term, total - pole_term


@dataclass(frozen=True)
class WeisskopfWigner:
    """Exact pole next to its Markovian approximation."""

    gamma_markov: float
    delta_markov: float
    gamma_pole: float
    delta_pole: float

    @property
    def rate_ratio(self) -> float:
        return self.gamma_pole / self.gamma_markov if self.gamma_markov else math.nan


def weisskopf_wigner(spec: ReservoirSpectrum, omega_a: float) -> WeisskopfWigner:
    """Compare the passive resonance with the Weisskopf-Wigner rate and shift."""
    rates = markov_rates(spec, omega_a)
    pole = resonance_pole(spec, omega_a, 0.0)
    return WeisskopfWigner(rates.gamma_R, rates.delta_R, pole.gamma_p, pole.delta_p)


def markov_amplitude(spec: ReservoirSpectrum, omega_a: float, t, g_prime: float = 0.0):
    """Weisskopf-Wigner amplitude ``exp[(g' - gamma_R - i omega_a - i Delta_R) t]``."""
    return np.exp(markov_seed(spec, omega_a, g_prime) * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class TailFit:
    exponent: float
    regime: str
    n_points: int
    used_envelope: bool


def classify_tail(series, window: Optional[tuple] = None) -> TailFit:
    """Fit the late-time power law of ``|c_a|`` and name the coupling regime.

    ``series`` is a :class:`~nmcavity.lattice_sim.TimeSeries` or a pair
    ``(t, c)``. The local maxima of ``|c|`` inside ``window`` are fitted
    with a power law (all samples are used when fewer than 10 maxima
    exist). An exponent within 0.25 of -1/2 reads as ``"critical"``,
    within 0.25 of -3/2 as ``"below_critical"``, otherwise
    ``"unclassified"``.
    """
    if hasattr(series, "c_a"):
        t, c = series.t, series.c_a
    else:
        t, c = series
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(c))
    if window is not None:
        lo, hi = window
        keep = (t >= lo) & (t <= hi)
        t, y = t[keep], y[keep]
    tp, yp = envelope_peaks(t, y)
    used_env = tp.size >= 10
    if not used_env:
        keep = y > 0
        tp, yp = t[keep], y[keep]
    if tp.size < 10:
        raise ValueError("not enough samples in the fit window")
    exponent = fit_power_law(tp, yp)
    regime = "unclassified"
    for name, target in TAIL_TARGETS.items():
        if abs(exponent - target) <= TAIL_WINDOW:
            regime = name
    return TailFit(exponent, regime, int(tp.size), used_env)


def spectral_norm(spec: ReservoirSpectrum, omega_a: float) -> float:
    """Total spectral weight of the decay integral (1 without bound modes)."""
    res = integrate(spec.on_band(lambda w: spectral_weight(spec, omega_a, w)), 0.0, math.pi,
                    QUAD_TOL)
    return float(np.real(res.value))
