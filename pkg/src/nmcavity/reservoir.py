"""A discrete mode coupled to a band-limited continuum.

The continuum is described by its structure function D(w) on the band
(omega1, omega2). Everything here works for any such spectrum through
quadrature; spectra that know closed forms (see :mod:`nmcavity.crow`) can
attach them and the ``method="auto"`` paths will use them.

Sign conventions follow the Laplace variable ``s``: the band maps onto the
cut ``s = -i w`` with ``omega1 < w < omega2`` and the boundary values are
``Sigma(-i w +/- 0) = Delta(w) -/+ i pi D(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import CapabilityError, RegimeError
from .numerics import integrate, principal_value

QUAD_TOL = 1e-11


@dataclass(frozen=True)
class ReservoirSpectrum:
    """Band-limited structure function ``D(w) = coupling_scale**2 * density(w)``.

    ``density`` is the coupling shape at unit coupling scale and must be
    vectorised. The optional hooks are all given at unit coupling scale
    and are multiplied by ``coupling_scale**2`` when used:

    continuation
        analytic continuation of ``density`` off the real band, used for
        the second Riemann sheet.
    exact_self_energy
        ``(s, sheet, side) -> complex`` closed form of the self-energy.
    exact_lamb_shift
        ``w -> Delta(w)`` closed form.
    """

    omega1: float
    omega2: float
    density: Callable[[np.ndarray], np.ndarray]
    edge_exponents: tuple = (1.0, 1.0)
    coupling_scale: float = 1.0
    continuation: Optional[Callable[[complex], complex]] = None
    exact_self_energy: Optional[Callable[..., complex]] = None
    exact_lamb_shift: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "generic"

    def __post_init__(self):
        if not self.omega1 < self.omega2:
            raise ValueError("band edges must satisfy omega1 < omega2")
        d1, d2 = self.edge_exponents
        if d1 <= 0 or d2 <= 0:
            raise ValueError("edge exponents must be positive")
        if self.coupling_scale < 0:
            raise ValueError("coupling_scale must be non-negative")

    @property
    def width(self) -> float:
        return self.omega2 - self.omega1

    @property
    def center(self) -> float:
        return 0.5 * (self.omega1 + self.omega2)

    @property
    def weight(self) -> float:
        return self.coupling_scale**2

    def D(self, omega):
        """Structure function, zero outside the band."""
        w = np.asarray(omega, dtype=float)
        inside = (w > self.omega1) & (w < self.omega2)
        out = np.zeros_like(w)
        if np.any(inside):
            out[inside] = self.weight * np.asarray(self.density(w[inside]), dtype=float)
        return float(out) if out.ndim == 0 else out

    def with_coupling(self, coupling_scale: float) -> "ReservoirSpectrum":
        return replace(self, coupling_scale=coupling_scale)

    def on_band(self, func):
        """Integrate ``func(w)`` over the band through ``w = c - h cos(Q)``.

        The substitution removes square-root edge behaviour and keeps
        quadrature nodes away from the band edges.
        """
        c, h = self.center, 0.5 * self.width

        def integrand(q):
            w = c - h * np.cos(q)
            jac = h * np.sin(q)
            vals = np.asarray(func(w))
            return vals * jac.reshape((-1,) + (1,) * (vals.ndim - 1))

        return integrand


@dataclass(frozen=True)
class CavityParams:
    omega_a: float
    gain: float = 0.0
    intrinsic_loss: float = 0.0

    def __post_init__(self):
        if self.gain < 0 or self.intrinsic_loss < 0:
            raise ValueError("gain and intrinsic_loss must be non-negative")

    @property
    def effective_gain(self) -> float:
        return self.gain - self.intrinsic_loss


def _check_method(method):
    if method not in ("auto", "exact", "quadrature"):
        raise ValueError(f"unknown method {method!r}")


def _band_q(spec, omega):
    """Map a frequency to the cosine-substitution angle (clipped to [0, pi])."""
    x = (omega - spec.center) / (0.5 * spec.width)
    return math.acos(min(1.0, max(-1.0, -x)))


def lamb_shift(spec: ReservoirSpectrum, omega: float, method: str = "auto") -> float:
    """Frequency-shift function ``Delta(w) = P int D(w') / (w - w') dw'``.

    Inside the band the integral is a principal value; outside it is an
    ordinary integral.
    """
    _check_method(method)
    if spec.weight == 0.0:
        return 0.0
    if method != "quadrature" and spec.exact_lamb_shift is not None:
        return spec.weight * float(spec.exact_lamb_shift(omega))
    if method == "exact":
        raise CapabilityError(f"spectrum {spec.name!r} has no closed-form Lamb shift")
    omega = float(omega)
    if spec.omega1 < omega < spec.omega2:
        # principal value in the angle variable: the pole at w=omega maps to
        # q0 and the jacobian turns D(w) dw into a smooth integrand in q.
        c, h = spec.center, 0.5 * spec.width
        q0 = _band_q(spec, omega)

        def smooth(q):
            # D(w) dw / (omega - w) = D sin q dq / (cos q - cos q0); with
            # d = q0 - q this is [D sin q / (sinc(d/2) sin((q+q0)/2))] / d
            q = np.asarray(q, dtype=float)
            w = c - h * np.cos(q)
            d = q0 - q
            denom = np.sinc(d / (2 * math.pi)) * np.sin(0.5 * (q + q0))
            return np.sin(q) * spec.D(w) / denom

        return principal_value(smooth, 0.0, math.pi, q0, tol=QUAD_TOL)
    res = integrate(spec.on_band(lambda w: spec.D(w) / (omega - w)), 0.0, math.pi, QUAD_TOL)
    return float(res.value)


def _on_cut(spec, s):
    return s.real == 0.0 and spec.omega1 < -s.imag < spec.omega2


def _sigma_quadrature(spec, s: complex) -> complex:
    w0 = -s.imag
    pts = ()
    if spec.omega1 < w0 < spec.omega2:
        pts = (_band_q(spec, w0),)
    res = integrate(spec.on_band(lambda w: spec.D(w) / (1j * s - w)), 0.0, math.pi, QUAD_TOL,
                    points=pts)
    return complex(res.value)


def self_energy(
    spec: ReservoirSpectrum,
    s: complex,
    sheet: str = "first",
    side: Optional[int] = None,
    method: str = "auto",
) -> complex:
    """Self-energy ``Sigma(s) = int D(w) / (i s - w) dw``.

    Parameters
    ----------
    sheet : {"first", "second"}
        ``"second"`` is the continuation of the first-sheet function from
        ``Re s > 0`` through the cut, ``Sigma(s) - 2 pi i D(i s)``; it needs
        an analytic continuation of the density.
    side : {+1, -1}, optional
        For ``s`` on the cut, selects the boundary value ``s = -i w +/- 0``.
        Required when ``s`` lies on the cut.
    """
    _check_method(method)
    if sheet not in ("first", "second"):
        raise ValueError(f"sheet must be 'first' or 'second', got {sheet!r}")
    s = complex(s)
    if side not in (None, 1, -1):
        raise ValueError("side must be +1, -1 or None")
    on_cut = _on_cut(spec, s)
    if on_cut and side is None:
        raise ValueError(f"s={s} lies on the branch cut; pass side=+1 or side=-1")
    if method != "quadrature" and spec.exact_self_energy is not None:
        return spec.weight * complex(spec.exact_self_energy(s, sheet, side))
    if method == "exact":
        raise CapabilityError(f"spectrum {spec.name!r} has no closed-form self-energy")
    if spec.weight == 0.0:
        return 0j
    if on_cut:
        w = -s.imag
        first = lamb_shift(spec, w, "quadrature") - side * 1j * math.pi * spec.D(w)
    else:
        first = _sigma_quadrature(spec, s)
    if sheet == "first":
        return first
    if spec.continuation is None:
        raise CapabilityError(
            f"spectrum {spec.name!r} provides no analytic continuation; "
            "second-sheet self-energy is unavailable"
        )
    return first - 2j * math.pi * spec.weight * complex(spec.continuation(1j * s))


def continued_self_energy(spec: ReservoirSpectrum, s: complex, method: str = "auto") -> complex:
    """Self-energy continued from ``Re s > 0`` across the cut.

    First sheet for ``Re s >= 0``, second sheet for ``Re s < 0``; analytic
    across the cut segment. This is the function whose zeros are the
    resonance and lasing poles.
    """
    s = complex(s)
    if s.real >= 0.0:
        side = 1 if _on_cut(spec, s) else None
        return self_energy(spec, s, "first", side=side, method=method)
    return self_energy(spec, s, "second", method=method)


def memory_kernel(spec: ReservoirSpectrum, omega_a: float, tau):
    """Reservoir response ``G(tau) = int D(w) exp[-i (w - omega_a) tau] dw``.

    ``tau`` may be a scalar or an array of non-negative delays.
    """
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0):
        raise ValueError("tau must be non-negative")

    def f(w):
        return spec.D(w)[:, None] * np.exp(-1j * np.outer(w - omega_a, tau_arr))

    res = integrate(spec.on_band(f), 0.0, math.pi, QUAD_TOL)
    out = np.asarray(res.value)
    return complex(out[0]) if np.ndim(tau) == 0 else out


def memory_time(spec: ReservoirSpectrum, omega_a: float, tau_max: float | None = None) -> float:
    """First delay where ``|G(tau)|`` falls below ``|G(0)| / e``.

    Returns ``inf`` if that does not happen before ``tau_max`` (default
    ``200 / width``).
    """
    if tau_max is None:
        tau_max = 200.0 / spec.width
    g0 = abs(memory_kernel(spec, omega_a, 0.0))
    if g0 == 0.0:
        return 0.0
    grid = np.linspace(0.0, tau_max, 2001)
    vals = np.abs(memory_kernel(spec, omega_a, grid)) - g0 / math.e
    below = np.nonzero(vals < 0)[0]
    if below.size == 0:
        return math.inf
    i = below[0]
    return brentq(lambda t: abs(memory_kernel(spec, omega_a, t)) - g0 / math.e,
                  grid[i - 1], grid[i], xtol=1e-12)


@dataclass(frozen=True)
class MarkovRates:
    gamma_R: float
    delta_R: float
    in_band: bool


def markov_rates(spec: ReservoirSpectrum, omega_a: float, method: str = "auto") -> MarkovRates:
    """Weisskopf-Wigner decay rate ``pi D(omega_a)`` and shift ``Delta(omega_a)``.

    Outside the band there is no resonant decay channel: ``gamma_R = 0``
    and ``in_band`` is False.
    """
    in_band = spec.omega1 < omega_a < spec.omega2
    gamma = math.pi * spec.D(omega_a) if in_band else 0.0
    return MarkovRates(gamma, lamb_shift(spec, omega_a, method), in_band)


def markov_threshold(spec: ReservoirSpectrum, cavity: CavityParams) -> float:
    """Markovian threshold gain ``gamma_i + pi D(omega_a)``."""
    return cavity.intrinsic_loss + markov_rates(spec, cavity.omega_a).gamma_R


def bound_modes(spec: ReservoirSpectrum, omega_a: float, method: str = "auto") -> list:
    """Real roots of ``W - omega_a = Delta(W)`` outside the band.

    At most one root exists on each side because Delta decreases
    monotonically outside the band and vanishes at infinity. A root
    exactly at a band edge (the critical case) is not isolated and is not
    reported.
    """
    def h(w):
        return w - omega_a - lamb_shift(spec, w, method)

    roots = []
    w1, w2 = spec.omega1, spec.omega2
    scale = spec.width
    xtol = 1e-13 * scale
    # below the band: h(w1) > 0 signals a root at w < w1
    h1 = h(w1)
    if h1 > 0:
        far = w1 - 10 * scale
        while h(far) >= 0:
            far = w1 - 2 * (w1 - far)
        roots.append(brentq(h, far, w1, xtol=xtol))
    h2 = h(w2)
    if h2 < 0:
        far = w2 + 10 * scale
        while h(far) <= 0:
            far = w2 + 2 * (far - w2)
        roots.append(brentq(h, w2, far, xtol=xtol))
    return [r for r in roots if r < w1 or r > w2]


def critical_couplings(spec_shape: ReservoirSpectrum, omega_a: float,
                       method: str = "auto") -> tuple:
    """Coupling scales at which a bound mode appears at the lower and upper edge.

    ``spec_shape`` is taken at unit coupling scale (its ``coupling_scale``
    is ignored). Returns ``(lambda_I, lambda_II)`` for the lower and upper
    band edge respectively.
    """
    shape = spec_shape.with_coupling(1.0)
    if not shape.omega1 < omega_a < shape.omega2:
        raise RegimeError("critical couplings need omega_a strictly inside the band",
                          regime="outside_band")
    out = []
    for edge in (shape.omega1, shape.omega2):
        pv = lamb_shift(shape, edge, method)
        lam2 = (edge - omega_a) / pv if pv != 0 else math.nan
        if not lam2 > 0:
            raise RegimeError(f"non-positive critical coupling squared ({lam2}) at edge {edge}",
                              regime="inconsistent")
        out.append(math.sqrt(lam2))
    return tuple(out)
