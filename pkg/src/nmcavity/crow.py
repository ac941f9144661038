"""Microcavity side-coupled to a coupled-resonator optical waveguide (CROW).

Closed forms for the tight-binding CROW reservoir: dispersion, structure
function, self-energy on both sheets, Lamb shift, the bound-mode region and
the lattice <-> continuum map. All dynamics are in the frame rotating at the
band centre, where the band is (-2 kappa, 2 kappa) and ``omega_a`` is the
detuning of the microcavity from the band centre.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import RegimeError
from .reservoir import ReservoirSpectrum

#: relative tolerance used to decide that a coupling sits exactly on a boundary
EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class CrowParams:
    """CROW and microcavity parameters.

    ``omega0`` and ``d`` are bookkeeping only: the simulation and the
    analytics work in the rotating frame.
    """

    kappa: float = 1.0
    kappa0: float = 0.5
    omega_a: float = 0.0
    gamma_loss: float = 0.0
    omega0: float = 0.0
    d: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.kappa0 < 0:
            raise ValueError("kappa0 must be non-negative")
        if self.gamma_loss < 0:
            raise ValueError("gamma_loss must be non-negative")
        if not self.d > 0:
            raise ValueError("d must be positive")

    @classmethod
    def normalized(cls, r2: float, detuning: float = 0.0, kappa: float = 1.0,
                   gamma_loss: float = 0.0) -> "CrowParams":
        """Build from ``(kappa0/kappa)**2`` and ``omega_a / (2 kappa)``."""
        if r2 < 0:
            raise ValueError("r2 must be non-negative")
        return cls(kappa=kappa, kappa0=kappa * math.sqrt(r2), omega_a=2 * kappa * detuning,
                   gamma_loss=gamma_loss)

    @property
    def ratio(self) -> float:
        return self.kappa0 / self.kappa

    @property
    def r2(self) -> float:
        return (self.kappa0 / self.kappa) ** 2

    @property
    def detuning(self) -> float:
        """Normalised detuning ``omega_a / (2 kappa)``."""
        return self.omega_a / (2 * self.kappa)


def dispersion(params: CrowParams, k):
    """Tight-binding band ``omega0 - 2 kappa cos(k d)``."""
    return params.omega0 - 2 * params.kappa * np.cos(np.asarray(k) * params.d)


def _root(s: complex, kappa: float, side) -> complex:
    """``R(s) = s sqrt(1 + (2 kappa / s)^2)``; cut on the segment (-2i kappa, 2i kappa).

    On the cut the two boundary values ``s = -i w +/- 0`` are
    ``+/- sqrt(4 kappa^2 - w^2)``, chosen by ``side``.
    """
    if s.real == 0.0 and abs(s.imag) < 2 * kappa:
        if side is None:
            raise ValueError(f"s={s} lies on the branch cut; pass side=+1 or side=-1")
        return side * math.sqrt(4 * kappa * kappa - s.imag * s.imag)
    return s * cmath.sqrt(1 + (2 * kappa / s) ** 2)


def _sigma_shape(kappa):
    def sigma(s, sheet="first", side=None):
        s = complex(s)
        r = _root(s, kappa, side)
        if sheet == "first":
            return 1j * (s - r)
        if sheet == "second":
            return 1j * (s + r)
        raise ValueError(f"sheet must be 'first' or 'second', got {sheet!r}")

    return sigma


def _lamb_shape(kappa):
    def delta(omega):
        w = np.asarray(omega, dtype=float)
        # the radical vanishes inside the band, leaving Delta = w
        rad = np.sqrt(np.clip(w * w - 4 * kappa * kappa, 0.0, None))
        out = w - np.sign(w) * rad
        return float(out) if out.ndim == 0 else out

    return delta


def crow_spectrum(params: CrowParams) -> ReservoirSpectrum:
    """Reservoir of the CROW: ``D(w) = (2 kappa0^2 / pi kappa) sqrt(1 - (w/2 kappa)^2)``.

    The coupling scale is ``kappa0 / kappa``; the attached closed forms make
    second-sheet evaluation exact.
    """
    kappa = params.kappa

    def density(w):
        x = np.asarray(w, dtype=float) / (2 * kappa)
        return (2 * kappa / math.pi) * np.sqrt(np.clip(1 - x * x, 0.0, None))

    def continuation(z):
        return (2 * kappa / math.pi) * cmath.sqrt(1 - (complex(z) / (2 * kappa)) ** 2)

    return ReservoirSpectrum(
        omega1=-2 * kappa,
        omega2=2 * kappa,
        density=density,
        edge_exponents=(0.5, 0.5),
        coupling_scale=params.ratio,
        continuation=continuation,
        exact_self_energy=_sigma_shape(kappa),
        exact_lamb_shift=_lamb_shape(kappa),
        name="crow",
    )


def crow_self_energy(params: CrowParams, s: complex, sheet: str = "first", side=None) -> complex:
    """Closed-form self-energy ``i (kappa0/kappa)^2 [s -/+ R(s)]`` (first/second sheet)."""
    return params.r2 * _sigma_shape(params.kappa)(s, sheet, side)


def crow_lamb_shift(params: CrowParams, omega):
    """Piecewise closed-form frequency shift of the CROW reservoir."""
    return params.r2 * _lamb_shape(params.kappa)(omega)


def no_bound_mode_region(params: CrowParams) -> bool:
    """True when ``r^2 - 1 <= omega_a / 2 kappa <= 1 - r^2`` (complete passive decay).

    Equality is decided with a relative tolerance ``EDGE_RTOL`` so that
    parameters set exactly at critical coupling count as inside.
    """
    x = params.detuning
    margin = 1.0 - params.r2
    tol = EDGE_RTOL * max(1.0, abs(x), params.r2)
    return -margin - tol <= x <= margin + tol


def critical_coupling(params: CrowParams) -> float:
    """Critical ``kappa0 / kappa = sqrt(1 - |omega_a| / 2 kappa)``."""
    x = abs(params.detuning)
    if x > 1:
        raise RegimeError("cavity resonance lies outside the CROW band; no critical coupling",
                          regime="outside_band")
    return math.sqrt(1.0 - x)


# ---------------------------------------------------------------------------
# lattice <-> continuum map
# ---------------------------------------------------------------------------


def phi_from_lattice(a_pos, q):
    """Sine series ``phi(Q) = sum_{n>=1} a_n sin(n Q)``."""
    a_pos = np.asarray(a_pos)
    q = np.asarray(q, dtype=float)
    n = np.arange(1, a_pos.size + 1)
    return np.sin(np.multiply.outer(q, n)) @ a_pos


def lattice_from_phi(phi, n_sites: int, n_quad: int | None = None):
    """Recover ``a_n = (2/pi) int_0^pi phi(Q) sin(nQ) dQ`` for ``n = 1..n_sites``.

    ``phi`` is a callable. The midpoint rule with ``M`` nodes is exact for
    trigonometric polynomials of degree below ``2M``, so the default
    ``M = 2 n_sites + 2`` reproduces sine series of up to ``n_sites`` terms
    exactly.
    """
    m = n_quad or 2 * n_sites + 2
    q = (np.arange(m) + 0.5) * math.pi / m
    vals = np.asarray(phi(q))
    n = np.arange(1, n_sites + 1)
    return (2.0 / m) * (np.sin(np.multiply.outer(n, q)) @ vals)


def lattice_to_continuum(a_pos, kappa: float, omega, a_neg=None, atol: float = 1e-12):
    """Continuum amplitude ``c(w)`` equivalent to inversion-symmetric lattice data.

    ``c(w) = -sqrt(2 / pi kappa) phi(Q) [1 - w^2 / 4 kappa^2]^(-1/4)`` with
    ``w = -2 kappa cos Q``. ``a_pos`` holds ``a_1..a_N``; if the mirror
    amplitudes ``a_neg`` (``a_{-1}..a_{-N}``) are given they must match.
    """
    a_pos = np.asarray(a_pos)
    if a_neg is not None:
        a_neg = np.asarray(a_neg)
        if a_neg.shape != a_pos.shape or np.max(np.abs(a_neg - a_pos), initial=0.0) > atol:
            raise ValueError("lattice data is not inversion symmetric (a_-n != a_n)")
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(w) >= 2 * kappa):
        raise ValueError("continuum frequencies must lie strictly inside the band")
    x = w / (2 * kappa)
    q = np.arccos(-x)
    phi = phi_from_lattice(a_pos, q)
    return -math.sqrt(2 / (math.pi * kappa)) * phi * (1 - x * x) ** -0.25
