"""Time-domain integration of the truncated microcavity-CROW lattice.

The state vector is ordered ``[a_-N, ..., a_-1, c_a, a_1, ..., a_N]`` and
evolves under ``i dy/dt = H y`` with a tridiagonal, generally non-Hermitian
``H``. Integration uses the classical fourth-order Runge-Kutta scheme with a
fixed step, so runs are bit-reproducible. The lattice is cut off with hard
zero boundaries at ``|n| = N``; results are only trusted before the
wavefront (speed ``2 kappa`` sites per unit time) reaches the boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .crow import CrowParams
from .errors import HorizonError

log = logging.getLogger(__name__)

HORIZON_FRACTION = 0.9
GUARD_THRESHOLD = 1e-8
_OVERFLOW = 1e150


def validity_horizon(kappa: float, n_sites: int) -> float:
    """Latest trustworthy time ``0.9 N / (2 kappa)`` for an N-site-per-side lattice."""
    return HORIZON_FRACTION * n_sites / (2.0 * kappa)


def default_sites(kappa: float, t_max: float) -> int:
    """Default lattice size ``2 ceil(kappa t_max) + 50``, enlarged if needed
    so that ``t_max`` stays inside the validity horizon."""
    n = 2 * math.ceil(kappa * t_max) + 50
    need = math.ceil(2.0 * kappa * t_max / HORIZON_FRACTION) + 1
    return max(n, need)


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. ``n_sites`` is per side of the microcavity."""

    n_sites: int
    t_max: float
    dt: float = 0.02
    record_stride: int = 1
    boundary_guard: bool = True
    keep_states: bool = False

    def __post_init__(self):
        if self.n_sites < 8:
            raise ValueError("n_sites must be at least 8")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max >= 0:
            raise ValueError("t_max must be non-negative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @classmethod
    def for_horizon(cls, kappa: float, t_max: float, **kw) -> "SimConfig":
        return cls(n_sites=default_sites(kappa, t_max), t_max=t_max, **kw)


@dataclass
class LatticeState:
    """Microcavity amplitude ``c_a`` and CROW amplitudes ``a`` at time ``t``.

    ``a`` has length ``2N`` ordered ``a_-N..a_-1, a_1..a_N``.
    """

    c_a: complex
    a: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, n_sites: int) -> "LatticeState":
        """Field in the microcavity only: ``c_a = 1``, ``a_n = 0``."""
        return cls(1.0 + 0j, np.zeros(2 * n_sites, dtype=complex), 0.0)

    @property
    def n_sites(self) -> int:
        return self.a.size // 2

    @property
    def a_pos(self) -> np.ndarray:
        """``a_1..a_N``."""
        return self.a[self.n_sites:]

    @property
    def a_neg(self) -> np.ndarray:
        """``a_-1..a_-N`` (mirror order, so ``a_neg[k] = a_-(k+1)``)."""
        return self.a[: self.n_sites][::-1]

    def to_vector(self) -> np.ndarray:
        n = self.n_sites
        return np.concatenate([self.a[:n], [self.c_a], self.a[n:]]).astype(complex)

    @classmethod
    def from_vector(cls, y: np.ndarray, t: float) -> "LatticeState":
        n = (y.size - 1) // 2
        return cls(complex(y[n]), np.concatenate([y[:n], y[n + 1:]]), t)


@dataclass
class TimeSeries:
    """Sampled output of :func:`evolve`.

    ``edge_power`` is ``max(|a_-N|^2, |a_N|^2)``; ``crow_power`` is the
    power stored in the CROW. ``balance_residual`` holds the pointwise
    power-balance mismatch.
    """

    t: np.ndarray
    c_a: np.ndarray
    total_power: np.ndarray
    crow_power: np.ndarray
    edge_power: np.ndarray
    balance_residual: np.ndarray
    params: CrowParams
    g: float
    gamma_i: float
    loss: str
    config: SimConfig
    overflow: bool = False
    states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def t_prime(self) -> np.ndarray:
        """Dimensionless time ``2 kappa t``."""
        return 2 * self.params.kappa * self.t


def hamiltonian_bands(params: CrowParams, n_sites: int, g: float = 0.0, gamma_i: float = 0.0,
                      loss: str = "crow"):
    """Diagonal and off-diagonal of the lattice Hamiltonian.

    ``loss="crow"`` damps only the CROW cavities; ``loss="global"`` also
    applies ``gamma_loss`` to the microcavity.
    """
    if loss not in ("crow", "global"):
        raise ValueError("loss must be 'crow' or 'global'")
    n = n_sites
    diag = np.full(2 * n + 1, -1j * params.gamma_loss, dtype=complex)
    diag[n] = params.omega_a + 1j * (g - gamma_i)
    if loss == "global":
        diag[n] -= 1j * params.gamma_loss
    off = np.full(2 * n, -params.kappa, dtype=complex)
    off[n - 1] = -params.kappa0
    off[n] = -params.kappa0
    return diag, off


def evolve(
    params: CrowParams,
    g: float,
    config: SimConfig,
    initial: Optional[LatticeState] = None,
    *,
    gamma_i: float = 0.0,
    loss: str = "crow",
) -> TimeSeries:
    """Integrate the coupled-mode lattice from ``initial`` up to ``config.t_max``.

    The microcavity row is ``i dc_a/dt = -kappa0 (a_-1 + a_1) + (omega_a +
    i (g - gamma_i)) c_a``; the CROW rows are nearest-neighbour hopping with
    amplitude ``kappa`` and loss ``gamma_loss``. The number of steps is
    ``round(t_max / dt)``.

    Raises
    ------
    HorizonError
        If ``t_max`` exceeds the validity horizon and the guard is on.
    """
    n = config.n_sites
    horizon = validity_horizon(params.kappa, n)
    if config.boundary_guard and config.t_max > horizon * (1 + 1e-12):
        raise HorizonError(
            f"t_max={config.t_max:g} exceeds the validity horizon {horizon:g} "
            f"(0.9 N / 2 kappa with N={n}); increase n_sites to at least "
            f"{default_sites(params.kappa, config.t_max)} or disable the boundary guard"
        )
    if initial is None:
        initial = LatticeState.initial(n)
    if initial.n_sites != n:
        raise ValueError("initial state size does not match config.n_sites")
    diag, off = hamiltonian_bands(params, n, g, gamma_i, loss)
    a_diag = -1j * diag
    a_off = -1j * off

    def rhs(y):
        out = a_diag * y
        out[:-1] += a_off * y[1:]
        out[1:] += a_off * y[:-1]
        return out

    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    stride = config.record_stride
    n_rec = n_steps // stride + 1
    t = np.zeros(n_rec)
    c = np.zeros(n_rec, dtype=complex)
    p_tot = np.zeros(n_rec)
    p_crow = np.zeros(n_rec)
    p_edge = np.zeros(n_rec)
    states = np.zeros((n_rec, 2 * n), dtype=complex) if config.keep_states else None

    y = initial.to_vector()
    t0 = initial.t
    overflow = False

    def record(k, y, time):
        t[k] = time
        c[k] = y[n]
        pw = np.abs(y) ** 2
        p_tot[k] = pw.sum()
        p_crow[k] = p_tot[k] - pw[n]
        p_edge[k] = max(pw[0], pw[-1])
        if states is not None:
            states[k, :n] = y[:n]
            states[k, n:] = y[n + 1:]

    record(0, y, t0)
    k = 1
    half = 0.5 * dt
    for step in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + half * k1)
        k3 = rhs(y + half * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % stride == 0:
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > _OVERFLOW:
                overflow = True
                log.warning("amplitude overflow at t=%g; series truncated", t0 + step * dt)
                break
            record(k, y, t0 + step * dt)
            k += 1

    sl = slice(0, k)
    series = TimeSeries(
        t=t[sl], c_a=c[sl], total_power=p_tot[sl], crow_power=p_crow[sl],
        edge_power=p_edge[sl], balance_residual=np.zeros(k), params=params, g=g,
        gamma_i=gamma_i, loss=loss, config=config, overflow=overflow,
        states=None if states is None else states[sl],
    )
    if k >= 3:
        series.balance_residual = _balance_mismatch(series, g, gamma_i, params.gamma_loss, loss)
    return series


def _balance_mismatch(series, g, gamma_i, gamma_loss, loss):
    dpdt = np.gradient(series.total_power, series.t, edge_order=2)
    cav = np.abs(series.c_a) ** 2
    cav_loss = gamma_loss if loss == "global" else 0.0
    expected = 2 * (g - gamma_i - cav_loss) * cav - 2 * gamma_loss * series.crow_power
    return np.abs(dpdt - expected)


def power_balance_residual(series: TimeSeries, g: Optional[float] = None,
                           gamma_i: Optional[float] = None,
                           gamma_loss: Optional[float] = None,
                           loss: Optional[str] = None) -> float:
    """Largest mismatch of ``dP/dt = 2 (g - gamma_i) |c_a|^2 - 2 gamma_loss P_crow``.

    The factor 2 follows from the amplitude equations of motion. ``dP/dt``
    uses second-order centred differences of the recorded ``P(t)``.
    Arguments default to the values the series was produced with.
    """
    if series.t.size < 3:
        raise ValueError("power balance needs at least 3 samples")
    g = series.g if g is None else g
    gamma_i = series.gamma_i if gamma_i is None else gamma_i
    gamma_loss = series.params.gamma_loss if gamma_loss is None else gamma_loss
    loss = series.loss if loss is None else loss
    return float(np.max(_balance_mismatch(series, g, gamma_i, gamma_loss, loss)))


@dataclass(frozen=True)
class GuardReport:
    ok: bool
    first_violation: Optional[float]
    message: str


def boundary_guard(series: TimeSeries, config: Optional[SimConfig] = None) -> GuardReport:
    """Flag the first sample where ``|a_+-N|^2 > 1e-8 P(t)``.

    A passing report certifies that the recorded ``c_a`` cannot contain
    reflections from the truncation boundary.
    """
    config = config or series.config
    bad = np.nonzero(series.edge_power > GUARD_THRESHOLD * series.total_power)[0]
    if bad.size == 0:
        return GuardReport(True, None, f"pass: boundary sites stay quiet (N={config.n_sites})")
    t_bad = float(series.t[bad[0]])
    return GuardReport(
        False, t_bad,
        f"warning: boundary power exceeds {GUARD_THRESHOLD:g} P(t) from t={t_bad:g} "
        f"(2 kappa t = {2 * series.params.kappa * t_bad:g}, N={config.n_sites})",
    )
