"""Numerical kernels: adaptive quadrature, principal values, Bessel J_n,
complex Newton root finding and power-law fitting.

All routines are pure functions of their arguments.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, QuadratureError, RootFindingError

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (non-negative half).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-node rule, ordered left to right.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:14:2] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: complex | float | np.ndarray
    error_estimate: float
    evaluations: int


def _panels(f, lo: np.ndarray, hi: np.ndarray):
    """Evaluate the G7/K15 pair on a batch of panels in one call of ``f``."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(f(x))
    fx = fx.reshape((lo.size, 15) + fx.shape[1:])
    kron = np.einsum("j,ij...->i...", _KW, fx)
    gauss = np.einsum("j,ij...->i...", _GW, fx)
    scale = half.reshape((-1,) + (1,) * (fx.ndim - 2))
    kron = kron * scale
    gauss = gauss * scale
    diff = np.abs(kron - gauss)
    err = diff.reshape(lo.size, -1).max(axis=1) if diff.ndim > 1 else diff
    if not np.all(np.isfinite(kron)):
        raise QuadratureError("integrand is not finite on the integration interval")
    return kron, err


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    points: Sequence[float] = (),
    limit: int = 4000,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over ``[a, b]``.

    ``f`` is called with a 1-D array of abscissae and must return an array
    whose leading axis matches it; trailing axes are integrated
    component-wise, which lets one call handle a whole family of
    integrands (e.g. many time points). Values may be complex.

    Panels are bisected worst-first until the summed error estimate is
    below ``max(tol, tol * |result|)``. ``points`` are interior
    breakpoints (singularities, peaks) that always start a new panel.

    Raises
    ------
    QuadratureError
        If the panel budget ``limit`` is exhausted first; the exception
        carries the partial value.
    """
    if not a < b:
        raise ValueError(f"integration interval must satisfy a < b, got [{a}, {b}]")
    edges = [a] + sorted(p for p in points if a < p < b) + [b]
    lo = np.array(edges[:-1], dtype=float)
    hi = np.array(edges[1:], dtype=float)
    vals, errs = _panels(f, lo, hi)
    evaluations = 15 * lo.size

    heap = []
    total = vals.sum(axis=0)
    eps = np.finfo(float).eps
    for i in range(lo.size):
        heapq.heappush(heap, (-errs[i], i, lo[i], hi[i]))
    store = {i: vals[i] for i in range(lo.size)}
    counter = lo.size
    total_err = float(errs.sum())

    def _norm(v):
        return float(np.max(np.abs(v)))

    while total_err > max(tol, tol * _norm(total)):
        if not heap:
            break
        if len(store) >= limit:
            raise QuadratureError(
                f"quadrature did not converge within {limit} panels "
                f"(error estimate {total_err:.3e})",
                value=total,
                error_estimate=total_err,
            )
        negerr, key, x0, x1 = heapq.heappop(heap)
        if x1 - x0 < 64 * eps * max(abs(x0), abs(x1)) or x1 - x0 < 1e-290:
            # cannot refine further; its error stays in the total
            continue
        xm = 0.5 * (x0 + x1)
        v2, e2 = _panels(f, np.array([x0, xm]), np.array([xm, x1]))
        evaluations += 30
        total = total - store.pop(key) + v2[0] + v2[1]
        total_err += float(e2.sum()) + negerr
        for j, (p, q) in enumerate(((x0, xm), (xm, x1))):
            store[counter] = v2[j]
            heapq.heappush(heap, (-e2[j], counter, p, q))
            counter += 1
    # recompute the sum from the panel store to shed accumulated roundoff
    total = sum(store.values()) if store else total
    total_err = max(total_err, 0.0)
    value = total
    if np.ndim(value) == 0:
        value = complex(value) if np.iscomplexobj(value) else float(value)
    return QuadratureResult(value, float(total_err), evaluations)


def principal_value(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    x0: float,
    tol: float = 1e-10,
) -> float:
    """Cauchy principal value of the integral of ``f(w) / (x0 - w)`` over ``[a, b]``.

    Uses singularity subtraction: the smooth remainder
    ``[f(w) - f(x0)] / (x0 - w)`` is integrated normally and the pole part
    is added back analytically as ``f(x0) * ln|(x0 - a) / (b - x0)|``.
    """
    if not a < x0 < b:
        raise ValueError(f"x0={x0} must lie strictly inside ({a}, {b}); use integrate()")
    f0 = float(np.asarray(f(np.array([x0])))[0])
    if not math.isfinite(f0):
        raise NumericalError(f"integrand is not finite at the pole x0={x0}")

    def remainder(w):
        d = x0 - w
        return (np.asarray(f(w)) - f0) / d

    res = integrate(remainder, a, b, tol, points=(x0,))
    return float(np.real(res.value)) + f0 * math.log((x0 - a) / (b - x0))


# ---------------------------------------------------------------------------
# Bessel functions of the first kind
# ---------------------------------------------------------------------------

_SERIES_MAX = 8.0
_HANKEL_MIN = 25.0


def _bessel_series(n: int, x: float) -> float:
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > 2:
            return total
        if k > 200:
            return total


def _bessel_miller(n: int, x: float) -> float:
    # backward recurrence normalised by J0 + 2*sum(J_2k) = 1
    m = 2 * int((max(n, x) + 30 + 3 * math.sqrt(max(n, x))) / 2) + 2
    jp1, j = 0.0, 1e-30
    norm = 0.0
    want = 0.0
    for k in range(m, 0, -1):
        jm1 = (2.0 * k / x) * j - jp1
        jp1, j = j, jm1
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            want *= 1e-250
            norm *= 1e-250
        if k - 1 == n:
            want = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
    norm += j
    return want / norm


def _bessel_hankel(n: int, x: float) -> float:
    mu = 4.0 * n * n
    p = 0.0
    q = 0.0
    term = 1.0
    k = 0
    prev = math.inf
    while True:
        # term = a_k(n) / x^k
        mag = abs(term)
        if mag > prev or mag < 1e-18:
            break
        if k % 4 == 0:
            p += term
        elif k % 4 == 1:
            q += term
        elif k % 4 == 2:
            p -= term
        else:
            q -= term
        prev = mag
        k += 1
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
    chi = x - (0.5 * n + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _bessel_scalar(n: int, x: float) -> float:
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x < _SERIES_MAX:
        return _bessel_series(n, x)
    if x >= _HANKEL_MIN and x >= 2 * n * n:
        return _bessel_hankel(n, x)
    return _bessel_miller(n, x)


def bessel_j(n: int, x):
    """Bessel function of the first kind J_n(x) for integer n >= 0, x >= 0.

    Power series below x = 8, Miller backward recurrence up to x = 25 and
    the Hankel asymptotic expansion beyond. Accepts scalars or arrays.
    """
    if n < 0 or int(n) != n:
        raise ValueError("order n must be a non-negative integer")
    n = int(n)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("bessel_j requires x >= 0")
    if xa.ndim == 0:
        return _bessel_scalar(n, float(xa))
    out = np.empty_like(xa)
    for idx, xv in np.ndenumerate(xa):
        out[idx] = _bessel_scalar(n, float(xv))
    return out


# ---------------------------------------------------------------------------
# Root finding and fitting
# ---------------------------------------------------------------------------


def find_root_complex(
    F: Callable[[complex], complex],
    s0: complex,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> complex:
    """Damped Newton iteration for an analytic ``F`` near ``s0``.

    The derivative is a central difference. Each Newton step is halved
    until ``|F|`` decreases. Returns ``s`` with ``|F(s)| <= tol``.
    """
    s = complex(s0)
    fs = complex(F(s))
    for _ in range(max_iter):
        if not (math.isfinite(fs.real) and math.isfinite(fs.imag)):
            break
        if abs(fs) <= tol:
            return s
        h = 1e-6 * max(1.0, abs(s))
        d = (complex(F(s + h)) - complex(F(s - h))) / (2 * h)
        if d == 0 or not math.isfinite(abs(d)):
            break
        step = -fs / d
        lam = 1.0
        for _halving in range(40):
            trial = s + lam * step
            ft = complex(F(trial))
            if math.isfinite(abs(ft)) and abs(ft) < abs(fs):
                break
            lam *= 0.5
        else:
            break
        s, fs = trial, ft
    if abs(fs) <= tol:
        return s
    raise RootFindingError(
        f"Newton iteration did not converge from s0={s0}: last iterate {s}, |F|={abs(fs):.3e}",
        last=s,
        residual=abs(fs),
    )


def fit_power_law(t, y) -> float:
    """Least-squares slope of log(y) against log(t)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if t.size < 10:
        raise ValueError(f"need at least 10 samples, got {t.size}")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("t must be positive and strictly increasing")
    if np.any(~(y > 0)):
        raise NumericalError("power-law fit needs strictly positive samples")
    slope, _ = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope)


def envelope_peaks(t, y):
    """Local maxima of ``y`` by three-point detection.

    Each peak is refined by the parabola through its three samples.
    Returns ``(t_peak, y_peak)`` arrays.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        return np.empty(0), np.empty(0)
    left, mid, right = y[:-2], y[1:-1], y[2:]
    idx = np.nonzero((mid > left) & (mid >= right))[0] + 1
    tp = np.empty(idx.size)
    yp = np.empty(idx.size)
    for j, i in enumerate(idx):
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        h = t[i + 1] - t[i]
        if denom < 0:
            off = 0.5 * (y0 - y2) / denom
            tp[j] = t[i] + off * h
            yp[j] = y1 - 0.25 * (y0 - y2) * off
        else:
            tp[j], yp[j] = t[i], y1
    return tp, yp


def fit_exponential_rate(t, y) -> float:
    """Least-squares slope of log|y| against t (the exponential rate)."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y))
    if t.shape != y.shape or t.ndim != 1 or t.size < 3:
        raise ValueError("t and y must be 1-D arrays of equal length >= 3")
    if np.any(~(y > 0)):
        raise NumericalError("exponential fit needs non-zero samples")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)
