"""Independent oracles shared by the test modules."""

import math

import numpy as np
import pytest

from nmcavity.reservoir import self_energy


def crow_poles_exact(kappa, kappa0, omega_a, g_prime):
    """All zeros of ``i s - omega_a - i g' - Sigma(s)`` for the CROW, by algebra.

    With ``s = kappa (u - 1/u)`` the root ``sqrt(s^2 + 4 kappa^2)`` becomes
    ``kappa (u + 1/u)`` and the continued self-energy is
    ``-2 i kappa r^2 / u``. The pole condition reduces to
    ``i kappa u^2 - (omega_a + i g') u + i kappa (2 r^2 - 1) = 0``.
    Returns ``(s, |u|)`` pairs; ``|u| > 1`` is the first sheet.
    """
    r2 = (kappa0 / kappa) ** 2
    us = np.roots([1j * kappa, -(omega_a + 1j * g_prime), 1j * kappa * (2 * r2 - 1)])
    out = []
    for u in us:
        s = kappa * (u - 1 / u)
        # the u-parametrisation covers the continued function exactly when
        # Re(s) and |u|-1 share their sign (right half <-> outside unit circle)
        if abs(u) == 1:
            continue
        if (s.real >= 0) == (abs(u) > 1):
            out.append((complex(s), abs(u)))
    return out


def cut_limit(spec, w, side, n=4):
    """Boundary value ``Sigma(-i w + side 0)`` from off-axis quadrature.

    Evaluates ``Sigma(-i w + side eps / 2^k)`` and Richardson-extrapolates
    to ``eps -> 0`` removing the first ``n - 1`` powers of ``eps``.
    """
    dist = min(w - spec.omega1, spec.omega2 - w)
    eps = min(2e-3, 0.01 * dist)
    v = [self_energy(spec, side * eps / 2**k - 1j * w, method="quadrature") for k in range(n)]
    for order in range(1, n):
        f = 2**order
        v = [(f * v[i + 1] - v[i]) / (f - 1) for i in range(len(v) - 1)]
    return v[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def closed_threshold(r2, x):
    """Normalised threshold ``r2 sqrt(1 - (x/(1-r2))^2)`` written out independently."""
    return r2 * math.sqrt(1 - (x / (1 - r2)) ** 2)


#: one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
