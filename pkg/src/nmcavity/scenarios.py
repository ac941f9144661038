"""Scenario definitions, figure presets and their runners.

A :class:`Scenario` fully determines its output: parameters, time grid,
lattice size and gain values. Runners write CSV tables and return a
summary dictionary; :func:`run_scenario` also writes the summary as JSON.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .crow import CrowParams, critical_coupling, crow_spectrum, no_bound_mode_region
from .errors import RegimeError, RootFindingError
from .lasing import (
    BELOW,
    RESONANT,
    classify_regime,
    growth_rate,
    growth_rate_track,
    lossy_envelope,
    oscillation_parameters,
    threshold_crow,
    threshold_generic,
    threshold_sweep,
)
from .lattice_sim import (
    SimConfig,
    boundary_guard,
    default_sites,
    evolve,
    power_balance_residual,
)
from .numerics import envelope_peaks, fit_exponential_rate
from .reservoir import bound_modes, critical_couplings, markov_rates, memory_time
from .spectral import decay_integral, resonance_pole

KINDS = ("decay", "gain_dynamics", "threshold_sweep", "growth_rate_track", "regime_report")
#: gamma_R * memory time below this counts as Markovian
MARKOV_RATIO = 0.2


@dataclass(frozen=True)
class Variant:
    """One panel of a scenario: parameters plus gain (in units of kappa)."""

    label: str
    params: CrowParams
    g: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """A deterministic run description.

    ``tmax`` is in the dimensionless time ``2 kappa t``; ``dt`` is in units
    of ``1/kappa``. ``g_grid`` (units of kappa) feeds growth-rate tracks and
    ``detunings`` feeds threshold sweeps.
    """

    name: str
    kind: str
    variants: tuple = ()
    gamma_i: float = 0.0
    loss: str = "crow"
    tmax: float = 40.0
    dt: float = 0.02
    n_sites: Optional[int] = None
    stride: int = 1
    boundary_guard: bool = True
    abs_only: bool = False
    g_grid: tuple = ()
    detunings: tuple = ()
    r2_points: int = 201
    seed_pole: Optional[complex] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown run kind {self.kind!r}; expected one of {', '.join(KINDS)}")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return "%.12g" % v


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns: dict, meta: dict) -> str:
    """Write ``columns`` (name -> 1-D array) after a parameter comment line."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    lines = [f"# nmcavity {__version__} | " + " ".join(f"{k}={_meta_str(v)}"
                                                       for k, v in meta.items())]
    lines.append(",".join(names))
    for row in zip(*data):
        lines.append(",".join(_fmt(float(x)) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _meta_str(v) -> str:
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, complex):
        return f"{_fmt(v.real)},{_fmt(v.imag)}"
    return str(v).replace(" ", "")


def _clean(obj):
    """Make a summary JSON-safe: nan/inf become None, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(float(obj.real)), "im": _clean(float(obj.imag))}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(path: str, summary: dict) -> str:
    _atomic_write(path, json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# per-kind runners
# ---------------------------------------------------------------------------


def _meta(sc: Scenario, v: Optional[Variant] = None) -> dict:
    m = {"scenario": sc.name, "kind": sc.kind}
    if v is not None:
        p = v.params
        m.update(kappa=p.kappa, kappa0=p.kappa0, r2=p.r2, omega_a=p.omega_a,
                 detuning=p.detuning, gamma_loss=p.gamma_loss, g=v.g,
                 g_over_2kappa=v.g / (2 * p.kappa))
    if sc.kind in ("decay", "gain_dynamics"):
        m.update(gamma_i=sc.gamma_i, loss=sc.loss, tmax=sc.tmax, dt=sc.dt, stride=sc.stride)
    return m


def _regime_info(p: CrowParams) -> dict:
    info = {"r": p.ratio, "r2": p.r2, "no_bound_mode_region": no_bound_mode_region(p)}
    try:
        rc = critical_coupling(p)
        info["r_crit"] = rc
        info["distance_to_critical"] = rc - p.ratio
    except RegimeError:
        info["r_crit"] = None
        info["distance_to_critical"] = None
    try:
        info["regime"] = classify_regime(p)
    except RegimeError as exc:
        info["regime"] = exc.regime or "out_of_scope"
        info["regime_message"] = str(exc)
    return info


def _pole_info(pole) -> Optional[dict]:
    if pole is None:
        return None
    return {"s_p": pole.s_p, "sheet": pole.sheet, "gamma_p": pole.gamma_p,
            "delta_p": pole.delta_p, "residue": pole.residue, "residual": pole.residual}


def _simulate(sc: Scenario, v: Variant):
    p = v.params
    t_max = sc.tmax / (2 * p.kappa)
    n = sc.n_sites or default_sites(p.kappa, t_max)
    cfg = SimConfig(n_sites=n, t_max=t_max, dt=sc.dt, record_stride=sc.stride,
                    boundary_guard=sc.boundary_guard)
    return evolve(p, v.g, cfg, gamma_i=sc.gamma_i, loss=sc.loss)


def _sim_diagnostics(series) -> dict:
    guard = boundary_guard(series)
    out = {
        "n_sites": series.config.n_sites,
        "dt": series.config.dt,
        "samples": int(series.t.size),
        "overflow": series.overflow,
        "boundary_guard": {"ok": guard.ok, "message": guard.message,
                           "first_violation_tprime": None if guard.first_violation is None
                           else 2 * series.params.kappa * guard.first_violation},
        "max_abs_c_a": float(np.max(np.abs(series.c_a))),
        "final_abs_c_a": float(abs(series.c_a[-1])),
    }
    if series.t.size >= 3:
        out["power_balance_residual"] = power_balance_residual(series)
    return out


def _series_columns(sc: Scenario, series) -> dict:
    cols = {"t_prime": series.t_prime, "abs_c_a": np.abs(series.c_a)}
    if not sc.abs_only:
        cols["re_c_a"] = series.c_a.real
        cols["im_c_a"] = series.c_a.imag
    return cols


def _late_rate(series, fraction: float = 1 / 3) -> Optional[float]:
    n = series.t.size
    lo = int(n * (1 - fraction))
    t, c = series.t[lo:], np.abs(series.c_a[lo:])
    tp, cp = envelope_peaks(t, c)
    if tp.size >= 4:
        t, c = tp, cp
    if t.size < 3 or np.any(c == 0):
        return None
    return fit_exponential_rate(t, c)


def _run_decay(sc: Scenario, out_dir: str, files: list) -> dict:
    panels = {}
    for v in sc.variants:
        p = v.params
        spec = crow_spectrum(p)
        series = _simulate(sc, v)
        files.append(write_csv(os.path.join(out_dir, f"{sc.name}_{v.label}.csv"),
                               _series_columns(sc, series), _meta(sc, v)))
        info = _regime_info(p)
        info.update(_sim_diagnostics(series))
        rates = markov_rates(spec, p.omega_a)
        tau_m = memory_time(spec, p.omega_a)
        info["markov"] = {"gamma_R": rates.gamma_R, "delta_R": rates.delta_R,
                          "memory_time": tau_m, "gamma_R_times_memory_time": rates.gamma_R * tau_m}
        info["markov_note"] = ("Markovian regime" if rates.gamma_R * tau_m < MARKOV_RATIO
                               else "non-Markovian regime")
        rate = _late_rate(series, 0.5)
        info["fitted_decay_rate"] = None if rate is None else -rate
        try:
            pole = resonance_pole(spec, p.omega_a, v.g - sc.gamma_i, sc.seed_pole)
        except RootFindingError:
            pole = None
        info["pole"] = _pole_info(pole)
        passive = v.g == 0 and sc.gamma_i == 0 and p.gamma_loss == 0
        if passive and not bound_modes(spec, p.omega_a):
            step = max(1, series.t.size // 2000)
            ts = series.t[::step]
            ref = decay_integral(spec, p.omega_a, ts, check_bound_modes=False)
            info["route_agreement"] = {"max_abs_deviation": float(np.max(np.abs(ref - series.c_a[::step]))),
                                       "samples": int(ts.size)}
        else:
            info["route_agreement"] = None
        panels[v.label] = info
    return {"panels": panels}


def _run_gain(sc: Scenario, out_dir: str, files: list) -> dict:
    panels = {}
    for v in sc.variants:
        p = v.params
        series = _simulate(sc, v)
        files.append(write_csv(os.path.join(out_dir, f"{sc.name}_{v.label}.csv"),
                               _series_columns(sc, series), _meta(sc, v)))
        info = _regime_info(p)
        info.update(_sim_diagnostics(series))
        info["g"] = v.g
        info["g_over_2kappa"] = v.g / (2 * p.kappa)
        info["fitted_late_rate"] = _late_rate(series)
        regime = info["regime"]
        if regime == BELOW:
            th = threshold_crow(p, sc.gamma_i)
            info["threshold"] = {"g_th": th.g_th, "omega_osc": th.omega_osc,
                                 "g_over_g_th": v.g / th.g_th if th.g_th else None}
        if regime in (BELOW, "critical_detuned") and v.g > 0:
            try:
                info["sigma_pole"] = growth_rate(p, v.g, sc.gamma_i, sc.loss, sc.seed_pole)
            except RootFindingError:
                info["sigma_pole"] = None
        if regime == RESONANT and 0 < v.g - sc.gamma_i < 2 * p.kappa:
            amp, freq = oscillation_parameters(p.kappa, v.g - sc.gamma_i)
            info["neutral_oscillation"] = {"amplitude": amp, "angular_frequency": freq}
        if regime == RESONANT and p.gamma_loss > 0 and math.isclose(v.g, 2 * p.kappa):
            env = lossy_envelope(p.kappa, p.gamma_loss, series.t)
            info["lossy_envelope"] = {"predicted_peak": env.peak,
                                      "predicted_peak_tprime": 2 * p.kappa * env.t_peak,
                                      "order_of_magnitude": env.order_of_magnitude}
        panels[v.label] = info
    return {"panels": panels}


def _run_threshold_sweep(sc: Scenario, out_dir: str, files: list) -> dict:
    curves = {}
    for x in sc.detunings:
        crit = 1.0 - abs(x)
        grid = np.linspace(0.0, crit, sc.r2_points)
        curve = threshold_sweep(x, grid)
        label = f"x{_fmt(x)}"
        files.append(write_csv(os.path.join(out_dir, f"{sc.name}_{label}.csv"),
                               {"r2": curve.r2, "g_th_over_2kappa": curve.g_th},
                               {"scenario": sc.name, "kind": sc.kind, "detuning": x,
                                "r2_points": sc.r2_points}))
        curves[label] = {"detuning": x, "critical_r2": crit, "peak_r2": curve.peak_r2,
                         "peak_g_th_over_2kappa": curve.peak_g_th,
                         "end_value": float(curve.g_th[-1])}
    out = {"curves": curves}
    for v in sc.variants:
        p = v.params
        info = _regime_info(p)
        if info["regime"] == BELOW:
            th = threshold_crow(p, sc.gamma_i)
            gen = threshold_generic(crow_spectrum(p), p.omega_a, sc.gamma_i)
            info.update(g_th=th.g_th, g_th_over_2kappa=th.g_th / (2 * p.kappa),
                        omega_osc=th.omega_osc, omega_osc_over_2kappa=th.omega_osc / (2 * p.kappa),
                        fixed_point_g_th=gen.g_th,
                        closed_vs_fixed_point=abs(gen.g_th - th.g_th))
        out.setdefault("points", {})[v.label] = info
    return out


def _run_track(sc: Scenario, out_dir: str, files: list) -> dict:
    panels = {}
    for v in sc.variants:
        p = v.params
        g = np.asarray(sc.g_grid, dtype=float)
        sigma, poles = growth_rate_track(p, g, sc.gamma_i, sc.loss, sc.seed_pole)
        k2 = 2 * p.kappa
        files.append(write_csv(os.path.join(out_dir, f"{sc.name}_{v.label}.csv"),
                               {"g_over_2kappa": g / k2, "sigma_over_2kappa": sigma / k2},
                               _meta(sc, v)))
        info = _regime_info(p)
        ok = np.isfinite(sigma)
        info["unresolved_points"] = int(np.count_nonzero(~ok))
        info["min_sigma"] = float(np.min(sigma[ok])) if ok.any() else None
        info["max_sigma"] = float(np.max(sigma[ok])) if ok.any() else None
        s_ok = sigma[ok]
        info["sign_changes"] = int(np.count_nonzero(np.diff(np.sign(s_ok)) != 0))
        if info["regime"] == BELOW:
            info["g_th"] = threshold_crow(p, sc.gamma_i).g_th
        panels[v.label] = info
    return {"panels": panels}


def _run_regime(sc: Scenario, out_dir: str, files: list) -> dict:
    panels = {}
    for v in sc.variants:
        p = v.params
        spec = crow_spectrum(p)
        info = _regime_info(p)
        info["bound_modes"] = bound_modes(spec, p.omega_a)
        if abs(p.omega_a) < 2 * p.kappa:
            rates = markov_rates(spec, p.omega_a)
            info["markov"] = {"gamma_R": rates.gamma_R, "delta_R": rates.delta_R,
                              "threshold": sc.gamma_i + rates.gamma_R,
                              "memory_time": memory_time(spec, p.omega_a)}
            lam = critical_couplings(spec, p.omega_a)
            info["critical_couplings"] = {"lower_edge": lam[0], "upper_edge": lam[1]}
        if info["regime"] == BELOW:
            th = threshold_crow(p, sc.gamma_i)
            info["threshold"] = {"g_th": th.g_th, "omega_osc": th.omega_osc}
            try:
                info["pole"] = _pole_info(resonance_pole(spec, p.omega_a, -sc.gamma_i, sc.seed_pole))
            except RootFindingError:
                info["pole"] = None
        elif info["regime"] == RESONANT:
            info["neutral_interval"] = [sc.gamma_i, sc.gamma_i + 2 * p.kappa]
        panels[v.label] = info
    return {"panels": panels}


_RUNNERS = {
    "decay": _run_decay,
    "gain_dynamics": _run_gain,
    "threshold_sweep": _run_threshold_sweep,
    "growth_rate_track": _run_track,
    "regime_report": _run_regime,
}


def run_scenario(sc: Scenario, out_dir: str, write: bool = True) -> dict:
    """Execute ``sc``, write its CSV files and JSON summary into ``out_dir``."""
    files: list = []
    body = _RUNNERS[sc.kind](sc, out_dir, files)
    summary = {"scenario": sc.name, "kind": sc.kind, "version": __version__,
               "settings": {"tmax": sc.tmax, "dt": sc.dt, "n_sites": sc.n_sites,
                            "stride": sc.stride, "boundary_guard": sc.boundary_guard,
                            "loss": sc.loss, "gamma_i": sc.gamma_i},
               **body}
    if write:
        path = os.path.join(out_dir, f"{sc.name}_summary.json")
        write_summary(path, summary)
        files.append(path)
    summary["files"] = [os.path.basename(f) for f in files]
    return summary


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def _gain_variants(params: CrowParams, g_over_2k, labels=None) -> tuple:
    labels = labels or [f"g{_fmt(x)}" for x in g_over_2k]
    return tuple(Variant(lab, params, 2 * params.kappa * x) for lab, x in zip(labels, g_over_2k))


def _presets() -> dict:
    fig8 = CrowParams.normalized(0.8, 0.18)
    fig9 = CrowParams.normalized(0.8, 0.2)
    fig11 = CrowParams(kappa=1.0, kappa0=1.0)
    fig12 = CrowParams(kappa=1.0, kappa0=1.0, gamma_loss=0.01)
    g11 = (0.0, 0.2, 0.95, 1.0, 1.1)
    return {
        "fig6": Scenario(
            "fig6", "decay",
            tuple(Variant(lab, CrowParams(kappa=1.0, kappa0=r)) for lab, r in
                  (("a", 0.2), ("b", 0.707), ("c", 1.0))),
            tmax=40.0, n_sites=200, abs_only=True),
        "fig7": Scenario("fig7", "threshold_sweep", detunings=(0.0, 0.2, 0.5), r2_points=201),
        "fig8a": Scenario("fig8a", "gain_dynamics", _gain_variants(fig8, (0.30, 0.34871, 0.40)),
                          tmax=400.0, loss="global"),
        "fig8b": Scenario("fig8b", "growth_rate_track", (Variant("sigma", fig8),),
                          g_grid=tuple(2 * x for x in np.round(np.linspace(0.01, 0.6, 60), 10)),
                          loss="global"),
        "fig9a": Scenario("fig9a", "gain_dynamics", _gain_variants(fig9, (0.0, 0.05, 0.1)),
                          tmax=400.0, loss="global"),
        "fig9b": Scenario("fig9b", "growth_rate_track", (Variant("sigma", fig9),),
                          g_grid=tuple(2 * x for x in np.round(np.linspace(0.02, 0.5, 49), 10)),
                          loss="global"),
        "fig11": Scenario("fig11", "gain_dynamics",
                          _gain_variants(fig11, g11, ["a", "b", "c", "d", "e"]), tmax=60.0,
                          loss="global"),
        "fig12": Scenario("fig12", "gain_dynamics",
                          _gain_variants(fig12, g11, ["a", "b", "c", "d", "e"]), tmax=600.0,
                          loss="global"),
    }


PRESETS = _presets()


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown figure {name!r}; available: {', '.join(PRESETS)}") from None


def with_overrides(sc: Scenario, **kw) -> Scenario:
    """Copy of ``sc`` with the non-None keyword overrides applied."""
    return replace(sc, **{k: v for k, v in kw.items() if v is not None})


def scenario_dict(sc: Scenario) -> dict:
    return asdict(sc)
