"""Command-line front end.

Subcommands::

    nmcavity figure <name>   reproduce a figure preset as CSV data
    nmcavity run <config>    run a scenario described by a config file
    nmcavity sweep <config>  run a scenario once per value of a swept key
    nmcavity check           quick invariant checks with pass/fail lines

Config files are flat ``key = value`` text; ``#`` starts a comment and
unknown keys are rejected. Exit codes: 0 success, 2 config error,
3 regime or precondition error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .crow import CrowParams, crow_self_energy, crow_spectrum, no_bound_mode_region
from .errors import ConfigError, NmcavityError
from .scenarios import KINDS, PRESETS, Scenario, Variant, preset, run_scenario, with_overrides, write_summary

log = logging.getLogger("nmcavity")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _complex(s):
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError("expected 're,im'")
    return complex(float(parts[0]), float(parts[1]))


def _range(s):
    lo, hi, n = [p.strip() for p in s.split(",")]
    n = int(n)
    if n < 1:
        raise ValueError("range count must be >= 1")
    return tuple(np.round(np.linspace(float(lo), float(hi), n), 12))


SCHEMA = {
    "name": str,
    "kind": str,
    "kappa": _float,
    "kappa0": _float,
    "r2": _float,
    "omega_a": _float,
    "detuning": _float,
    "gamma_loss": _float,
    "loss": str,
    "gamma_i": _float,
    "g": _floats,
    "g_over_2kappa": _floats,
    "g_over_2kappa_range": _range,
    "tmax": _float,
    "dt": _float,
    "sites": _int,
    "stride": _int,
    "boundary_guard": _bool,
    "seed_pole": _complex,
    "detunings": _floats,
    "r2_points": _int,
    "sweep": str,
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed values (strict schema)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; allowed keys: "
                              + ", ".join(sorted(SCHEMA)))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key == "sweep":
            out[key] = value
            continue
        try:
            out[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    cfg = parse_config_text(text, path)
    cfg.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return cfg


def _exclusive(cfg, a, b):
    if a in cfg and b in cfg:
        raise ConfigError(f"keys {a!r} and {b!r} are mutually exclusive")


def scenario_from_config(cfg: dict) -> Scenario:
    """Build a :class:`Scenario` from a parsed config dictionary."""
    if "kind" not in cfg:
        raise ConfigError("missing required key 'kind'")
    kind = cfg["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    _exclusive(cfg, "kappa0", "r2")
    _exclusive(cfg, "omega_a", "detuning")
    for a, b in (("g", "g_over_2kappa"), ("g", "g_over_2kappa_range"),
                 ("g_over_2kappa", "g_over_2kappa_range")):
        _exclusive(cfg, a, b)
    kappa = cfg.get("kappa", 1.0)
    try:
        kappa0 = kappa * math.sqrt(cfg["r2"]) if "r2" in cfg else cfg.get("kappa0", 0.5)
        omega_a = 2 * kappa * cfg["detuning"] if "detuning" in cfg else cfg.get("omega_a", 0.0)
        params = CrowParams(kappa=kappa, kappa0=kappa0, omega_a=omega_a,
                            gamma_loss=cfg.get("gamma_loss", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "g" in cfg:
        gains = cfg["g"]
    elif "g_over_2kappa" in cfg:
        gains = tuple(2 * kappa * x for x in cfg["g_over_2kappa"])
    elif "g_over_2kappa_range" in cfg:
        gains = tuple(2 * kappa * x for x in cfg["g_over_2kappa_range"])
    else:
        gains = (0.0,)
    if any(g < 0 for g in gains):
        raise ConfigError("gain values must be non-negative")
    loss = cfg.get("loss", "crow")
    if loss not in ("crow", "global"):
        raise ConfigError("loss must be 'crow' or 'global'")
    if kind == "growth_rate_track":
        variants = (Variant("sigma", params),)
        g_grid = gains
    else:
        variants = tuple(Variant(f"g{x / (2 * kappa):.12g}", params, x) for x in gains)
        g_grid = ()
    if kind in ("decay", "threshold_sweep", "regime_report"):
        variants = (Variant("main", params, gains[0]),)
    try:
        sc = Scenario(
            name=cfg["name"], kind=kind, variants=variants, gamma_i=cfg.get("gamma_i", 0.0),
            loss=loss, tmax=cfg.get("tmax", 40.0), dt=cfg.get("dt", 0.02),
            n_sites=cfg.get("sites"), stride=cfg.get("stride", 1),
            boundary_guard=cfg.get("boundary_guard", True), g_grid=g_grid,
            detunings=cfg.get("detunings", (params.detuning,)),
            r2_points=cfg.get("r2_points", 201), seed_pole=cfg.get("seed_pole"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _validate(sc)
    return sc


def _validate(sc: Scenario):
    if not sc.dt > 0:
        raise ConfigError("dt must be positive")
    if not sc.tmax >= 0:
        raise ConfigError("tmax must be non-negative")
    if sc.stride < 1:
        raise ConfigError("stride must be >= 1")
    if sc.n_sites is not None and sc.n_sites < 8:
        raise ConfigError("sites must be at least 8")
    if sc.r2_points < 2:
        raise ConfigError("r2_points must be at least 2")
    if sc.gamma_i < 0:
        raise ConfigError("gamma_i must be non-negative")


def parse_sweep(spec: str):
    """``"key: v1, v2, ..."`` -> (key, [raw values])."""
    if ":" not in spec:
        raise ConfigError("sweep must look like 'key: v1, v2, ...'")
    key, vals = (x.strip() for x in spec.split(":", 1))
    if key not in SCHEMA or key in ("name", "kind", "sweep"):
        raise ConfigError(f"cannot sweep key {key!r}")
    values = [v.strip() for v in vals.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep has no values")
    return key, values


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _overrides(args) -> dict:
    seed = None
    if args.seed_pole is not None:
        try:
            seed = _complex(args.seed_pole)
        except ValueError as exc:
            raise ConfigError(f"--seed-pole: {exc}") from None
    return dict(dt=args.dt, n_sites=args.sites, tmax=args.tmax, seed_pole=seed,
                boundary_guard=False if args.no_boundary_guard else None)


def _report(summary: dict, out=None):
    out = out or sys.stdout
    print(f"scenario {summary['scenario']} ({summary['kind']})", file=out)
    for f in summary.get("files", []):
        print(f"  wrote {f}", file=out)
    for label, info in sorted(summary.get("panels", {}).items()):
        bits = [f"regime={info.get('regime')}"]
        g = info.get("boundary_guard")
        if g:
            bits.append("guard=" + ("pass" if g["ok"] else "WARN"))
        if info.get("overflow"):
            bits.append("overflow")
        print(f"  [{label}] " + " ".join(bits), file=out)
        if g and not g["ok"]:
            print(f"    {g['message']}", file=out)


def cmd_figure(args) -> int:
    sc = with_overrides(preset(args.name), **_overrides(args))
    summary = run_scenario(sc, args.out)
    _report(summary)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if "sweep" in cfg:
        raise ConfigError("config contains 'sweep'; use the sweep subcommand")
    sc = with_overrides(scenario_from_config(cfg), **_overrides(args))
    _validate(sc)
    summary = run_scenario(sc, args.out)
    _report(summary)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if "sweep" not in cfg:
        raise ConfigError("sweep config needs a 'sweep = key: v1, v2, ...' line")
    key, values = parse_sweep(cfg.pop("sweep"))
    base = cfg["name"]
    runs = {}
    for raw in values:
        point = dict(cfg)
        try:
            point[key] = SCHEMA[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad sweep value {raw!r} for {key!r}: {exc}") from None
        point["name"] = f"{base}_{key}{raw}"
        sc = with_overrides(scenario_from_config(point), **_overrides(args))
        _validate(sc)
        summary = run_scenario(sc, args.out)
        _report(summary)
        runs[raw] = summary
    write_summary(os.path.join(args.out, f"{base}_sweep.json"),
                  {"sweep_key": key, "values": values, "runs": runs})
    return 0


def _checks():
    """Quick invariant checks: (label, passed, detail) triples."""
    from .lattice_sim import SimConfig, evolve
    from .numerics import bessel_j
    from .reservoir import bound_modes, self_energy
    from .lasing import threshold_crow, threshold_generic
    from .spectral import decay_integral

    out = []
    p = CrowParams(kappa=1.0, kappa0=1.0)
    s = evolve(p, 0.0, SimConfig(n_sites=200, t_max=20.0))
    err = float(np.max(np.abs(s.c_a - bessel_j(0, 2 * s.t))))
    out.append(("lattice vs J0(2 kappa t), 2 kappa t <= 40", err < 1e-3, f"max error {err:.2e}"))
    fine = evolve(p, 0.0, SimConfig(n_sites=200, t_max=20.0, dt=0.01))
    drift = float(np.max(np.abs(fine.total_power - 1)))
    out.append(("lossless power conservation (dt = 0.01)", drift < 1e-8, f"max |P-1| {drift:.2e}"))
    spec = crow_spectrum(CrowParams(kappa=1.0, kappa0=0.6, omega_a=0.3))
    c = decay_integral(spec, 0.3, s.t[::50])
    sim = evolve(CrowParams(kappa=1.0, kappa0=0.6, omega_a=0.3), 0.0, SimConfig(200, 20.0))
    dev = float(np.max(np.abs(c - sim.c_a[::50])))
    out.append(("spectral route vs lattice", dev < 2e-3, f"max deviation {dev:.2e}"))
    rng = np.random.default_rng(0)
    worst = 0.0
    for w in rng.uniform(-1.99, 1.99, 20):
        jump = self_energy(spec, -1j * w, side=1, method="quadrature") - \
            self_energy(spec, -1j * w, side=-1, method="quadrature")
        worst = max(worst, abs(jump + 2j * math.pi * spec.D(w)))
    out.append(("cut discontinuity = -2 pi i D", worst < 1e-8, f"max error {worst:.2e}"))
    mismatches = 0
    for x in np.linspace(-1.2, 1.2, 9):
        for r in np.linspace(0, 1.3, 9):
            q = CrowParams(kappa=1.0, kappa0=r, omega_a=2 * x)
            mismatches += (not bound_modes(crow_spectrum(q), q.omega_a)) != no_bound_mode_region(q)
    out.append(("bound-mode phase boundary", mismatches == 0, f"{mismatches} mismatches"))
    q = CrowParams.normalized(0.8, 0.18)
    a = threshold_crow(q).g_th
    b = threshold_generic(crow_spectrum(q), q.omega_a).g_th
    out.append(("threshold closed form vs fixed point", abs(a - b) < 1e-8,
                f"g_th/2kappa {a / 2:.6f}, difference {abs(a - b):.1e}"))
    sig = crow_self_energy(CrowParams(kappa=1.0, kappa0=1.0), 0j, side=1)
    out.append(("Sigma(0+0) = -2i kappa", abs(sig + 2j) < 1e-12, f"{sig}"))
    return out


def cmd_check(args) -> int:
    ok = True
    for label, passed, detail in _checks():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    return 0 if ok else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmcavity",
        description="Decay and lasing threshold of a microcavity coupled to a structured continuum.",
    )
    parser.add_argument("--version", action="version", version=f"nmcavity {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--dt", type=float, help="time step in units of 1/kappa")
    common.add_argument("--sites", type=int, help="lattice sites per side")
    common.add_argument("--tmax", type=float, help="final normalised time 2 kappa t")
    common.add_argument("--seed-pole", metavar="RE,IM", help="starting guess for pole searches")
    common.add_argument("--no-boundary-guard", action="store_true",
                        help="allow runs beyond the truncation validity horizon")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("figure", parents=[common], help="reproduce a figure preset")
    p.add_argument("name", choices=sorted(PRESETS))
    p.set_defaults(func=cmd_figure)
    p = sub.add_parser("run", parents=[common], help="run a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="run a config once per swept value")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("check", help="run quick invariant checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NmcavityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
