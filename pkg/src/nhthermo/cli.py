"""Command-line front end: sweep orchestration, deterministic CSV outputs,
run manifests and the acceptance selftest.

Exit codes: 0 success, 1 computational failure (non-convergence and friends),
2 usage error. Every run writes run_manifest.json with the fully resolved
configuration; CSV bodies are bit-stable for a fixed configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, acceptance, engine, hatano_nelson as hn, thermo
from .dynamics import BathSpec, NonHermitianSystem, evolve, steady_state
from .errors import NhThermoError, UsageError
from .operators import HermitianOperator, gibbs_state

FMT = "%.12e"


def _fmt_row(values):
    return ",".join(FMT % v for v in values)


def parallel_map(fn, items, threads: int):
    """Map preserving input order; grid points run concurrently when asked.

    Results are always collected in grid order, so output files are identical
    whatever the completion order.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    import multiprocessing as mp

    with mp.get_context("fork").Pool(min(threads, len(items))) as pool:
        return pool.map(fn, items)


def _hn_row(task):
    L, J, T, g = task
    p = hn.HnParams(L=L, J=J, g=float(g), T=float(T))
    s = hn.build_spectra(p)
    return (L, J, T, g, s.mu, s.mu0, hn.condensate_fraction(s), hn.hn_information(p, s))


def _parse_grid(text: str, name: str):
    """min:max:count grid syntax."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise UsageError(f"{name}: expected min:max:count, got {text!r}") from exc
    if n < 1 or hi < lo:
        raise UsageError(f"{name}: bad grid {text!r}")
    return np.linspace(lo, hi, n)


def _positive(name, value):
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value}")
    return value


class OutputTracker:
    """Collects written files so a failed run leaves no partial outputs."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.files.append(p)
        return p

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink()
            except OSError:
                pass


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return float(obj)


def write_manifest(tracker: OutputTracker, config: dict, extra: dict, t0: float):
    payload = {
        "tool": "nhthermo",
        "version": __version__,
        "config": config,
        "wall_time_s": round(time.time() - t0, 3),
    }
    payload.update(extra)
    path = tracker.path("run_manifest.json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _two_level_system(gamma: float) -> NonHermitianSystem:
    return NonHermitianSystem(
        HermitianOperator(engine.SX), HermitianOperator(gamma * engine.SY)
    )


def _system_from_config(args, config: dict):
    """Either the two-level preset or explicit H/Gamma matrices from the
    config file."""
    if "H" in config or "Gamma" in config:
        H = np.asarray(config.get("H"), dtype=complex)
        G = np.asarray(config.get("Gamma", np.zeros_like(H)), dtype=complex)
        return NonHermitianSystem(HermitianOperator(H), HermitianOperator(G))
    return _two_level_system(args.gamma)


# ---------------------------------------------------------------------------
# subcommands


def cmd_engine_cycle(args, config, tracker):
    spec = engine.CycleSpec(
        T=_positive("T", args.T), gamma=args.gamma, kappa=_positive("kappa", args.kappa),
        ramp_time_1=args.ramp1, ramp_time_3=args.ramp3,
        samples_per_stage=args.samples,
    )
    rep = engine.run_cycle(spec)
    rep.ledger.to_csv(tracker.path("cycle_trace.csv"), stage_column=True)
    report = {
        "W_total": rep.W_total,
        "T_times_I_NH": spec.T * rep.I_NH_end_stage1,
        "I_NH_end_stage1": rep.I_NH_end_stage1,
        "E1": rep.E1,
        "closure_error": rep.closure_error,
        "monitor_peak": rep.monitor_peak,
        "stages": [
            {"label": s.label, "dU": s.dU, "Q": s.Q, "W_on": s.W_on, "dS": s.dS, "I_S": s.I_S}
            for s in rep.stages
        ],
    }
    return {"cycle_report": report}


def cmd_engine_sweep(args, config, tracker):
    if args.gamma_step <= 0:
        raise UsageError(f"gamma-step must be positive, got {args.gamma_step}")
    n = int(round((args.gamma_max - args.gamma_min) / args.gamma_step)) + 1
    gammas = args.gamma_min + args.gamma_step * np.arange(n)
    rows = engine.engine_sweep(
        _positive("T", args.T), gammas, kappa=_positive("kappa", args.kappa),
        ramp_time=args.ramp_time, samples_per_stage=args.samples,
    )
    path = tracker.path("engine_sweep.csv")
    with open(path, "w") as fh:
        fh.write("gamma,T,W_total,T_times_INH,closed_form\n")
        for row in rows:
            fh.write(_fmt_row(row) + "\n")
    return {"grid_points": len(rows)}


def cmd_evolve(args, config, tracker):
    sys_ = _system_from_config(args, config)
    bath = BathSpec(beta=1.0 / _positive("T", args.T), kappa=args.kappa)
    rng = np.random.default_rng(args.seed)
    if args.rho0 == "mixed":
        rho0 = np.eye(sys_.dim) / sys_.dim
    elif args.rho0 == "gibbs":
        rho0 = gibbs_state(sys_.h, bath.beta)
    else:
        X = rng.normal(size=(sys_.dim, sys_.dim)) + 1j * rng.normal(size=(sys_.dim, sys_.dim))
        rho0 = X @ X.conj().T
        rho0 /= np.trace(rho0).real
    traj = evolve(sys_, bath, rho0, _positive("t-final", args.t_final), samples=args.samples)
    traj.to_csv(tracker.path("trajectory.csv"))
    return {"final_generator_norm": float(traj.generator_norms[-1])}


def cmd_steady_state(args, config, tracker):
    sys_ = _system_from_config(args, config)
    bath = BathSpec(beta=1.0 / _positive("T", args.T), kappa=_positive("kappa", args.kappa))
    sigma, info = steady_state(sys_, bath, return_info=True)
    dec = thermo.thermal_decomposition(sys_, bath, sigma=sigma)
    path = tracker.path("steady_state.csv")
    d = sys_.dim
    cols = []
    for i in range(d):
        for j in range(d):
            cols += [f"sigma{i}{j}_re", f"sigma{i}{j}_im"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        flat = sigma.matrix.reshape(-1)
        fh.write(_fmt_row([x for v in flat for x in (v.real, v.imag)]) + "\n")
    return {
        "residual": info["residual"],
        "I_NH": thermo.nh_information(sigma.matrix, dec),
    }


def cmd_hn_sweep(args, config, tracker):
    T_grid = _parse_grid(args.T_grid, "T-grid")
    g_grid = _parse_grid(args.g_grid, "g-grid")
    L = int(args.L)
    if L < 2:
        raise UsageError(f"L must be at least 2, got {L}")
    J = _positive("J", args.J)
    tasks = [(L, J, float(T), float(g)) for T in T_grid for g in g_grid]
    rows = parallel_map(_hn_row, tasks, args.threads)
    path = tracker.path("hn_sweep.csv")
    with open(path, "w") as fh:
        fh.write("L,J,T,g,mu,mu0,phi0,I_NH\n")
        for row in rows:
            fh.write(_fmt_row(row) + "\n")
    return {"grid_points": len(rows)}


def cmd_hn_critical(args, config, tracker):
    T_grid = _parse_grid(args.T_grid, "T-grid")
    L = int(args.L)
    if L < 2:
        raise UsageError(f"L must be at least 2, got {L}")
    rows = hn.critical_line(T_grid, L=L, J=args.J, with_kink=not args.no_kink)
    path = tracker.path("hn_critical.csv")
    with open(path, "w") as fh:
        fh.write("T,g_c_kink,g_c_onset,flag\n")
        for T, gk, go, flag in rows:
            fh.write(_fmt_row([T, gk, go]) + f",{flag}\n")
    fits = {}
    if len(rows) >= 2:
        a, p = hn.fit_low_T_exponent(rows)
        b, resid = hn.fit_high_T_offset(rows, J=args.J)
        fits = {
            "power_law_fit": {"prefactor": a, "exponent": p},
            "log_fit": {"offset": b, "max_relative_residual": resid},
        }
    return {"rows": len(rows), **fits}


def cmd_selftest(args, config, tracker):
    results = acceptance.run_acceptance(verbose=True)
    report = {
        "criteria": [
            {"name": r.name, "passed": bool(r.passed), "details": r.details,
             "runtime_s": round(r.runtime_s, 2)}
            for r in results
        ],
        "all_passed": bool(all(r.passed for r in results)),
    }
    tracker.path("selftest_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
    if not args.no_fixtures:
        _write_selftest_fixtures(tracker)
    if not report["all_passed"]:
        raise NhThermoError("selftest criteria failed")
    return {"selftest": report}


def _write_selftest_fixtures(tracker):
    """Figure-ready CSVs: an engine sweep, a cycle trace, a condensate phase
    grid and the fine information-content window whose third derivative
    locates the transition."""
    T = 10.0
    rows = engine.engine_sweep(T, [0.0, 0.5, 1.0], kappa=0.005)
    with open(tracker.path("engine_sweep.csv"), "w") as fh:
        fh.write("gamma,T,W_total,T_times_INH,closed_form\n")
        for row in rows:
            fh.write(_fmt_row(row) + "\n")

    rep = engine.run_cycle(engine.CycleSpec(T=T, gamma=1.0, kappa=0.005))
    rep.ledger.to_csv(tracker.path("cycle_trace.csv"), stage_column=True)

    # condensate fraction over a (g, T) grid for the heat map
    L = 1000
    with open(tracker.path("hn_sweep_phase.csv"), "w") as fh:
        fh.write("L,J,T,g,mu,mu0,phi0,I_NH\n")
        for T_hn in np.linspace(0.2, 2.0, 10):
            for g in np.linspace(0.05, 2.0, 14):
                p = hn.HnParams(L=L, J=1.0, g=float(g), T=float(T_hn))
                s = hn.build_spectra(p)
                fh.write(_fmt_row([
                    L, 1.0, T_hn, g, s.mu, s.mu0,
                    hn.condensate_fraction(s), hn.hn_information(p, s),
                ]) + "\n")

    # fine window at L=5000, T=1: the same data path feeds hn_critical.csv
    L5, T5 = 5000, 1.0
    center = hn.onset_g(L5, T5)
    step = min(0.002, center / 40.0)
    lo = max(center * 0.92 - 4 * step, step)
    n = max(int(np.ceil((center * 1.08 + 4 * step - lo) / step)) + 1, 13)
    grid = lo + step * np.arange(n)
    beta = 1.0 / T5
    from scipy.linalg import eigvalsh_tridiagonal

    levels_0 = eigvalsh_tridiagonal(np.zeros(L5), np.full(L5 - 1, 1.0))
    mu0 = hn.chemical_potential(levels_0, beta, L5)
    values = []
    with open(tracker.path("hn_sweep.csv"), "w") as fh:
        fh.write("L,J,T,g,mu,mu0,phi0,I_NH\n")
        for g in grid:
            p = hn.HnParams(L=L5, J=1.0, g=float(g), T=T5)
            s = hn.build_spectra(p, reciprocal=(levels_0, mu0))
            val = hn.hn_information(p, s)
            values.append(val)
            fh.write(_fmt_row([
                L5, 1.0, T5, g, s.mu, s.mu0, hn.condensate_fraction(s), val,
            ]) + "\n")
    g_kink = hn.third_derivative_kink(L5, T5, grid, values=np.array(values))
    flag = int(abs(g_kink - center) > 0.10 * center)
    with open(tracker.path("hn_critical.csv"), "w") as fh:
        fh.write("T,g_c_kink,g_c_onset,flag\n")
        fh.write(_fmt_row([T5, g_kink, center]) + f",{flag}\n")


# ---------------------------------------------------------------------------
# parser and dispatch


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nhthermo",
        description="Information thermodynamics of non-Hermitian quantum systems",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    ap._command_parsers = {}

    def register(name, **kw):
        p = sub.add_parser(name, **kw)
        ap._command_parsers[name] = p
        return p

    def common(p):
        p.add_argument("--out-dir", default="nhthermo_out", help="output directory")
        p.add_argument("--config", default=None, help="JSON config file (flags override)")
        p.add_argument("--threads", type=int, default=None,
                       help="parallelism degree (default: NHTHERMO_THREADS or core count)")
        p.add_argument("--seed", type=int, default=0)

    p = register("engine-cycle", help="run the three-stage two-level cycle")
    common(p)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.005)
    p.add_argument("--ramp1", type=float, default=None)
    p.add_argument("--ramp3", type=float, default=None)
    p.add_argument("--samples", type=int, default=601)

    p = register("engine-sweep", help="cycles over a gamma grid")
    common(p)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=1.5)
    p.add_argument("--gamma-step", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=0.005)
    p.add_argument("--ramp-time", type=float, default=None)
    p.add_argument("--samples", type=int, default=601)

    p = register("evolve", help="propagate the master equation")
    common(p)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.005)
    p.add_argument("--t-final", type=float, default=1000.0)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--rho0", choices=("mixed", "gibbs", "random"), default="mixed")

    p = register("steady-state", help="solve the fixed point")
    common(p)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.005)

    p = register("hn-sweep", help="Hatano-Nelson sweep over (T, g)")
    common(p)
    p.add_argument("--L", type=int, default=1000)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--T-grid", default="0.5:2.0:4")
    p.add_argument("--g-grid", default="0.1:1.5:15")

    p = register("hn-critical", help="critical line of the HN chain")
    common(p)
    p.add_argument("--L", type=int, default=2000)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--T-grid", default="0.05:0.2:8")
    p.add_argument("--no-kink", action="store_true",
                   help="skip the third-derivative estimate (onset only)")

    p = register("selftest", help="run the acceptance criteria")
    common(p)
    p.add_argument("--no-fixtures", action="store_true",
                   help="skip writing the figure fixture CSVs")

    return ap


COMMANDS = {
    "engine-cycle": cmd_engine_cycle,
    "engine-sweep": cmd_engine_sweep,
    "evolve": cmd_evolve,
    "steady-state": cmd_steady_state,
    "hn-sweep": cmd_hn_sweep,
    "hn-critical": cmd_hn_critical,
    "selftest": cmd_selftest,
}


def _merge_config(ap, args, argv):
    """Config-file values apply wherever the flag was not given explicitly."""
    if not args.config:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    known = set(vars(args)) | {"H", "Gamma"}
    for key in config:
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown config key: {key}")
    # flags given on the command line win over config values
    explicit = set()
    for action in ap._command_parsers[args.command]._actions:
        for opt in action.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv):
                explicit.add(action.dest)
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest in vars(args) and dest not in explicit:
            setattr(args, dest, value)
    return config


def resolve_threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        n = int(os.environ.get("NHTHERMO_THREADS", 0)) or (os.cpu_count() or 1)
    if n < 1:
        raise UsageError(f"threads must be at least 1, got {n}")
    return n


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.time()
    try:
        config = _merge_config(ap, args, argv)
        args.threads = resolve_threads(args)
        tracker = OutputTracker(Path(args.out_dir))
        extra = COMMANDS[args.command](args, config, tracker)
        resolved = {k: v for k, v in vars(args).items() if k not in ("config",)}
        write_manifest(tracker, resolved, extra, t0)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NhThermoError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        try:
            tracker.cleanup()
        except NameError:
            pass
        return 1
    except Exception:
        # unexpected failure: remove partial outputs, surface the traceback
        try:
            tracker.cleanup()
        except NameError:
            pass
        raise


if __name__ == "__main__":
    sys.exit(main())
