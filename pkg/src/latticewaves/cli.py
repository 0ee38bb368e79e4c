"""Command line: ``latticewaves {wavetrain,lattice,sweep,validate}``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure
(non-convergence, blow-up, failed sweep points or failed checks).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from . import grid as gr
from . import lattice as lat
from .errors import BlowUp, LatticeWavesError, NotConverged
from .expr import compile_expr
from .potentials import primal_curvature, registry
from .wavetrain import load_solution, save_solution, solve_wavetrain

log = logging.getLogger("latticewaves")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def number(text: str) -> float:
    """A float, or a constant expression such as ``3*pi/4``."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        val = float(compile_expr(text)(0.0))
    except LatticeWavesError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"{text!r} is not finite")
    return val


def number_list(text: str) -> list:
    """Comma list of numbers, or ``start:stop:count`` (inclusive linspace)."""
    text = text.strip()
    if not text:
        return []
    if text.count(":") == 2 and "," not in text:
        a, b, n = text.split(":")
        n = int(n)
        if n < 1:
            raise argparse.ArgumentTypeError("range count must be >= 1")
        return [float(x) for x in np.linspace(number(a), number(b), n)]
    return [number(t) for t in text.split(",") if t.strip()]


def _positive_int(text):
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


# ---------------------------------------------------------------------------
# parser


WAVETRAIN_EPILOG = """\
outputs (in --out):
  <stem>.json         k, kappa, branch, q, gamma, alpha, sigma (phase speed per unit kappa),
                      omega (frequency), eta, v (mean of U), residual (relative, dimensionless),
                      primal_residual, cone_distance, iterations, converged, model, M, meta
  <stem>_profile.csv  phi (phase, radians in (-pi, pi]), Q (dual profile), V (zero-mean profile),
                      U = v + V (lattice carrier)
"""

LATTICE_EPILOG = """\
outputs (in --out):
  snap_XXXX.csv    j (site index), u (lattice value)
  diagnostics.csv  step, t (microscopic time), sum_u (sum over sites), parity (step mod 2),
                   H (sum of Phi(u_j)), TV (sum |u_{j+1}-u_j|), osc (mean squared second
                   difference), tau (macroscopic time t/N)
  manifest.json    model, N, h, eps = 1/N, snapshot list with t and tau (and advection_error
                   for wavetrain data: relative l2 distance to U(kj - omega t))
"""

SWEEP_EPILOG = """\
outputs (in --out):
  summary.csv      k, q, gamma, alpha, sigma, omega, eta, v, residual, iterations, converged,
                   sym_defect (relative sup distance between the profiles at k and pi-k,
                   empty when pi-k is not in the sweep or k = pi/2), file
  point_XXXX.json  one solution per point (plus _profile.csv), as for 'wavetrain'
"""


def _add_flow_options(p):
    p.add_argument("--model", help="potential: ex1, ex2, ex3, quartic, kvm, linear:<c>, expr:<Psi''(z)>")
    p.add_argument("--q", type=number, help="dual mean q (default 0)")
    p.add_argument("--M", type=_positive_int, help="grid size, even (default 200)")
    p.add_argument("--tau", type=number, help="Euler step size in (0,1) (default 0.1)")
    p.add_argument("--tol", type=number, help="relative residual tolerance (default 1e-8)")
    p.add_argument("--max-iters", type=_positive_int, help="iteration cap (default 500000)")
    p.add_argument("--snap-k", action="store_true", default=None,
                   help="round k to the nearest grid multiple")
    p.add_argument("--single-newton", action="store_true", default=None,
                   help="one Newton step per renormalization (default: iterate to 1e-12)")
    p.add_argument("--offgrid", choices=("fourier", "linear"),
                   help="off-grid window evaluation (default fourier)")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="latticewaves", description=__doc__,
                  formatter_class=argparse.RawDescriptionHelpFormatter)
    top.add_argument("-v", "--verbose", action="count", default=0)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    fmt = argparse.RawDescriptionHelpFormatter

    w = sub.add_parser("wavetrain", help="solve one wavetrain", epilog=WAVETRAIN_EPILOG,
                       formatter_class=fmt)
    w.add_argument("--config", help="key = value file; flags override it")
    w.add_argument("--k", type=number, help="wave number in (0, pi); expressions like 3*pi/4 allowed")
    _add_flow_options(w)
    w.add_argument("--alpha", type=number, help="amplitude of the initial profile alpha*cos (default 5)")
    w.add_argument("--gamma", type=number, help="constraint level W(Q) = gamma")
    w.add_argument("--out", help="output directory (default out/wavetrain)")
    w.add_argument("--stem", help="file stem (default wavetrain)")

    s = sub.add_parser("sweep", help="solve over a list of parameters", epilog=SWEEP_EPILOG,
                       formatter_class=fmt)
    s.add_argument("--config")
    s.add_argument("--k", type=number_list, help="comma list or start:stop:count")
    _add_flow_options(s)
    s.add_argument("--alpha", type=number_list, help="comma list of amplitudes")
    s.add_argument("--gamma", type=number_list, help="comma list of levels")
    s.add_argument("--mirror", action="store_true", default=None,
                   help="also solve pi-k for every k")
    s.add_argument("--workers", type=_positive_int, help="process count (default min(4, cpus))")
    s.add_argument("--out", help="output directory (default out/sweep)")
    # q becomes a list for sweeps
    for a in s._actions:
        if a.dest == "q":
            a.type = number_list
            a.help = "comma list of dual means (default 0)"

    L = sub.add_parser("lattice", help="run the lattice", epilog=LATTICE_EPILOG,
                       formatter_class=fmt)
    L.add_argument("--config")
    L.add_argument("--model", help="primal flux model (default quartic)")
    L.add_argument("--ic", help="longwave:<u(x), x in [0,1)> or wavetrain:<solution.json>:<p>")
    L.add_argument("--N", type=_positive_int, help="number of sites (default 400)")
    L.add_argument("--h", type=number, help="time step (default from the CFL cap)")
    L.add_argument("--tau-end", type=number, help="final macroscopic time t/N")
    L.add_argument("--t-end", type=number, help="final microscopic time")
    L.add_argument("--steps", type=int, help="number of leapfrog steps")
    L.add_argument("--snapshots", help="count of evenly spaced snapshots, or comma list of tau values")
    L.add_argument("--cfl-cap", type=number, help="warning threshold for h*max|Phi''| (default 0.2)")
    L.add_argument("--strict-k", action="store_true", default=None,
                   help="reject wavetrain data whose k is not 2*pi*p/N")
    L.add_argument("--out", help="output directory (default out/lattice)")

    v = sub.add_parser("validate", help="run the numerical check suites")
    v.add_argument("--config")
    v.add_argument("--suite", help="all, acceptance, " + ", ".join(checks.SUITES))
    v.add_argument("--seed", type=int, help="seed of the randomized checks (default 0)")
    v.add_argument("--timing", action="store_true", default=None, help="show runtimes")
    v.add_argument("--out", help="write results as JSON to this file")
    return top


DEFAULTS = {
    "wavetrain": dict(model="ex1", q=0.0, M=200, tau=0.1, tol=1e-8, max_iters=500_000,
                      snap_k=False, single_newton=False, offgrid="fourier",
                      out="out/wavetrain", stem="wavetrain"),
    "sweep": dict(model="ex1", q=[0.0], M=200, tau=0.1, tol=1e-8, max_iters=500_000,
                  snap_k=False, single_newton=False, offgrid="fourier", mirror=False,
                  workers=None, out="out/sweep"),
    "lattice": dict(model=None, N=400, h=None, cfl_cap=0.2, strict_k=False, snapshots="6",
                    out="out/lattice"),
    "validate": dict(suite="all", seed=0, timing=False, out=None),
}


def _subparser(top, command):
    for a in top._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices[command]
    raise KeyError(command)


def read_config(path, sub: argparse.ArgumentParser, explicit: set) -> list:
    """Turn a ``key = value`` file into argv; keys are option names."""
    opts = {}
    for a in sub._actions:
        for o in a.option_strings:
            if o.startswith("--"):
                opts[o[2:]] = a
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    argv = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in opts or key in ("config", "help"):
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        if key in explicit or ({key, *explicit} >= {"alpha", "gamma"} and key in ("alpha", "gamma")):
            continue  # overridden on the command line
        action = opts[key]
        if action.nargs == 0:
            if val.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif val.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"{path}:{n}: {key} expects true/false")
        else:
            argv.append(f"--{key}={val}")
    return argv


def parse(argv):
    top = build_parser()
    args = top.parse_args(argv)
    if args.command is None:
        raise ConfigError("a command is required: wavetrain, lattice, sweep or validate")
    sub = _subparser(top, args.command)
    if args.config:
        explicit = {a.split("=", 1)[0][2:] for a in argv if a.startswith("--")}
        extra = read_config(args.config, sub, explicit)
        i = argv.index(args.command)
        args = top.parse_args(argv[: i + 1] + extra + argv[i + 1:])
    cfg = dict(DEFAULTS[args.command])
    cfg.update({k: v for k, v in vars(args).items() if v is not None})
    return cfg


# ---------------------------------------------------------------------------
# commands


def _check_flow_cfg(cfg, single=True):
    if cfg["M"] % 2:
        raise ConfigError("--M must be even")
    if not 0 < cfg["tau"] < 1:
        raise ConfigError("--tau must lie in (0, 1)")
    if not cfg["tol"] > 0:
        raise ConfigError("--tol must be positive")
    a, g = cfg.get("alpha"), cfg.get("gamma")
    if a is not None and g is not None:
        raise ConfigError("give either --alpha or --gamma, not both")
    if a is None and g is None:
        cfg["alpha"] = 5.0 if single else [5.0]


def _solve_kwargs(cfg):
    return dict(M=cfg["M"], tau=cfg["tau"], tol=cfg["tol"], max_iters=cfg["max_iters"],
                single_newton=cfg["single_newton"], snap_k=cfg["snap_k"],
                offgrid=cfg["offgrid"])


def cmd_wavetrain(cfg) -> int:
    if cfg.get("k") is None:
        raise ConfigError("--k is required")
    _check_flow_cfg(cfg)
    model = registry(cfg["model"])
    sol = solve_wavetrain(model, cfg["k"], cfg["q"], alpha=cfg.get("alpha"),
                          gamma=cfg.get("gamma"), allow_unconverged=True, **_solve_kwargs(cfg))
    sol.model = model if model.side == "dual" else sol.model
    path = save_solution(sol, cfg["out"], cfg["stem"])
    summary = {k: sol.summary()[k] for k in ("k", "sigma", "omega", "v", "residual",
                                             "iterations", "converged")}
    print(json.dumps({"file": str(path), **summary}))
    if not sol.converged:
        print(f"not converged: residual {sol.residual:.3e} > {cfg['tol']:.1e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _sweep_point(task):
    idx, model_name, k, q, alpha, gamma, kwargs, outdir = task
    try:
        sol = solve_wavetrain(registry(model_name), k, q, alpha=alpha, gamma=gamma, **kwargs)
    except NotConverged as exc:
        return idx, None, f"not converged ({exc})"
    except LatticeWavesError as exc:
        return idx, None, f"{type(exc).__name__}: {exc}"
    path = save_solution(sol, outdir, f"point_{idx:04d}")
    return idx, (sol.summary(), sol.Q.values.tolist(), path.name), None


def cmd_sweep(cfg) -> int:
    ks = list(cfg.get("k") or [])
    if not ks:
        raise ConfigError("empty sweep: give --k with at least one value")
    _check_flow_cfg(cfg, single=False)
    if cfg["mirror"]:
        ks = ks + [math.pi - k for k in ks if not any(abs(math.pi - k - x) < 1e-12 for x in ks)]
    levels = [("alpha", a) for a in cfg["alpha"]] if cfg.get("alpha") else \
        [("gamma", g) for g in cfg["gamma"]]
    if not levels or not cfg["q"]:
        raise ConfigError("empty sweep: --alpha/--gamma/--q lists must not be empty")
    registry(cfg["model"])  # fail early on a bad name
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    points = [(k, q, kind, lv) for k in ks for q in cfg["q"] for kind, lv in levels]
    tasks = [(i, cfg["model"], k, q, lv if kind == "alpha" else None,
              lv if kind == "gamma" else None, _solve_kwargs(cfg), str(outdir))
             for i, (k, q, kind, lv) in enumerate(points)]
    workers = cfg["workers"] or min(4, os.cpu_count() or 1)
    if workers == 1 or len(tasks) == 1:
        results = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    results.sort(key=lambda r: r[0])

    by_key = {}
    for (idx, out, _), (k, q, kind, lv) in zip(results, points):
        if out is not None:
            by_key[(round(k, 12), q, kind, lv)] = np.asarray(out[1])
    cols = ["k", "q", "gamma", "alpha", "sigma", "omega", "eta", "v", "residual",
            "iterations", "converged", "sym_defect", "file"]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    failed = []
    for (idx, out, err), (k, q, kind, lv) in zip(results, points):
        if out is None:
            failed.append(f"k={k!r} q={q!r} {kind}={lv!r}: {err}")
            wr.writerow([repr(k), repr(q)] + [""] * (len(cols) - 2))
            continue
        summ, Q, fname = out
        mate = by_key.get((round(math.pi - k, 12), q, kind, lv))
        defect = ""
        if mate is not None and abs(k - math.pi / 2) > 1e-12:
            g = gr.PeriodicGrid(len(Q))
            defect = repr(checks.profile_difference(gr.Profile(g, np.asarray(Q)),
                                                    gr.Profile(g, mate)))
        wr.writerow([repr(summ[c]) if c not in ("converged",) else str(summ[c]).lower()
                     for c in cols[:-2]] + [defect, fname])
    lat._atomic_write(outdir / "summary.csv", buf.getvalue())
    print(buf.getvalue(), end="")
    if failed:
        print("failed points:\n  " + "\n  ".join(failed), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _parse_ic(cfg):
    ic = cfg.get("ic")
    if not ic:
        raise ConfigError("--ic is required (longwave:<expr> or wavetrain:<json>:<p>)")
    kind, _, rest = ic.partition(":")
    if kind == "longwave":
        model = registry(cfg["model"] or "quartic")
        return model, lat.longwave_ic(cfg["N"], rest), None
    if kind == "wavetrain":
        path, _, p = rest.rpartition(":")
        if not path or not p.strip().lstrip("-").isdigit():
            raise ConfigError("wavetrain data need the form wavetrain:<solution.json>:<p>")
        try:
            sol = load_solution(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        if sol.model is None:
            raise ConfigError(f"{path} does not record its model")
        if cfg["model"] and registry(cfg["model"]).spec != sol.model.spec:
            raise ConfigError(f"--model {cfg['model']} differs from the solution's {sol.model.spec}")
        u0 = lat.wavetrain_ic(sol, cfg["N"], int(p), strict=cfg["strict_k"])
        return sol.model, u0, sol
    raise ConfigError(f"unknown initial data kind {kind!r}")


def default_step(model, u0, cap=0.2) -> float:
    """Half the CFL cap over the initial curvature, capped at 0.05."""
    curv = float(np.max(np.abs(primal_curvature(model, u0))))
    return min(0.05, 0.5 * cap / max(curv, 1e-12))


def cmd_lattice(cfg) -> int:
    model, u0, sol = _parse_ic(cfg)
    N = cfg["N"]
    ends = [x for x in ("tau_end", "t_end", "steps") if cfg.get(x) is not None]
    if len(ends) != 1:
        raise ConfigError("give exactly one of --tau-end, --t-end, --steps")
    spec = str(cfg["snapshots"]).strip()
    count = None if ("," in spec or "." in spec) else int(spec)
    h = cfg["h"]
    if cfg.get("steps") is not None:
        steps = cfg["steps"]
        h = h if h is not None else default_step(model, u0, cfg["cfl_cap"])
    else:
        t_end = cfg["t_end"] if cfg.get("t_end") is not None else cfg["tau_end"] * N
        if h is None:
            # largest step below the CFL default that lands exactly on every snapshot
            unit = t_end / count if count else t_end
            h = unit / math.ceil(unit / default_step(model, u0, cfg["cfl_cap"])) if unit > 0 else 0.05
        steps = int(round(t_end / h)) if h > 0 else 0
    if not h > 0:
        raise ConfigError("--h must be positive")
    if steps < 0:
        raise ConfigError("run length must be non-negative")
    t_final = steps * h
    if count is None:
        taus = number_list(spec)
    else:
        taus = [t_final / N * (i + 1) / count for i in range(count)] if count > 0 else []
    snap_steps = sorted({int(round(t * N / h)) for t in taus if 0 < t * N <= t_final + 1e-9})

    if steps == 0:
        rec = lat.RunRecord(J=u0.size, h=h, model=model.spec or model.name)
        rec.snapshots.append((0, 0.0, np.array(u0, dtype=float)))
        st = lat.LatticeState(u0, u0, h, model)
        lat._record(rec, st, model)
        status = EXIT_OK
    else:
        start = lat.bootstrap(u0, h, model)
        try:
            rec = lat.run(start, steps - 1, snapshot_steps=snap_steps, cfl_cap=cfg["cfl_cap"])
            status = EXIT_OK
        except BlowUp as exc:
            print(f"blow-up: {exc}", file=sys.stderr)
            rec, status = exc.record, EXIT_NUMERIC
        rec.snapshots[0] = (0, 0.0, np.array(u0, dtype=float))
    extra = {"ic": cfg["ic"], "steps": steps, "cfl_cap": cfg["cfl_cap"]}
    path = lat.write_run(rec, cfg["out"], extra, reference=sol)
    print(json.dumps({"manifest": str(path), "snapshots": len(rec.snapshots),
                      "t": rec.final.t if rec.final is not None else 0.0}))
    return status


def cmd_validate(cfg) -> int:
    try:
        results = checks.run_suite(cfg["suite"], seed=cfg["seed"])
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    for r in results:
        line = r.line()
        if not cfg["timing"]:
            line = line.replace(f" ({r.seconds:.2f}s / {r.limit:g}s)", "")
        print(line)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed")
    if cfg["out"]:
        data = [{"key": r.key, "title": r.title, "passed": r.passed,
                 "measured": {k: float(v) if isinstance(v, (float, np.floating)) else v
                              for k, v in r.measured.items()}} for r in results]
        lat._atomic_write(Path(cfg["out"]), json.dumps(data, indent=2) + "\n")
    return EXIT_OK if n_ok == len(results) else EXIT_NUMERIC


COMMANDS = {"wavetrain": cmd_wavetrain, "lattice": cmd_lattice, "sweep": cmd_sweep,
            "validate": cmd_validate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(cfg.pop("verbose", 0), 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[cfg.pop("command")](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LatticeWavesError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
