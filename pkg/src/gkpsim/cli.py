"""Command-line campaigns: Monte Carlo decoding studies, Fock tables, loss sweeps and code checks.

Every subcommand writes its CSV, a run manifest (config, seed, versions) and,
where a figure exists, a gnuplot script into ``--out``. Options may also come
from a flat ``key = value`` config file (``--config``); flags win.

Trajectory i of a campaign with master seed s draws all its randomness from
numpy default_rng(SeedSequence([s, i])), so results do not depend on the
number of workers. Exit codes: 0 success, 2 configuration error, 3 numerical
diagnostic failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import multiprocessing as mp
import os
import platform
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import channels, codes, fockrep, stochastic
from . import decoders as dec
from . import gridstate as gs
from . import steane_ec as ec
from .errors import ConfigError, GkpsimError, GridError, NumericalError

RESULT_COLUMNS = ["delta", "M", "decoder", "feedback", "n_traj", "seed", "p_logical", "stderr", "mean_fluctuation"]
ROUND_COLUMNS = ["delta", "feedback", "round", "dq_after_z", "dp_after_z", "dq", "dp", "nbar", "nbar_stderr"]
FIGURES = ("sim", "simdisp", "stoch_compare", "photons", "eff_sq", "fock", "loss")
STOCH_STREAMS = {"low": 1, "high": 2}


@dataclass
class Campaign:
    experiment: str
    deltas: list
    rounds: int
    n_traj: int
    seed: int
    out: str
    workers: int = 1
    decoders: tuple = dec.DECODERS
    feedback: str = "none"
    kind: str = "F"

    def validate(self):
        if self.n_traj < 100:
            raise ConfigError("n_traj must be at least 100")
        if not 1 <= self.rounds <= 50:
            raise ConfigError("rounds must lie in 1..50")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.feedback not in ec.FEEDBACK_MODES:
            raise ConfigError(f"feedback must be one of {ec.FEEDBACK_MODES}")
        bad = [d for d in self.decoders if d not in dec.DECODERS]
        if bad:
            raise ConfigError(f"unknown decoders {bad}")
        if any(not 0 < d < 1 for d in self.deltas):
            raise ConfigError("delta values must lie in (0, 1)")


@dataclass
class TrialStats:
    delta: float
    M: int
    decoder: str
    feedback: str
    n_traj: int
    seed: int
    p_logical: float
    stderr: float
    mean_fluctuation: float


# ---------------------------------------------------------------- config


def read_config(path):
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = val
    return cfg


def _floats(text):
    try:
        return [float(x) for x in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _names(text):
    return tuple(x for x in str(text).replace(",", " ").split())


def default_workers():
    try:
        return max(1, int(os.environ.get("GKPSIM_WORKERS", "1")))
    except ValueError as exc:
        raise ConfigError("GKPSIM_WORKERS must be an integer") from exc


# ---------------------------------------------------------------- workers

_STATE = {}


def _prepare(delta, feedback, kind):
    key = (delta, feedback, kind)
    if key not in _STATE:
        grid = ec.ec_grid(delta, feedback)
        _STATE[key] = gs.prepare_gkp(grid, gs.GkpApprox(kind, delta, "zero"))
    return _STATE[key]


def _coherent_task(args):
    """One trajectory: per-prefix estimates of each decoder and per-round diagnostics."""
    delta, feedback, kind, M, seed, index, names = args
    psi = _prepare(delta, feedback, kind)
    tr = ec.run_trajectory(psi, delta, M, feedback, ec.trajectory_rng(seed, index))
    est = dec.trajectory_estimates(tr, delta, names)
    return np.array([est[n] for n in names]), tr.diag, tr.final_bit


def _map(func, tasks, workers):
    if workers == 1:
        return [func(t) for t in tasks]
    with mp.get_context("fork").Pool(workers) as pool:
        return pool.map(func, tasks, chunksize=max(1, len(tasks) // (8 * workers)))


def run_coherent(delta, feedback, names, M, n_traj, seed, workers=1, kind="F"):
    """Estimates (n_traj, len(names), M+1), diagnostics (n_traj, M, 5) and final bits (n_traj,), ordered by index."""
    tasks = [(delta, feedback, kind, M, seed, i, tuple(names)) for i in range(n_traj)]
    res = _map(_coherent_task, tasks, workers)
    return np.stack([r[0] for r in res]), np.stack([r[1] for r in res]), np.array([r[2] for r in res])


def stats_rows(delta, feedback, names, est, seed):
    rows = []
    n = est.shape[0]
    for k, name in enumerate(names):
        for m in range(1, est.shape[2]):
            s = dec.summarize(est[:, k, m])
            rows.append(TrialStats(delta, m, name, feedback, n, seed, s.mean, s.stderr, s.fluctuation))
    return rows


def round_rows(delta, feedback, diag):
    rows = []
    mean = np.nanmean(diag, axis=0)
    se = np.nanstd(diag[:, :, 4], axis=0, ddof=1) / math.sqrt(diag.shape[0])
    for m in range(diag.shape[1]):
        rows.append([delta, feedback, m + 1, *mean[m], se[m]])
    return rows


# ---------------------------------------------------------------- output


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            vals = [getattr(r, c) for c in columns] if isinstance(r, TrialStats) else list(r)
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in vals])


def write_manifest(out, config, extra=None):
    man = {
        "config": config,
        "rng": "trajectory i uses numpy default_rng(SeedSequence([seed, i] (+ [stream])))",
        "versions": {
            "gkpsim": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        man.update(extra)
    Path(out, "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


PLOT_SCHEMAS = {
    "sim": RESULT_COLUMNS,
    "simdisp": RESULT_COLUMNS,
    "stoch_compare": RESULT_COLUMNS + ["sigma0"],
    "photons": ROUND_COLUMNS,
    "eff_sq": ROUND_COLUMNS,
    "fock": ["kind", "delta", "n", "c_n", "c_n_squared", "thermal_pn"],
    "loss": ["kappa_t", "p_correct", "expectation_re", "expectation_im"],
}


def _series(csv_path, keys):
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    seen = []
    for r in rows:
        k = tuple(r[c] for c in keys)
        if k not in seen:
            seen.append(k)
    return seen


def emit_plot_script(csv_path, figure, script_path=None):
    """Write a gnuplot script rendering ``figure`` from ``csv_path``; returns the script path."""
    if figure not in FIGURES:
        raise ConfigError(f"figure must be one of {FIGURES}")
    csv_path = Path(csv_path)
    try:
        with open(csv_path) as fh:
            header = next(csv.reader(fh))
    except (OSError, StopIteration) as exc:
        raise ConfigError(f"cannot read {csv_path}") from exc
    missing = [c for c in PLOT_SCHEMAS[figure] if c not in header]
    if missing:
        raise ConfigError(f"{csv_path.name} lacks columns {missing} needed for figure {figure}")
    col = {c: i + 1 for i, c in enumerate(header)}
    script_path = Path(script_path or csv_path.with_name(f"plot_{figure}.gp"))
    data = csv_path.name
    lines = ["set datafile separator ','", "set key outside", "set terminal pngcairo size 900,600", f"set output '{figure}.png'"]
    plots = []
    if figure in ("sim", "simdisp", "stoch_compare"):
        lines += ["set logscale y", "set xlabel 'M'", "set ylabel 'logical error rate'"]
        keys = ["delta", "decoder", "feedback"] + (["sigma0"] if figure == "stoch_compare" else [])
        for k in _series(csv_path, keys):
            cond = " && ".join(f'strcol({col[c]}) eq "{v}"' for c, v in zip(keys, k))
            label = " ".join(f"{c}={v}" for c, v in zip(keys, k) if v != "")
            plots.append(
                f"'{data}' every ::1 using (({cond}) ? ${col['M']} : 1/0):{col['p_logical']}:{col['stderr']} "
                f"with yerrorlines title '{label}'"
            )
    elif figure in ("photons", "eff_sq"):
        ys = ["nbar"] if figure == "photons" else ["dq_after_z", "dp_after_z", "dq", "dp"]
        lines += ["set xlabel 'round'", f"set ylabel '{'mean photon number' if figure == 'photons' else 'effective squeezing'}'"]
        for k in _series(csv_path, ["delta", "feedback"]):
            cond = f'strcol({col["delta"]}) eq "{k[0]}" && strcol({col["feedback"]}) eq "{k[1]}"'
            for y in ys:
                plots.append(
                    f"'{data}' every ::1 using (({cond}) ? ${col['round']} : 1/0):{col[y]} with linespoints "
                    f"title '{y} delta={k[0]} feedback={k[1]}'"
                )
    elif figure == "fock":
        panels = _series(csv_path, ["kind", "delta"])
        lines += [f"set multiplot layout {len(panels)},1", "set xlabel 'n'", "set logscale y"]
        for kind, delta in panels:
            cond = f'strcol({col["kind"]}) eq "{kind}" && strcol({col["delta"]}) eq "{delta}"'
            lines.append(
                f"set title '{kind} delta={delta}'\nplot '{data}' every ::1 using (({cond}) ? ${col['n']} : 1/0):"
                f"{col['c_n_squared']} with impulses title 'c_n^2', '' every ::1 using (({cond}) ? ${col['n']} : 1/0):"
                f"{col['thermal_pn']} with lines title 'thermal'"
            )
        lines.append("unset multiplot")
    else:
        lines += ["set xlabel 'kappa t'", "set ylabel 'probability / expectation'"]
        plots = [
            f"'{data}' every ::1 using 1:{col['p_correct']} with linespoints title 'P(correct)'",
            f"'{data}' every ::1 using 1:{col['expectation_re']} with linespoints title 'Re <Z>'",
            f"'{data}' every ::1 using 1:{col['expectation_im']} with linespoints title 'Im <Z>'",
        ]
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    script_path.write_text("\n".join(lines) + "\n")
    return script_path


# ---------------------------------------------------------------- subcommands


def cmd_simulate(cfg):
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results, rounds = [], []
    main = [d for d in cfg.decoders if d != "memoryless" or cfg.feedback == "memoryless"]
    for delta in cfg.deltas:
        est, diag, _ = run_coherent(delta, cfg.feedback, main, cfg.rounds, cfg.n_traj, cfg.seed, cfg.workers, cfg.kind)
        results += stats_rows(delta, cfg.feedback, main, est, cfg.seed)
        rounds += round_rows(delta, cfg.feedback, diag)
        if "memoryless" in cfg.decoders and cfg.feedback != "memoryless":
            est_m, _, _ = run_coherent(delta, "memoryless", ["memoryless"], cfg.rounds, cfg.n_traj, cfg.seed, cfg.workers, cfg.kind)
            results += stats_rows(delta, "memoryless", ["memoryless"], est_m, cfg.seed)
    _write_csv(out / "results.csv", RESULT_COLUMNS, results)
    _write_csv(out / "rounds.csv", ROUND_COLUMNS, rounds)
    write_manifest(out, asdict(cfg))
    emit_plot_script(out / "results.csv", "sim" if cfg.feedback == "none" else "simdisp")
    emit_plot_script(out / "rounds.csv", "photons")
    emit_plot_script(out / "rounds.csv", "eff_sq")
    print(f"wrote {len(results)} result rows to {out / 'results.csv'}")
    return 0


def cmd_stochastic(cfg):
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for delta in cfg.deltas:
        est, _, _ = run_coherent(delta, "none", ["mld"], cfg.rounds, cfg.n_traj, cfg.seed, cfg.workers, cfg.kind)
        for r in stats_rows(delta, "none", ["mld"], est, cfg.seed):
            rows.append([getattr(r, c) for c in RESULT_COLUMNS] + [""])
        for tag, conv in (("low", "half"), ("high", "full")):
            sigma = channels.gaussian_displacement_params(delta, conv)
            st = np.array(
                [
                    _stoch_task((sigma, cfg.rounds, cfg.seed, i, STOCH_STREAMS[tag]))
                    for i in range(cfg.n_traj)
                ]
            )
            for m in range(1, cfg.rounds + 1):
                s = dec.summarize(st[:, m])
                rows.append([delta, m, "mld_stochastic", "none", cfg.n_traj, cfg.seed, s.mean, s.stderr, s.fluctuation, sigma])
    _write_csv(out / "stoch_compare.csv", RESULT_COLUMNS + ["sigma0"], rows)
    write_manifest(out, asdict(cfg), {"stochastic_streams": STOCH_STREAMS})
    emit_plot_script(out / "stoch_compare.csv", "stoch_compare")
    print(f"wrote {len(rows)} rows to {out / 'stoch_compare.csv'}")
    return 0


def _stoch_task(args):
    sigma, M, seed, index, stream = args
    tr = stochastic.simulate_stochastic(sigma, M, ec.trajectory_rng(seed, index, stream))
    p = stochastic.coset_posterior(tr.syndromes, sigma)
    return np.minimum(p, 1 - p)


def cmd_fock(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for delta in args.delta:
        for kind in args.kinds:
            exp = fockrep.fock_coeffs(delta, kind, args.n_max)
            n = np.arange(exp.n_max + 1)
            pn = fockrep.thermal_pn(fockrep.thermal_asymptote(delta), n)
            rows += [[kind, delta, int(k), exp.coeffs[k], exp.coeffs[k] ** 2, pn[k]] for k in n]
    _write_csv(out / "fock.csv", PLOT_SCHEMAS["fock"], rows)
    write_manifest(out, {"experiment": "fock", "deltas": args.delta, "kinds": list(args.kinds), "n_max": args.n_max})
    emit_plot_script(out / "fock.csv", "fock")
    print(f"wrote {len(rows)} rows to {out / 'fock.csv'}")
    return 0


def cmd_loss(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (delta,) = args.delta[:1]
    grid = gs.GridSpec()
    psi = gs.prepare_gkp(grid, gs.GkpApprox(args.kind, delta, args.logical))
    rows = channels.loss_sweep(psi, args.kappa_t)
    channels.write_loss_csv(rows, out / "loss.csv")
    write_manifest(out, {"experiment": "loss", "delta": delta, "kind": args.kind, "logical": args.logical, "kappa_t": args.kappa_t})
    emit_plot_script(out / "loss.csv", "loss")
    for r in rows:
        print(f"kappa_t={r[0]:.4g}  P(correct)={r[1]:.6f}  <Z>={r[2]:.6f}{r[3]:+.2e}i")
    return 0


def code_checks():
    """Rows (check, value, tolerance, passed) for every bosonic-code diagnostic."""
    rows = []
    for g in (0.01, 0.005):
        r = codes.qec_check(codes.kitten_code(g, "ideal"))
        rows.append((f"kitten_ideal_g{g}", max(r.distinguish, r.orthogonality), 1e-12, r.passed))
        r = codes.qec_check(codes.kitten_code(g, "kraus"))
        rows.append((f"kitten_kraus_dev_over_g2_g{g}", r.distinguish / g**2, float("nan"), not r.passed))
    r = codes.qec_check(codes.two_mode_code(0.01))
    rows.append(("two_mode_g0.01", max(r.distinguish, r.orthogonality), 1e-12, r.passed))
    x = codes.cat_sweet_spots(1)[0]
    rows.append(("cat_sweet_spot", x, 0.01, abs(x - 2.34) <= 0.01))
    z, o = codes.four_cat_codewords(math.sqrt(x), 60)
    dn = abs(codes.mean_photon(z) - codes.mean_photon(o))
    rows.append(("cat_photon_equality", dn, 1e-8, dn < 1e-8))
    k = codes.kerr_cat_spectrum(1.0, 6.25, 60)
    rows.append(("kerr_split_over_gap", k.splitting / k.gap, 1e-3, k.splitting < 1e-3 * k.gap))
    rows.append(("kerr_gap_rel_dev", abs(k.gap - 25) / 25, 0.25, abs(k.gap - 25) <= 0.25 * 25))
    rows.append(("kerr_cat_overlap", k.overlap, 0.99, k.overlap > 0.99))
    res = codes.dissipative_fixed_point_check(1.5, 60)
    rows.append(("fixed_point_residual", res, 1e-8, res < 1e-8))
    bm = codes.bloch_messiah_cnot()
    err = max(bm.error_A, bm.error_B)
    rows.append(("bloch_messiah_error", err, 1e-12, err < 1e-12))
    rows.append(("bloch_messiah_xi", bm.xi, 1e-4, abs(bm.xi + 0.4812) <= 1e-4))
    ph = codes.rotation_symmetry_check(codes.kitten_codewords()[0], 1)
    rows.append(("kitten_parity", ph.real, 1e-12, abs(ph - 1) < 1e-12))
    return rows


def cmd_codes(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = code_checks()
    _write_csv(out / "codes.csv", ["check", "value", "tolerance", "passed"], rows)
    write_manifest(out, {"experiment": "codes"})
    for name, val, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:32s} {val:.6g}  (tol {tol:g})")
    return 0


def cmd_plot(args):
    path = emit_plot_script(args.results, args.figure, args.script)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="gkpsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def campaign_args(sp, default_decoders):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--delta", help="comma-separated squeezing values (default 0.3,0.4)")
        sp.add_argument("--rounds", type=int, help="largest M; every M = 1..rounds is reported (default 10)")
        sp.add_argument("--trajectories", type=int, help="trajectories per configuration (default 5000)")
        sp.add_argument("--decoders", help=f"comma-separated subset of {','.join(dec.DECODERS)}")
        sp.add_argument("--feedback", choices=ec.FEEDBACK_MODES)
        sp.add_argument("--seed", type=int, help="master seed (default 42)")
        sp.add_argument("--workers", type=int, help="worker processes (default $GKPSIM_WORKERS or 1)")
        sp.add_argument("--kind", choices=gs.KINDS, help="input state approximation (default F)")
        sp.add_argument("--out", help="output directory (default results)")
        sp.set_defaults(default_decoders=default_decoders)

    campaign_args(sub.add_parser("simulate", help="Monte Carlo decoder study"), ",".join(dec.DECODERS))
    campaign_args(sub.add_parser("stochastic", help="coherent vs Gaussian-shift model comparison"), "mld")

    sp = sub.add_parser("fock", help="Fock coefficients of approximate GKP and sensor states")
    sp.add_argument("--delta", type=_floats, default=[0.3, 0.4, 0.5])
    sp.add_argument("--kinds", type=_names, default=("gkp0", "gkp1", "sensor"))
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--out", default="results")

    sp = sub.add_parser("loss", help="photon-loss readout sweep")
    sp.add_argument("--delta", type=_floats, default=[0.3])
    sp.add_argument("--kappa-t", type=_floats, default=[0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0])
    sp.add_argument("--kind", choices=gs.KINDS, default="F")
    sp.add_argument("--logical", choices=("zero", "one"), default="zero")
    sp.add_argument("--out", default="results")

    sp = sub.add_parser("codes", help="bosonic code diagnostics")
    sp.add_argument("--out", default="results")

    sp = sub.add_parser("plot", help="emit a gnuplot script for a results CSV")
    sp.add_argument("results")
    sp.add_argument("--figure", choices=FIGURES, required=True)
    sp.add_argument("--script")
    return p


def campaign_from_args(args):
    cfg = read_config(args.config) if args.config else {}
    known = {"delta", "rounds", "trajectories", "decoders", "feedback", "seed", "workers", "kind", "out"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key in known:
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val

    def as_int(key, default):
        try:
            return int(cfg.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer") from exc

    return Campaign(
        experiment="decode" if args.command == "simulate" else "stoch_compare",
        deltas=_floats(cfg.get("delta", "0.3,0.4")),
        rounds=as_int("rounds", 10),
        n_traj=as_int("trajectories", 5000),
        seed=as_int("seed", 42),
        out=str(cfg.get("out", "results")),
        workers=as_int("workers", default_workers()),
        decoders=_names(cfg.get("decoders", args.default_decoders)),
        feedback=str(cfg.get("feedback", "none")),
        kind=str(cfg.get("kind", "F")),
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("simulate", "stochastic"):
            cfg = campaign_from_args(args)
            return cmd_simulate(cfg) if args.command == "simulate" else cmd_stochastic(cfg)
        return {"fock": cmd_fock, "loss": cmd_loss, "codes": cmd_codes, "plot": cmd_plot}[args.command](args)
    except ConfigError as exc:
        print(f"gkpsim: config error: {exc}", file=sys.stderr)
        return 2
    except (GridError, NumericalError, FloatingPointError) as exc:
        print(f"gkpsim: numerical diagnostic failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"gkpsim: I/O error: {exc}", file=sys.stderr)
        return 2
    except GkpsimError as exc:
        print(f"gkpsim: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
