"""Command line entry point: ``delaydiff run|stability|compare``.

Exit codes: 0 success, 2 configuration error, 3 every trial diverged.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .analysis import (
    KRON_LIMIT,
    MsdCurve,
    check_mean_stability,
    operators_for,
    steady_state_msd,
    stepsize_bounds,
    transient_msd,
    verify_rho_relation,
)
from .config import ConfigError, build_scenario, load_config
from .montecarlo import estimate_msd, steady_state_estimate

log = logging.getLogger("delaydiff")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3
CSV_COLUMNS = ("iteration", "msd_linear", "msd_db")
THEORY_ALGORITHMS = ("noncooperative", "atc_ideal", "atc_delayed")


def to_db(x):
    return 10.0 * np.log10(x)


def write_curve(path: Path, values) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        with np.errstate(divide="ignore", invalid="ignore"):
            db = to_db(np.asarray(values))
        for i, (v, d) in enumerate(zip(values, db)):
            w.writerow([i, repr(float(v)), repr(float(d))])


def read_curve(path: Path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ConfigError(f"{path}: expected columns {', '.join(CSV_COLUMNS)}")
    return np.array([float(r[1]) for r in rows[1:]])


def ticks_to_steady_state(values, steady: float, margin_db: float = 1.0) -> int:
    """First index at which the curve is within `margin_db` of `steady`."""
    with np.errstate(divide="ignore", invalid="ignore"):
        hit = np.flatnonzero(to_db(np.asarray(values)) <= to_db(steady) + margin_db)
    return int(hit[0]) if hit.size else -1


def _arm_theory(sc, name, cfg):
    """Theory operators for an arm; synchronous arms report their per-cycle recursion."""
    alg = cfg.algorithm
    proxy = "atc_ideal" if alg == "atc_synchronous" else alg
    return proxy, operators_for(proxy, sc.A, sc.delays, sc.model, cfg.steps_for(sc.model.num_nodes))


def stability_lines(sc) -> list:
    model = sc.model
    lines = ["# stability report", ""]
    lines.append(f"nodes N = {model.num_nodes}, dimension M = {model.dim}, "
                 f"max delay Gamma = {sc.delays.gamma}")
    bounds = stepsize_bounds(model)
    lines.append("per-node step-size bounds 2/lambda_max(R_k):")
    lines.extend(f"  node {k:3d}: {b:.6g}" for k, b in enumerate(bounds))
    lines.append("")
    for name, cfg in sc.plan.arms:
        mu = cfg.steps_for(model.num_nodes)
        proxy, ops = _arm_theory(sc, name, cfg)
        rep = check_mean_stability(ops.B, model, mu)
        inside = bool(np.all((mu > 0) & (mu < bounds)))
        lines.append(f"arm {name} ({cfg.algorithm}, mu = {_fmt_mu(mu)}):")
        if proxy != cfg.algorithm:
            lines.append(f"  mean recursion per cycle follows {proxy}")
        lines.append(f"  step sizes inside bounds: {inside}")
        lines.append(f"  block max norm ||I - MR||_b,inf = {rep.block_norm:.6g} "
                     f"(sufficient condition {'holds' if rep.block_max_norm_condition else 'fails'})")
        lines.append(f"  rho(B) = {rep.spectral_radius:.12g} -> {'stable' if rep.stable else 'UNSTABLE'}")
        if ops.B.shape[0] <= KRON_LIMIT:
            rel = verify_rho_relation(ops.B)
            lines.append(f"  rho(F) = {rel.rho_F:.12g}, rho(B)^2 = {rel.rho_B ** 2:.12g}, "
                         f"relation {'holds' if rel.holds else 'FAILS'}")
        else:
            lines.append(f"  rho(F) check skipped (MNT = {ops.B.shape[0]} > {KRON_LIMIT})")
    return lines


def _fmt_mu(mu):
    return f"{mu[0]:g}" if np.all(mu == mu[0]) else "[" + ", ".join(f"{m:g}" for m in mu) + "]"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    sc = build_scenario(cfg, seed=args.seed)
    out = Path(args.out or cfg.get("output") or "results")
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d arm(s), %d trials, horizon %d", len(sc.plan.arms), sc.plan.trials, sc.plan.horizon)
    curves = estimate_msd(sc.plan, workers=args.workers)

    summary = {}
    report = stability_lines(sc)
    report += ["", "# steady-state MSD", ""]
    all_diverged = True
    for (name, acfg), sim in zip(sc.plan.arms, curves):
        write_curve(out / f"{name}.simulation.csv", sim.values)
        entry = {"algorithm": acfg.algorithm, "diverged_trials": sim.metadata["diverged"]}
        if sim.metadata["diverged"] < sc.plan.trials:
            all_diverged = False
            entry["simulated_steady_state"] = steady_state_estimate(sim)
        if acfg.algorithm in THEORY_ALGORITHMS:
            ops = operators_for(acfg.algorithm, sc.A, sc.delays, sc.model,
                                acfg.steps_for(sc.model.num_nodes))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                th = transient_msd(ops.B, ops.G, sc.model.w_star, sc.plan.horizon, sc.model.num_nodes)
            if th.metadata["rho_B"] >= 1.0:
                log.warning("arm %s: rho(B) = %.6g, theory curve diverges", name, th.metadata["rho_B"])
            write_curve(out / f"{name}.theory.csv", th.values)
            ss = steady_state_msd(ops.B, ops.G, ops.num_nodes, ops.dim)
            entry["theory_steady_state"] = ss.value if ss.stable else None
            entry["theory_converged"] = ss.converged
        summary[name] = entry
        line = f"arm {name}:"
        if "simulated_steady_state" in entry:
            line += f" simulated {to_db(entry['simulated_steady_state']):.3f} dB"
        if entry.get("theory_steady_state") is not None:
            line += f", theory {to_db(entry['theory_steady_state']):.3f} dB"
        elif acfg.algorithm in THEORY_ALGORITHMS:
            line += ", theory unavailable (rho(B) >= 1)"
        if entry["diverged_trials"]:
            line += f", {entry['diverged_trials']} diverged trial(s) excluded"
        report.append(line)

    (out / "stability_report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
    meta = sc.resolved_config
    meta["metadata"] = {"gamma": sc.delays.gamma, "arms": summary}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"wrote results to {out}")
    if all_diverged:
        log.error("every trial diverged")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_stability(args) -> int:
    sc = build_scenario(load_config(args.config), seed=args.seed)
    print("\n".join(stability_lines(sc)))
    return EXIT_OK


def compare_rows(bundles) -> list:
    """One row per (bundle, arm): steady state in dB and ticks to reach it."""
    rows, horizon, ref = [], None, {}
    for b in bundles:
        b = Path(b)
        meta_path = b / "metadata.json"
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{meta_path}: not a result bundle ({exc})") from exc
        if horizon is None:
            horizon = meta["horizon"]
        elif meta["horizon"] != horizon:
            raise ConfigError(f"{b}: horizon {meta['horizon']} differs from {horizon}")
        for name in meta["metadata"]["arms"]:
            values = read_curve(b / f"{name}.simulation.csv")
            ss = steady_state_estimate(MsdCurve(values, "simulation"))
            ss_db = float(to_db(ss))
            ref.setdefault(name, ss_db)
            rows.append({"bundle": str(b), "arm": name, "steady_state_db": ss_db,
                         "ticks_to_1db": ticks_to_steady_state(values, ss),
                         "delta_db": ss_db - ref[name]})
    return rows


def cmd_compare(args) -> int:
    rows = compare_rows(args.bundles)
    print(f"{'bundle':<30} {'arm':<24} {'steady-state dB':>16} {'ticks to 1 dB':>14} {'delta dB':>9}")
    for r in rows:
        print(f"{r['bundle']:<30} {r['arm']:<24} {r['steady_state_db']:>16.3f} "
              f"{r['ticks_to_1db']:>14d} {r['delta_db']:>9.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaydiff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate all arms and evaluate the theory")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--out", help="output directory (default: config 'output' or ./results)")
    run.set_defaults(func=cmd_run)

    st = sub.add_parser("stability", help="print step-size bounds and spectral radii")
    st.add_argument("config")
    st.add_argument("--seed", type=int, help="override master_seed")
    st.set_defaults(func=cmd_stability)

    cmp_ = sub.add_parser("compare", help="tabulate steady state and convergence of bundles")
    cmp_.add_argument("bundles", nargs="+")
    cmp_.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
