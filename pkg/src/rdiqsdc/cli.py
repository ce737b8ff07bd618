"""Batch front end: simulate | sweep | threshold | attack-scan | verify.

Exit codes: 0 success (including a run aborted by a security check, which
is a reported outcome), 2 configuration error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import analysis, verify
from .adversary import (
    BlindingAttackParams,
    attacked_distribution_literal,
    detection_power,
    predict_attacked_distribution,
)
from .config import ConfigError, RunConfig, load_config
from .protocol import ProtocolRun, hoeffding_tolerance, run_full_protocol, summary_record, write_transcript


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rdiqsdc",
        description="Single-photon RDI QSDC simulator and capacity analysis",
    )
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, help_text in (
        ("simulate", "run the six-step protocol and write transcripts"),
        ("sweep", "closed-form capacity sweep to CSV"),
        ("threshold", "loss/noise thresholds and distances per operating point"),
        ("attack-scan", "blinding-attack grid: predicted/empirical statistics"),
        ("verify", "run the acceptance battery"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=str, default=None,
                         help="config file path (default: $RDIQSDC_CONFIG)")
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument("--out", type=str, default=".", help="output directory")
        cmd.add_argument("--workers", type=int, default=os.cpu_count(),
                         help="parallel workers (results are worker-count independent)")
        cmd.add_argument("--format", choices=("csv", "tsv"), default="csv")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override a config key (repeatable)")
        if name == "verify":
            cmd.add_argument("--keystone-r", type=int, default=1_000_000,
                             help="photons per sequence in the cross-validation runs")
    return p


def _load(args) -> RunConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = raw.strip()
    if args.seed is not None:
        overrides["protocol.seed"] = str(args.seed)
    return load_config(args.config, overrides)


def _delim(args) -> str:
    return "\t" if args.format == "tsv" else ","


def _write_rows(path: Path, header: list[str], rows: list[list], delim: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(delim.join(header) + "\n")
        for row in rows:
            fh.write(delim.join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.10g}"
    return str(v)


def cmd_simulate(cfg: RunConfig, args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run_full_protocol(cfg.protocol_params(), cfg.message_bits())
    summary = summary_record(result)
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg["output.transcript"]:
        write_transcript(result, outdir / "transcript.jsonl")
    c1 = result.check1
    print(f"round 1 check: theoretical {c1.theoretical_p_g0:.6f}, "
          f"empirical {c1.empirical_p_g0:.6f}, "
          f"{'pass' if c1.passed else 'ABORT'} (tol {c1.tolerance:.4f})")
    if result.check2 is not None:
        c2 = result.check2
        print(f"round 2 check: theoretical {c2.theoretical_p_g0:.6f}, "
              f"empirical {c2.empirical_p_g0:.6f}, "
              f"{'pass' if c2.passed else 'ABORT'} (tol {c2.tolerance:.4f})")
    if result.aborted_at_step is not None:
        print(f"run terminated by the step-{result.aborted_at_step} check")
    elif result.frame is not None:
        f = result.frame
        print(f"message: {len(f.payload)} bits, {f.n_ok} ok, "
              f"{f.n_lost} lost, {f.n_flipped} flipped")
    print(f"wrote {outdir / 'summary.json'}")
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    axis = cfg["analysis.axis"]
    grid = cfg["analysis.grid"]
    if not grid:
        raise ConfigError("analysis.grid is empty; set analysis.grid")
    dth = cfg["physics.delta_theta"]
    eff = cfg.efficiency()
    rows = []
    for p1 in cfg["analysis.p1_list"]:
        link = cfg.link() if axis == "L" else None
        points = analysis.sweep(
            axis, grid, p1=float(p1), delta_theta=dth, link=link, efficiency=eff
        )
        for pt in points:
            rows.append([
                pt.axis_value, p1, pt.params.delta_theta,
                pt.q_ab if pt.params.eta is None else pt.params.eta,
                pt.q_ab, pt.q_aba,
                pt.budget.total_one_way, pt.budget.total_round_trip,
                pt.i_ab, pt.i_be_bound, pt.c_s, pt.e_s,
            ])
    header = ["axis", "p1", "delta_theta", "eta", "q_ab", "q_aba",
              "e_ab", "e_aba", "i_ab", "i_be", "c_s", "e_s"]
    path = outdir / f"sweep.{args.format}"
    _write_rows(path, header, rows, _delim(args))
    if cfg["output.gnuplot"]:
        _write_gnuplot(outdir / "sweep.gp", path.name, axis, _delim(args))
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _write_gnuplot(path: Path, csv_name: str, axis: str, delim: str) -> None:
    script = (
        f'set datafile separator "{delim}"\n'
        f'set key autotitle columnhead\n'
        f'set xlabel "{axis}"\n'
        f'set ylabel "C_S"\n'
        f'plot "{csv_name}" using 1:11 with lines\n'
    )
    path.write_text(script, encoding="utf-8")


def cmd_threshold(cfg: RunConfig, args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    dth = cfg["physics.delta_theta"]
    eta_c, eta_m, eta_d = cfg["physics.eta_c"], cfg["physics.eta_m"], cfg["physics.eta_d"]
    alpha = cfg["physics.alpha_db_per_km"]
    rows = []
    for p1 in cfg["analysis.p1_list"]:
        p1 = float(p1)
        eta_star = analysis.eta_threshold(p1, dth)
        eta_star0 = analysis.eta_threshold(p1, 0.0)
        l_max = analysis.max_distance(p1, dth, eta_c, eta_m, eta_d, alpha)
        l_max0 = analysis.max_distance(p1, 0.0, eta_c, eta_m, eta_d, alpha)
        dth_star = analysis.delta_theta_threshold(p1)
        fid = analysis.fidelity_pair(dth_star) if dth_star is not None else (None, None)
        rows.append([p1, eta_star, eta_star0, l_max, l_max0, dth_star, fid[0], fid[1]])
    header = ["p1", "eta_star", "eta_star_noiseless", "l_max_km",
              "l_max_noiseless_km", "dth_star", "fidelity_one_trip",
              "fidelity_two_trip"]
    path = outdir / f"thresholds.{args.format}"
    _write_rows(path, header, rows, _delim(args))

    print(f"{'p1':>8} {'eta*':>10} {'eta*(0)':>10} {'L_max km':>10} "
          f"{'L_max(0)':>10} {'dth*':>10} {'F(1 trip)':>10} {'F(2 trip)':>10}")
    for row in rows:
        print(" ".join(f"{_fmt(v):>10}" for v in row))
    print(f"# delta_theta = {dth}; noise threshold dth* solved at eta=1 on (0, 0.3*pi);"
          " 'none' = no sign change (noise-robust)")
    print(f"# DI benchmark for comparison: eta* = {verify.DI_BENCHMARK['eta_threshold']},"
          f" L_max = {verify.DI_BENCHMARK['max_distance_km']} km")
    print(f"wrote {path}")
    return 0


def _attack_point(job) -> list:
    params, target, tol = job
    run = ProtocolRun(params)
    run.step1_prepare()
    run.step2_transmit_to_bob()
    report = run.step3_first_check()
    adv = params.adversary
    predicted = predict_attacked_distribution(target, adv)
    literal = attacked_distribution_literal(target, adv)
    abort_p = detection_power(target, adv, params.r, tol)
    return [adv.p1, adv.p2, predicted, literal,
            report.empirical_p_g0, abort_p, int(not report.passed)]


def cmd_attack_scan(cfg: RunConfig, args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    base = cfg.protocol_params()
    target = cfg["protocol.p1_target"] if cfg["protocol.policy"] == "target-p1" else 0.5
    r = cfg["attack.r"]
    tol = base.tolerance if base.tolerance is not None else hoeffding_tolerance(r, base.epsilon)
    jobs = []
    for i, p1a in enumerate(cfg["attack.p1_grid"]):
        for j, p2a in enumerate(cfg["attack.p2_grid"]):
            params = dataclasses.replace(
                base,
                r=r,
                adversary=BlindingAttackParams(p1=float(p1a), p2=float(p2a)),
                continue_on_abort=True,
                seed=base.seed + 1_000 + 100 * i + j,
            )
            jobs.append((params, float(target), tol))
    if args.workers and args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_attack_point, jobs))
    else:
        rows = [_attack_point(job) for job in jobs]
    header = ["p1_attack", "p2_attack", "predicted_p_g0", "literal_p_g0",
              "empirical_p_g0", "abort_probability", "aborted"]
    path = outdir / f"attack_scan.{args.format}"
    _write_rows(path, header, rows, _delim(args))
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    checks = verify.run_all(workers=args.workers or 1, r_keystone=args.keystone_r)
    failures = 0
    for check in checks:
        print(check.line())
        failures += 0 if check.passed else 1
    total = len(checks)
    print(f"{total - failures}/{total} checks passed")
    return 0 if failures == 0 else 3


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.cmd == "simulate":
            return cmd_simulate(cfg, args)
        if args.cmd == "sweep":
            return cmd_sweep(cfg, args)
        if args.cmd == "threshold":
            return cmd_threshold(cfg, args)
        if args.cmd == "attack-scan":
            return cmd_attack_scan(cfg, args)
        if args.cmd == "verify":
            return cmd_verify(cfg, args)
        raise ConfigError(f"unknown command {args.cmd!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
