"""Command-line front end.

Subcommands: ``eval`` (analytic metrics on a parameter grid), ``floor``
(error-floor table rows), ``sweep`` (metric-vs-Eb/N0 curves, flushed per grid
point), ``optimize`` (global search or exhaustive APSK), and ``simulate``
(Monte Carlo estimates).  Every output embeds full provenance: tool version,
resolved configuration, and seed, so a run can be reproduced from its output
alone.

Output formats: ``csv`` writes provenance as ``#``-prefixed comment lines
followed by a fixed column header; ``json`` writes a single report object,
except for ``sweep`` where it writes NDJSON (provenance line first, then one
record per line) so partial results survive interruption.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import builtin_constellation
from .core import ChannelParams, eb_n0_to_n0
from .detectors import DetectorKind
from .metrics import (
    LikelihoodKind,
    QuadratureGrid,
    metric_record,
    mi_dc,
    mi_dc_best,
    mi_dd,
    sep_floor,
    sep_union_bound,
)
from .montecarlo import empirical_mi_dc, empirical_sep, empirical_transition_matrix
from .optimize import Criterion, SearchConfig, optimize_apsk, optimize_global

CSV_COLUMNS = [
    "metric",
    "constellation",
    "m",
    "sigma_p2",
    "eb_n0_db",
    "value",
    "error_estimate",
    "raw",
    "flags",
    "constellation_hash",
]

EVAL_METRICS = ("sep-bound", "sep-floor", "mi-dd", "mi-dc-snr", "mi-dc-phn", "mi-dc-best")


def parse_value_list(text: str) -> list[float]:
    """A bare number, a comma list, or a start:step:stop grid (inclusive)."""
    if ":" in text:
        start, step, stop = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(round((stop - start) / step))
        return [start + k * step for k in range(n + 1) if start + k * step <= stop + 1e-9]
    return [float(t) for t in text.split(",")]


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="phaseshape", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, metric_default_eb):
        p.add_argument("--constellation", required=True, help="psk | qam | spiral-qam | apsk:<comp> | file:<path>")
        p.add_argument("--m", type=int, default=16)
        p.add_argument("--power", type=float, default=1.0)
        p.add_argument("--sigma-p2", default="0.01", help="comma list of phase-noise variances (rad^2)")
        p.add_argument("--ebn0", default=metric_default_eb, help="Eb/N0 values in dB: number, comma list, or start:step:stop")
        p.add_argument("--grid-nr", type=int, default=512)
        p.add_argument("--grid-nphi", type=int, default=1024)
        p.add_argument("--phase-nodes", type=int, default=64)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="json")

    p_eval = sub.add_parser("eval", help="analytic metrics on a (sigma_p2, Eb/N0) grid")
    p_eval.add_argument("--metric", choices=EVAL_METRICS, required=True)
    p_eval.add_argument("--paper-literal", action="store_true", help="audit form of the floor argument")
    common(p_eval, "16")

    p_floor = sub.add_parser("floor", help="error-floor rows (sep-floor shortcut)")
    p_floor.add_argument("--paper-literal", action="store_true")
    common(p_floor, "16")

    p_sweep = sub.add_parser("sweep", help="metric curves vs Eb/N0, flushed per grid point")
    p_sweep.add_argument("--metric", choices=EVAL_METRICS, required=True)
    p_sweep.add_argument("--paper-literal", action="store_true")
    common(p_sweep, None)

    p_opt = sub.add_parser("optimize", help="design a constellation")
    p_opt.add_argument("--criterion", choices=[c.value for c in Criterion], required=True)
    p_opt.add_argument("--method", choices=("global", "apsk"), default="global")
    p_opt.add_argument("--m", type=int, default=16)
    p_opt.add_argument("--power", type=float, default=1.0)
    p_opt.add_argument("--sigma-p2", type=float, required=True)
    p_opt.add_argument("--ebn0", type=float, required=True)
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--starts", type=int, default=64)
    p_opt.add_argument("--iters", type=int, default=2000)
    p_opt.add_argument("--top-k", type=int, default=10)
    p_opt.add_argument("--save-constellation", default=None, help="also write the winning points to this file")
    p_opt.add_argument("--out", default=None)
    p_opt.add_argument("--format", choices=("csv", "json"), default="json")

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimates")
    p_sim.add_argument("--what", choices=("sep", "transition", "mi"), required=True)
    p_sim.add_argument("--detector", choices=[k.value for k in DetectorKind], default="gap-d")
    p_sim.add_argument("--likelihood", choices=[k.value for k in LikelihoodKind], default="phn-likelihood")
    p_sim.add_argument("--n", type=int, default=1_000_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--checkpoint", default=None)
    common(p_sim, "16")
    return top


def _provenance(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "command"}
    return {
        "tool": "phaseshape",
        "version": __version__,
        "command": args.command,
        "config": config,
    }


class _Writer:
    """Streams records to CSV or (ND)JSON with a provenance header."""

    def __init__(self, out, fmt: str, provenance: dict, stream_json: bool):
        self.fmt = fmt
        self.provenance = provenance
        self.stream_json = stream_json
        self.records = []
        self.fh = open(out, "w", newline="") if out else sys.stdout
        self.owns = out is not None
        if fmt == "csv":
            self.csv = csv.writer(self.fh)
            self.fh.write("# provenance: " + json.dumps(provenance) + "\n")
            self.csv.writerow(CSV_COLUMNS)
            self.fh.flush()
        elif stream_json:
            self.fh.write(json.dumps(provenance) + "\n")
            self.fh.flush()

    def write(self, record: dict):
        if self.fmt == "csv":
            row = [record.get(col, "") for col in CSV_COLUMNS]
            row = ["" if v is None else (";".join(v) if isinstance(v, (list, tuple)) else v) for v in row]
            self.csv.writerow(row)
            self.fh.flush()
        elif self.stream_json:
            self.fh.write(json.dumps(record) + "\n")
            self.fh.flush()
        else:
            self.records.append(record)

    def close(self):
        if self.fmt == "json" and not self.stream_json:
            report = dict(self.provenance)
            report["results"] = self.records
            self.fh.write(json.dumps(report, indent=2) + "\n")
        if self.owns:
            self.fh.close()


def _evaluate_metric(metric, const, m, power, sigma_p2, ebn0, args):
    extras = {}
    if metric == "sep-floor":
        value = sep_floor(const, sigma_p2, paper_literal=getattr(args, "paper_literal", False))
        params = ChannelParams(sigma_p2, eb_n0_to_n0(ebn0, m, power) if ebn0 is not None else power, eb_n0_db=ebn0)
        err = None
        flags = ["paper-literal"] if getattr(args, "paper_literal", False) else []
    else:
        params = ChannelParams.from_eb_n0(ebn0, m, sigma_p2, power)
        if metric == "sep-bound":
            bound = sep_union_bound(const, params)
            value, err, flags = bound.value, None, []
            extras["raw"] = bound.raw
        elif metric == "mi-dd":
            value, err, flags = mi_dd(const, params), None, []
        else:
            grid = QuadratureGrid.for_channel(const, params, args.grid_nr, args.grid_nphi, args.phase_nodes)
            if metric == "mi-dc-best":
                est = mi_dc_best(const, params, grid)
                flags = [f"kind={est.kind.value}", *est.flags]
            else:
                kind = LikelihoodKind.SNR if metric == "mi-dc-snr" else LikelihoodKind.PHN
                est = mi_dc(const, params, kind, grid)
                flags = list(est.flags)
            value, err = est.bits, est.error_estimate
    record = metric_record(const, params, metric, value, err, flags)
    record.update(extras)
    record["constellation"] = args.constellation
    record["m"] = m
    return record


def _run_eval(args) -> int:
    const = builtin_constellation(args.constellation, args.m, args.power)
    metric = "sep-floor" if args.command == "floor" else args.metric
    if args.ebn0 is None:
        args.ebn0 = "4:2:20" if metric.startswith("sep") else "-2:2:20"
    sigma_list = parse_value_list(args.sigma_p2)
    eb_list = parse_value_list(args.ebn0)
    writer = _Writer(args.out, args.format, _provenance(args), stream_json=(args.command == "sweep"))
    try:
        for sigma_p2 in sigma_list:
            for ebn0 in eb_list:
                writer.write(_evaluate_metric(metric, const, args.m, args.power, sigma_p2, ebn0, args))
    finally:
        writer.close()
    return 0


def _run_optimize(args) -> int:
    params = ChannelParams.from_eb_n0(args.ebn0, args.m, args.sigma_p2, args.power)
    criterion = Criterion(args.criterion)
    search = None
    if args.method == "global":
        search = SearchConfig(n_starts=args.starts, max_iterations=args.iters, seed=args.seed)
        result = optimize_global(criterion, params, args.m, search, args.power)
    else:
        result = optimize_apsk(criterion, params, args.m, args.power, top_k=args.top_k)
    if args.save_constellation:
        result.constellation.save(args.save_constellation)
    provenance = _provenance(args)
    if args.format == "csv":
        writer = _Writer(args.out, "csv", provenance, stream_json=False)
        try:
            if result.method == "apsk":
                for entry in result.leaderboard:
                    writer.write(
                        {
                            "metric": f"apsk-{criterion.value}",
                            "constellation": "apsk:" + ",".join(str(n) for n in entry["composition"]),
                            "m": args.m,
                            "sigma_p2": args.sigma_p2,
                            "eb_n0_db": args.ebn0,
                            "value": entry["objective"],
                            "raw": entry["delta"],
                            "flags": [f"rank={entry['rank']}"],
                            "constellation_hash": "",
                        }
                    )
            else:
                writer.write(
                    {
                        "metric": f"optimize-{criterion.value}",
                        "constellation": "optimized",
                        "m": args.m,
                        "sigma_p2": args.sigma_p2,
                        "eb_n0_db": args.ebn0,
                        "value": result.value,
                        "flags": [f"converged={result.converged}"],
                        "constellation_hash": result.constellation.content_hash(),
                    }
                )
        finally:
            writer.close()
        return 0
    report = _provenance(args)
    search_echo = None
    if search is not None:
        search_echo = {
            "n_starts": search.n_starts,
            "max_iterations": search.max_iterations,
            "step_tolerance": search.step_tolerance,
            "objective_tolerance": search.objective_tolerance,
            "descent_grid": list(search.descent_grid),
        }
    report["results"] = [
        {
            "metric": f"optimize-{criterion.value}",
            "value": result.value,
            "criterion": criterion.value,
            "method": result.method,
            "converged": result.converged,
            "seed": result.seed,
            "n_starts": result.n_starts,
            "params": result.params.snapshot(),
            "search": search_echo,
            "kind": result.kind,
            "composition": list(result.composition) if result.composition else None,
            "delta": result.delta,
            "leaderboard": [
                {**e, "composition": list(e["composition"])} for e in result.leaderboard
            ],
            "sigma_p2": args.sigma_p2,
            "eb_n0_db": args.ebn0,
            "constellation_hash": result.constellation.content_hash(),
            "points": [[float(z.real), float(z.imag)] for z in result.constellation.points],
        }
    ]
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _run_simulate(args) -> int:
    const = builtin_constellation(args.constellation, args.m, args.power)
    sigma_list = parse_value_list(args.sigma_p2)
    eb_list = parse_value_list(args.ebn0)
    writer = _Writer(args.out, args.format, _provenance(args), stream_json=False)
    try:
        for sigma_p2 in sigma_list:
            for ebn0 in eb_list:
                params = ChannelParams.from_eb_n0(ebn0, args.m, sigma_p2, args.power)
                if args.what == "sep":
                    rep = empirical_sep(const, params, DetectorKind(args.detector), args.n, args.seed, args.checkpoint)
                    record = metric_record(const, params, "sim-sep", rep.estimate, rep.std_error, [f"n={rep.n_samples}", f"seed={rep.seed}", f"detector={rep.kind}"])
                elif args.what == "mi":
                    rep = empirical_mi_dc(const, params, LikelihoodKind(args.likelihood), args.n, args.seed)
                    record = metric_record(const, params, "sim-mi-dc", rep.estimate, rep.std_error, [f"n={rep.n_samples}", f"seed={rep.seed}", f"likelihood={rep.kind}"])
                else:
                    tm, counts = empirical_transition_matrix(const, params, DetectorKind(args.detector), args.n, args.seed, args.checkpoint)
                    record = metric_record(const, params, "sim-transition", float(np.trace(tm.probs)) / const.size, None, [f"n={args.n}", f"seed={args.seed}", f"detector={args.detector}"])
                    record["matrix"] = tm.probs.tolist()
                    record["counts"] = counts.tolist()
                record["constellation"] = args.constellation
                record["m"] = args.m
                writer.write(record)
    finally:
        writer.close()
    return 0


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed command; returns the process exit status."""
    if args.command in ("eval", "floor", "sweep"):
        return _run_eval(args)
    if args.command == "optimize":
        return _run_optimize(args)
    if args.command == "simulate":
        return _run_simulate(args)
    raise ValueError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # machine-readable failure for scripting
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
