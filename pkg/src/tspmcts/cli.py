"""Command-line pipelines: gen, solve, tune, analyze-knn, report.

Exit codes: 0 success, 2 usage, 3 I/O, 4 config/dimension errors.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import heatmaps, instances, knn_stats, tours, tuner
from .evalkit import Budget, MissingReferenceError, run_benchmark
from .mcts import MctsParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONFIG = 4


class UsageError(Exception):
    pass


def parse_heatmap_spec(spec: str) -> tuple[heatmaps.ZeroSource | heatmaps.PriorSource | heatmaps.SoftDistSource | heatmaps.FileSource, str]:
    """Resolve ``zero | softdist:TAU | gtprior:NAME-or-FILE | file:PATH``."""
    kind, _, arg = spec.partition(":")
    if kind == "zero" and not arg:
        return heatmaps.ZeroSource(), "zero"
    if kind == "softdist":
        if not arg:
            raise UsageError("softdist needs a temperature, e.g. softdist:1.0")
        return heatmaps.SoftDistSource(tau=float(arg)), f"softdist:{arg}"
    if kind == "gtprior":
        if not arg:
            raise UsageError("gtprior needs a builtin name or prior file")
        if arg in heatmaps.BUILTIN_PRIORS:
            return heatmaps.PriorSource(heatmaps.BUILTIN_PRIORS[arg]), f"gtprior:{arg}"
        return heatmaps.PriorSource(heatmaps.load_prior(arg)), f"gtprior:{Path(arg).name}"
    if kind == "file":
        if not arg:
            raise UsageError("file needs a path, e.g. file:heatmap.txt")
        return heatmaps.FileSource(path=arg), f"file:{Path(arg).name}"
    raise UsageError(f"unknown heatmap spec: {spec!r}")


def load_instance_dir(path: str) -> list[instances.Instance]:
    files = sorted(p for p in Path(path).iterdir() if p.suffix in (".txt", ".tsp"))
    if not files:
        raise FileNotFoundError(f"no instance files (.txt/.tsp) in {path}")
    return [instances.load_instance(p) for p in files]


def load_reference_tours(ref_dir: str, inst_dir: str) -> list[np.ndarray]:
    files = sorted(p for p in Path(inst_dir).iterdir() if p.suffix in (".txt", ".tsp"))
    refs = []
    for p in files:
        tour_path = Path(ref_dir) / (p.stem + ".tour")
        if not tour_path.exists():
            raise FileNotFoundError(f"missing reference tour: {tour_path}")
        refs.append(tours.parse_tour(tour_path.read_text()))
    return refs


def _budget_from_args(args) -> Budget:
    if (args.time_factor is None) == (args.max_iters is None):
        raise UsageError("exactly one of --time-factor or --max-iters is required")
    if args.max_iters is not None:
        return Budget(mode="iters", value=args.max_iters)
    return Budget(mode="wall", value=args.time_factor)


def _params_from_args(args) -> MctsParams:
    params = tuner.read_params_file(args.params) if args.params else MctsParams()
    overrides = {}
    for name in ("alpha", "beta", "max_depth", "max_candidate_num", "param_h"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.use_heatmap is not None:
        overrides["use_heatmap"] = args.use_heatmap.lower() in ("1", "true", "yes")
    if overrides:
        params = replace(params, **overrides)
    return params


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--heatmap", required=True, help="zero | softdist:TAU | gtprior:NAME-or-FILE | file:PATH")
    p.add_argument("--time-factor", dest="time_factor", type=float, help="wall seconds per city")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="k-opt simulation cap (deterministic)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--metric", choices=["real", "int"], default="real")


def _add_param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", help="key=value solver config file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--max-candidate-num", dest="max_candidate_num", type=int)
    p.add_argument("--param-h", dest="param_h", type=int)
    p.add_argument("--use-heatmap", dest="use_heatmap", help="true/false")


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = instances.StructuredParams(
        n_clusters=args.clusters,
        spread=args.spread,
        center=(args.center_x, args.center_y),
        radius=args.radius,
    )
    manifest_rows = []
    for i in range(args.count):
        seed_i = args.seed + i
        if args.dist == "uniform":
            inst = instances.generate_uniform(args.n, seed_i)
        else:
            inst = instances.generate_structured(args.n, seed_i, args.dist, params)
        fname = f"{i:04d}-{inst.id}.txt"
        (out / fname).write_text(instances.write_native(inst))
        manifest_rows.append([fname, inst.id, inst.n, args.dist, seed_i])
    with open(out / "manifest.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["file", "id", "n", "dist", "seed"])
        writer.writerows(manifest_rows)
    print(f"wrote {args.count} instances to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    budget = _budget_from_args(args)
    source, heatmap_id = parse_heatmap_spec(args.heatmap)
    params = _params_from_args(args)
    insts = load_instance_dir(args.instances)
    refs = load_reference_tours(args.refs, args.instances) if args.refs else None
    metric = instances.Metric.EUC2D_INT if args.metric == "int" else instances.Metric.EUC2D_REAL
    table = run_benchmark(
        insts, refs, source, params, budget,
        seed=args.seed, jobs=args.jobs, config_id=tuner.config_id(params),
        heatmap_id=heatmap_id, metric=metric,
    )
    table.write_csv(args.out)
    print(f"{len(table.rows)} instances: mean gap {table.mean_gap:.4f}% "
          f"(min {table.min_gap:.4f}%, max {table.max_gap:.4f}%) -> {args.out}")
    return EXIT_OK


def _space_from_args(args) -> tuner.SearchSpace:
    def parse_values(text, cast):
        return tuple(cast(tok) for tok in text.split(",") if tok.strip())

    overrides = {}
    if args.alpha_values:
        overrides["alpha"] = parse_values(args.alpha_values, float)
    if args.beta_values:
        overrides["beta"] = parse_values(args.beta_values, float)
    if args.max_depth_values:
        overrides["max_depth"] = parse_values(args.max_depth_values, int)
    if args.mcn_values:
        overrides["max_candidate_num"] = parse_values(args.mcn_values, int)
    if args.param_h_values:
        overrides["param_h"] = parse_values(args.param_h_values, int)
    if args.use_heatmap_values:
        overrides["use_heatmap"] = parse_values(
            args.use_heatmap_values, lambda s: s.lower() in ("1", "true", "yes")
        )
    return tuner.SearchSpace(**overrides)


def cmd_tune(args) -> int:
    budget = _budget_from_args(args)
    source, heatmap_id = parse_heatmap_spec(args.heatmap)
    insts = load_instance_dir(args.instances)
    metric = instances.Metric.EUC2D_INT if args.metric == "int" else instances.Metric.EUC2D_REAL
    space = _space_from_args(args)
    evaluator = tuner.make_benchmark_evaluator(insts, source, budget, args.seed, jobs=args.jobs, metric=metric)
    if args.subset is not None:
        print("warning: --subset evaluates a sample of the grid; shapley output is skipped", file=sys.stderr)
    report = tuner.tune(space, evaluator, subset=args.subset, subset_seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "tuning.csv")
    if report.shapley is not None:
        tuner.write_shapley_csv(space, report.mean_gaps, out / "shapley.csv")
    tuner.write_params_file(report.best_config, out / "best_config.txt")
    print(f"best config {tuner.config_id(report.best_config)} "
          f"mean gap {report.best_gap:.4f}% ({heatmap_id}) -> {out}")
    return EXIT_OK


def cmd_analyze_knn(args) -> int:
    insts = load_instance_dir(args.instances)
    dists = []
    for idx, inst in enumerate(insts):
        dm = instances.distance_matrix(inst)
        ranks = instances.nearest_neighbor_ranks(dm)
        if args.oracle:
            tour = tours.exact_solve(dm)
        else:
            if not args.tours:
                raise UsageError("provide --tours DIR or --oracle")
            files = sorted(p for p in Path(args.instances).iterdir() if p.suffix in (".txt", ".tsp"))
            tour_path = Path(args.tours) / (files[idx].stem + ".tour")
            if not tour_path.exists():
                raise FileNotFoundError(f"missing tour file: {tour_path}")
            tour = tours.make_tour(tours.parse_tour(tour_path.read_text()), dm)
        dists.append(knn_stats.per_instance_distribution(ranks, tour))
    combined = knn_stats.aggregate(dists)
    knn_stats.write_distribution_csv(combined, args.out)
    if args.emit_prior:
        heatmaps.save_prior(heatmaps.PriorVector(masses=combined.masses), args.emit_prior)
    top5 = knn_stats.cumulative_mass(combined, 5)
    print(f"{len(dists)} instances, support {combined.support}, top-5 mass {top5:.4f} -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    groups: dict[tuple[str, str], list[dict]] = {}
    for path in args.inputs:
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                groups.setdefault((row["heatmap"], row["config"]), []).append(row)
    lines = [
        "| Heatmap | Config | Instances | Mean Length | Mean Gap | Mean Time |",
        "|---|---|---|---|---|---|",
    ]
    summaries = []
    for (hm, cfg), rows in groups.items():
        mean_len = float(np.mean([float(r["length"]) for r in rows]))
        mean_gap = float(np.mean([float(r["gap_pct"]) for r in rows]))
        mean_time = float(np.mean([float(r["time_s"]) for r in rows]))
        summaries.append((mean_gap, hm, cfg, len(rows), mean_len, mean_time))
    for mean_gap, hm, cfg, count, mean_len, mean_time in sorted(summaries):
        lines.append(f"| {hm} | {cfg} | {count} | {mean_len:.4f} | {mean_gap:.2f}% | {mean_time:.2f}s |")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"report -> {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tspmcts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--dist", choices=["uniform", "cluster", "explosion", "implosion"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--spread", type=float, default=0.05)
    p.add_argument("--center-x", dest="center_x", type=float, default=0.5)
    p.add_argument("--center-y", dest="center_y", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=0.2)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance directory, emit a results CSV")
    p.add_argument("--instances", required=True)
    p.add_argument("--refs", help="directory of <instance>.tour reference files")
    p.add_argument("--out", required=True)
    _add_common_args(p)
    _add_param_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tune", help="grid-search solver hyperparameters")
    p.add_argument("--instances", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--subset", type=int, help="evaluate a random config sample (skips shapley)")
    p.add_argument("--alpha-values", dest="alpha_values")
    p.add_argument("--beta-values", dest="beta_values")
    p.add_argument("--max-depth-values", dest="max_depth_values")
    p.add_argument("--mcn-values", dest="mcn_values")
    p.add_argument("--param-h-values", dest="param_h_values")
    p.add_argument("--use-heatmap-values", dest="use_heatmap_values")
    _add_common_args(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("analyze-knn", help="neighbor-rank distribution of (near-)optimal tours")
    p.add_argument("--instances", required=True)
    p.add_argument("--tours", help="directory of <instance>.tour files")
    p.add_argument("--oracle", action="store_true", help="exact-solve instances (n <= 18)")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-prior", dest="emit_prior", help="also write a prior vector file")
    p.set_defaults(func=cmd_analyze_knn)

    p = sub.add_parser("report", help="merge results CSVs into a Markdown summary")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MissingReferenceError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
