"""Command-line interface: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 refused
budget. Diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import fedsim
from .augment import (
    augments_to_json,
    direct_retrieval_augment,
    feddca_augment,
    random_sampling_augment,
)
from .clustering import CandidateCenters, kmeans
from .errors import BudgetExceededError, FedcaError, ValidationError
from .fedsim import ExperimentConfig, compare_strategies, heterogeneity_sweep, run_experiment, write_rows_csv
from .metrics import comm_cost, cross_client_coverage, icacs, ruai
from .parallel import set_thread_count
from .partition import PartitionPlan, dirichlet_partition, distinct_cluster_partition, iid_partition
from .selection import (
    DEFAULT_BRUTE_BUDGET,
    CenterSelection,
    SelectionProblem,
    approximation_report,
    beam_select,
    brute_force_select,
    greedy_select,
)
from .selfcheck import run_selfcheck
from .store import EmbeddingStore, ingest_binary, ingest_jsonl, write_binary

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_store(path: str) -> EmbeddingStore:
    return ingest_binary(path)


def _load_centers(paths: list[str]) -> list[CandidateCenters]:
    out = []
    for k, path in enumerate(paths):
        store = _load_store(path)
        if len(store) == 0:
            raise ValidationError(f"centers file {path} is empty")
        out.append(CandidateCenters(client_id=k, centers=store.vectors))
    return out


def _build_problem(args) -> SelectionProblem:
    candidates = _load_centers(args.centers)
    reference = None
    if args.reference != "call":
        reference = _load_store(args.reference).vectors
    return SelectionProblem(candidates_per_client=candidates, reference=reference)


def _write_json(path: str, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _load_selection(path: str) -> CenterSelection:
    return CenterSelection.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------- handlers


def _cmd_ingest(args) -> int:
    store = ingest_jsonl(args.infile, args.dim)
    write_binary(store, args.out)
    print(json.dumps({"records": len(store), "dim": store.dim, "out": args.out}))
    return EXIT_OK


def _cmd_cluster(args) -> int:
    store = _load_store(args.infile)
    result = kmeans(store.vectors, args.k, args.seed)
    centers = EmbeddingStore(
        store.dim,
        list(range(result.k)),
        ["center"] * result.k,
        result.centers,
    )
    write_binary(centers, args.out)
    print(json.dumps({
        "centers": result.k,
        "inertia": result.inertia,
        "cluster_sizes": [int(s) for s in result.cluster_sizes],
        "out": args.out,
    }))
    return EXIT_OK


def _cmd_partition(args) -> int:
    store = _load_store(args.infile)
    if args.mode == "iid":
        plan = iid_partition(store, args.clients, args.per_client, args.seed)
    else:
        from .clustering import assign_labels

        k_lab = min(args.label_clusters, len(store))
        pseudo = kmeans(store.vectors, k_lab, args.seed)
        labels = assign_labels(store.vectors, pseudo)
        if args.mode == "dirichlet":
            plan = dirichlet_partition(
                store, labels, args.clients, args.per_client, args.beta, args.seed
            )
        else:
            plan = distinct_cluster_partition(
                store, labels, args.clients, args.per_client, args.seed
            )
    _write_json(args.out, plan.to_json_dict())
    print(json.dumps({"clients": plan.n_clients, "shortfalls": plan.shortfalls, "out": args.out}))
    return EXIT_OK


def _cmd_select(args) -> int:
    problem = _build_problem(args)
    if args.mode == "greedy":
        selection = greedy_select(
            problem,
            args.seed,
            per_client_slots=args.per_client_slots,
            literal_termination=args.literal_termination,
        )
    elif args.mode == "beam":
        selection = beam_select(problem, args.width)
    else:
        selection = brute_force_select(problem, args.budget)
    _write_json(args.out, selection.to_json_dict())
    print(json.dumps({
        "coverage": selection.coverage.value,
        "passes": selection.passes,
        "swaps": selection.swaps,
        "out": args.out,
    }))
    return EXIT_OK


def _cmd_augment(args) -> int:
    pool = _load_store(args.pool)
    if args.strategy == "feddca":
        if not args.selection:
            raise ValidationError("--selection is required for the feddca strategy")
        selection = _load_selection(args.selection)
        results = feddca_augment(pool, selection, args.per_client, args.alpha)
    elif args.strategy == "direct":
        if not args.centers:
            raise ValidationError("--centers is required for the direct strategy")
        results = direct_retrieval_augment(pool, _load_centers(args.centers), args.per_client)
    else:
        if args.clients is None:
            raise ValidationError("--clients is required for the random strategy")
        results = random_sampling_augment(pool, args.clients, args.per_client, args.seed)
    _write_json(args.out, augments_to_json(results))
    print(json.dumps({
        "clients": len(results),
        "total_hits": sum(len(r.hits) for r in results),
        "out": args.out,
    }))
    return EXIT_OK


def _cmd_metrics(args) -> int:
    domain = _load_store(args.domain)
    universe = _load_store(args.universe)
    plan = PartitionPlan.from_json_dict(json.loads(Path(args.plan).read_text(encoding="utf-8")))
    augsets = json.loads(Path(args.augsets).read_text(encoding="utf-8"))
    aug_ids = [[int(i) for i in entry["ids"]] for entry in augsets]
    if len(aug_ids) != plan.n_clients:
        raise ValidationError(
            f"augsets cover {len(aug_ids)} clients but the plan has {plan.n_clients}"
        )
    client_sets = list(zip(plan.assignments, aug_ids))
    cov = cross_client_coverage(domain, client_sets, universe)
    icacs_value = None
    if len(aug_ids) >= 2:
        icacs_value = icacs([universe.vectors_for(ids) for ids in aug_ids], seed=args.seed)
    upload, download = comm_cost(plan.n_clients, args.xi, universe.dim, aug_ids)
    passes = None
    if args.selection:
        passes = _load_selection(args.selection).passes
    report = {
        "domain_coverage": cov.value,
        "reference_size": cov.reference_size,
        "icacs": icacs_value,
        "ruai": ruai(aug_ids),
        "comm_upload_floats": upload,
        "comm_download_records": download,
        "convergence_passes": passes,
    }
    _write_json(args.out, report)
    print(json.dumps({"domain_coverage": cov.value, "out": args.out}))
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json_dict(
        json.loads(Path(args.config).read_text(encoding="utf-8"))
    )
    log = run_experiment(cfg, out_dir=args.out)
    print(json.dumps({
        "run_dir": str(log.run_dir),
        "messages": len(log.messages),
        "domain_coverage": log.metrics.domain_coverage.value,
    }))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_json_dict(
        json.loads(Path(args.config).read_text(encoding="utf-8"))
    )
    betas = [float(b) for b in args.betas.split(",") if b]
    rows = heterogeneity_sweep(cfg, betas)
    write_rows_csv(rows, args.out)
    print(json.dumps({"rows": len(rows), "out": args.out}))
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = ExperimentConfig.from_json_dict(
        json.loads(Path(args.config).read_text(encoding="utf-8"))
    )
    strategies = [s for s in args.strategies.split(",") if s]
    for s in strategies:
        if s not in fedsim.STRATEGIES:
            raise ValidationError(f"unknown strategy {s!r}")
    import dataclasses

    rows = compare_strategies([dataclasses.replace(cfg, strategy=s) for s in strategies])
    write_rows_csv(rows, args.out)
    print(json.dumps({"rows": len(rows), "out": args.out}))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    problem = _build_problem(args)
    greedy_cov = None
    if args.greedy:
        greedy_cov = _load_selection(args.greedy).coverage.value
    if args.oracle_mode == "brute":
        selection = brute_force_select(problem, args.budget)
        payload = selection.to_json_dict()
        payload["method"] = "brute"
        if greedy_cov is not None and selection.coverage.value > 0:
            payload["ratio_percent"] = 100.0 * greedy_cov / selection.coverage.value
    else:
        widths = [int(w) for w in args.widths.split(",") if w]
        report = approximation_report(problem, widths, seed=args.seed, brute_budget=args.budget)
        payload = report.to_json_dict()
        payload["method"] = "beam"
        if greedy_cov is not None and report.best_beam_coverage > 0:
            payload["ratio_percent"] = 100.0 * greedy_cov / report.best_beam_coverage
    _write_json(args.out, payload)
    print(json.dumps({"method": payload["method"], "out": args.out}))
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    start = time.perf_counter()
    results = run_selfcheck(corrupt=args.corrupt)
    elapsed = time.perf_counter() - start
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        detail = f" ({res.detail})" if res.detail else ""
        print(f"{status} {res.name}{detail}")
        failed += 0 if res.passed else 1
    if elapsed > 60:
        print(f"warning: selfcheck took {elapsed:.1f}s (> 60s budget)", file=sys.stderr)
    return EXIT_DATA if failed else EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedca", description=__doc__)
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads for data-parallel scans (default: machine parallelism; "
             "1 gives identical results)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and convert a JSONL embedding file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=1024)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("cluster", help="seeded k-means over a store")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_cluster)

    p = sub.add_parser("partition", help="split a store into per-client local sets")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=["dirichlet", "iid", "distinct"], required=True)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--per-client", dest="per_client", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--label-clusters", dest="label_clusters", type=int, default=100,
                   help="pseudo-label cluster count for dirichlet/distinct modes")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("select", help="server-side center selection")
    p.add_argument("--centers", nargs="+", required=True,
                   help="one centers store per client, in client order")
    p.add_argument("--mode", choices=["greedy", "beam", "brute"], default="greedy")
    p.add_argument("--width", type=int, default=64, help="beam width")
    p.add_argument("--reference", default="call",
                   help="'call' scores against the pooled candidates; otherwise a store path")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--budget", type=int, default=DEFAULT_BRUTE_BUDGET)
    p.add_argument("--per-client-slots", dest="per_client_slots", action="store_true",
                   help="restrict slot i's replacements to client i's own candidates")
    p.add_argument("--literal-termination", dest="literal_termination", action="store_true",
                   help="stop at the first slot whose scan finds no improvement")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("augment", help="retrieve augmented sets from a public pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--selection", help="selection.json (feddca strategy)")
    p.add_argument("--centers", nargs="+", help="centers stores (direct strategy)")
    p.add_argument("--clients", type=int, help="client count (random strategy)")
    p.add_argument("--per-client", dest="per_client", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.7,
                   help="similarity threshold for the feddca strategy; hits above it "
                        "are excluded (values above 1 disable filtering)")
    p.add_argument("--strategy", choices=["feddca", "direct", "random"], default="feddca")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("metrics", help="coverage, ICACS, RUAI, communication accounting")
    p.add_argument("--domain", required=True, help="domain reference store")
    p.add_argument("--universe", required=True, help="store resolving every id")
    p.add_argument("--plan", required=True)
    p.add_argument("--augsets", required=True)
    p.add_argument("--xi", type=int, default=10, help="centers per client for upload accounting")
    p.add_argument("--selection", help="selection.json, to report convergence passes")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_metrics)

    p = sub.add_parser("run", help="one seeded end-to-end protocol run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="runs directory")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="heterogeneity sweep over beta values")
    p.add_argument("--config", required=True)
    p.add_argument("--betas", default="0.01,0.1,1,10")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("compare", help="same data and seed, varying strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--strategies", default="feddca,direct,random")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("oracle", help="exact or beam-search selection baselines")
    p.add_argument("oracle_mode", choices=["brute", "beam"])
    p.add_argument("--centers", nargs="+", required=True)
    p.add_argument("--reference", default="call")
    p.add_argument("--widths", default="256,512,1024,2048", help="comma list of beam widths")
    p.add_argument("--budget", type=int, default=DEFAULT_BRUTE_BUDGET)
    p.add_argument("--greedy", help="greedy selection.json for the approximation ratio")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("selfcheck", help="run the bundled property suite")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=_cmd_selfcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_thread_count(args.threads)
    try:
        return args.handler(args)
    except BudgetExceededError as exc:
        print(f"fedca: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (FedcaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"fedca: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        set_thread_count(None)


if __name__ == "__main__":
    sys.exit(main())
