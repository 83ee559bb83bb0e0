"""Deterministic simulation of the augmentation protocol rounds.

One run executes partition -> per-client clustering -> (strategy-dependent)
center selection -> augmentation -> metrics, then emits the round-sampling
schedule. No model training happens here: rounds exist to model client
sampling and message accounting only.

Message choreography (all setup messages are round 0):

* one ``UploadCenters`` per client (payload: xi * dim floats),
* one ``SelectionDone`` (payload: selected floats; empty for the baselines),
* one ``AugmentedSet`` per client (payload: record count),
* then one ``RoundSample`` per round naming the participating clients.

Runs are replayable: the serialized log is a pure function of the config and
the input stores (wall-clock timings are kept out of the deterministic
lines). RNG streams are derived from the run seed with distinct labels, so
e.g. changing the round count never perturbs the partition.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import (
    RetrievalResult,
    augments_to_json,
    direct_retrieval_augment,
    feddca_augment,
    random_sampling_augment,
)
from .clustering import assign_labels, kmeans
from .errors import ValidationError
from .metrics import MetricsReport, comm_cost, cross_client_coverage, icacs, ruai
from .partition import (
    PartitionPlan,
    dirichlet_partition,
    distinct_cluster_partition,
    iid_partition,
)
from .selection import CenterSelection, SelectionProblem, greedy_select
from .store import EmbeddingStore, ingest_binary

STRATEGIES = ("feddca", "direct", "random")

# labels for seed-stream derivation; adding streams must not renumber old ones
_STREAM_PSEUDO_LABELS = 1
_STREAM_PARTITION = 2
_STREAM_CLIENT_KMEANS = 3
_STREAM_SELECTION = 4
_STREAM_AUGMENT = 5
_STREAM_ICACS = 6
_STREAM_ROUNDS = 7

_KIND_PRIORITY = {"UploadCenters": 0, "SelectionDone": 1, "AugmentedSet": 2, "RoundSample": 3}


def derive_seed(seed: int, *labels: int) -> int:
    """A labeled child seed, stable across platforms and runs."""
    return int(np.random.SeedSequence([seed, *labels]).generate_state(1)[0])


@dataclass(frozen=True)
class ProtocolMessage:
    kind: str
    round: int
    client: int | None
    payload_size: int
    payload_ref: str | None = None
    clients: tuple[int, ...] | None = None

    def sort_key(self) -> tuple:
        return (self.round, _KIND_PRIORITY[self.kind], -1 if self.client is None else self.client)

    def to_json_dict(self) -> dict:
        obj: dict = {
            "kind": self.kind,
            "round": self.round,
            "client": self.client,
            "payload_size": self.payload_size,
        }
        if self.payload_ref is not None:
            obj["payload_ref"] = self.payload_ref
        if self.clients is not None:
            obj["clients"] = list(self.clients)
        return obj


@dataclass
class ExperimentConfig:
    """Everything one seeded run depends on. Serialized field-for-field."""

    pool_path: str
    domain_label: str
    n_clients: int = 10
    per_client_local: int = 100
    per_client_aug: int = 1000
    xi: int = 10
    alpha: float | None = 0.7
    beta_or_mode: float | str = 0.1
    rounds: int = 30
    clients_per_round: int = 2
    seed: int = 42
    strategy: str = "feddca"
    pseudo_label_clusters: int = 100
    version: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.version != 1:
            raise ValidationError(f"unsupported config version {self.version}")
        for name in ("n_clients", "per_client_local", "per_client_aug", "xi",
                     "rounds", "clients_per_round", "pseudo_label_clusters"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.clients_per_round > self.n_clients:
            raise ValidationError("clients_per_round exceeds n_clients")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if isinstance(self.beta_or_mode, str):
            if self.beta_or_mode not in ("iid", "distinct"):
                raise ValidationError(
                    f"beta_or_mode must be a positive number, 'iid', or 'distinct'; "
                    f"got {self.beta_or_mode!r}"
                )
        elif self.beta_or_mode <= 0:
            raise ValidationError("beta_or_mode must be > 0 when numeric")
        if self.xi > self.per_client_local:
            raise ValidationError("xi cannot exceed per_client_local")

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    def config_hash(self) -> str:
        canon = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass
class ExperimentLog:
    """Replayable record of one run; timings are excluded from the replayed lines."""

    config: ExperimentConfig
    messages: list[ProtocolMessage]
    selection: CenterSelection | None
    plan: PartitionPlan
    augsets: list[RetrievalResult]
    metrics: MetricsReport
    timings: dict[str, float] = field(default_factory=dict)
    run_dir: Path | None = None

    def to_lines(self) -> list[str]:
        lines = [json.dumps({"record": "config", "config": self.config.to_json_dict()},
                            sort_keys=True)]
        for msg in self.messages:
            lines.append(json.dumps({"record": "message", **msg.to_json_dict()}, sort_keys=True))
        sel = self.selection.to_json_dict() if self.selection is not None else None
        lines.append(json.dumps({"record": "selection", "selection": sel}, sort_keys=True))
        lines.append(json.dumps({"record": "metrics", **self.metrics.to_json_dict()},
                                sort_keys=True))
        return lines

    def persist(self, out_dir: str | Path) -> Path:
        run_dir = Path(out_dir) / self.config.config_hash()
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "log.jsonl").write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")
        (run_dir / "timing.json").write_text(json.dumps(self.timings, indent=2), encoding="utf-8")
        (run_dir / "plan.json").write_text(
            json.dumps(self.plan.to_json_dict()), encoding="utf-8"
        )
        if self.selection is not None:
            (run_dir / "selection.json").write_text(
                json.dumps(self.selection.to_json_dict()), encoding="utf-8"
            )
        (run_dir / "augsets.json").write_text(
            json.dumps(augments_to_json(self.augsets)), encoding="utf-8"
        )
        self.run_dir = run_dir
        return run_dir


def _partition(config: ExperimentConfig, domain_store: EmbeddingStore) -> PartitionPlan:
    mode = config.beta_or_mode
    if mode == "iid":
        return iid_partition(
            domain_store, config.n_clients, config.per_client_local,
            derive_seed(config.seed, _STREAM_PARTITION),
        )
    k_lab = min(config.pseudo_label_clusters, len(domain_store))
    pseudo = kmeans(
        domain_store.vectors, k_lab, derive_seed(config.seed, _STREAM_PSEUDO_LABELS)
    )
    labels = assign_labels(domain_store.vectors, pseudo)
    if mode == "distinct":
        return distinct_cluster_partition(
            domain_store, labels, config.n_clients, config.per_client_local,
            derive_seed(config.seed, _STREAM_PARTITION),
        )
    return dirichlet_partition(
        domain_store, labels, config.n_clients, config.per_client_local,
        float(mode), derive_seed(config.seed, _STREAM_PARTITION),
    )


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    pool: EmbeddingStore | None = None,
) -> ExperimentLog:
    """Execute one seeded run end to end; persist artifacts when ``out_dir`` given.

    ``pool`` may be passed directly to skip re-reading ``config.pool_path``.
    """
    config.validate()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if pool is None:
        pool = ingest_binary(config.pool_path)
    domain_store = pool.subset_by_domain(config.domain_label)
    if len(domain_store) == 0:
        raise ValidationError(
            f"pool has no records with domain label {config.domain_label!r}"
        )
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    plan = _partition(config, domain_store)
    timings["partition"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    candidates = []
    messages: list[ProtocolMessage] = []
    for k in range(config.n_clients):
        local = domain_store.vectors_for(plan.assignments[k])
        k_eff = min(config.xi, len(local))
        cand = kmeans(
            local, k_eff, derive_seed(config.seed, _STREAM_CLIENT_KMEANS, k), client_id=k
        )
        candidates.append(cand)
        messages.append(ProtocolMessage(
            kind="UploadCenters", round=0, client=k,
            payload_size=cand.k * pool.dim, payload_ref=None,
        ))
    timings["client_clustering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    selection: CenterSelection | None = None
    if config.strategy == "feddca":
        problem = SelectionProblem(candidates_per_client=candidates)
        selection = greedy_select(problem, derive_seed(config.seed, _STREAM_SELECTION))
        sel_payload = len(selection.slots) * pool.dim
    else:
        sel_payload = 0
    messages.append(ProtocolMessage(
        kind="SelectionDone", round=0, client=None,
        payload_size=sel_payload, payload_ref="selection.json" if selection else None,
    ))
    timings["selection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if config.strategy == "feddca":
        augsets = feddca_augment(pool, selection, config.per_client_aug, config.alpha)
    elif config.strategy == "direct":
        augsets = direct_retrieval_augment(pool, candidates, config.per_client_aug)
    else:
        augsets = random_sampling_augment(
            pool, config.n_clients, config.per_client_aug,
            derive_seed(config.seed, _STREAM_AUGMENT),
        )
    # augset i is distributed to client i (slot order for feddca)
    for k, result in enumerate(augsets):
        messages.append(ProtocolMessage(
            kind="AugmentedSet", round=0, client=k,
            payload_size=len(result.hits), payload_ref="augsets.json",
        ))
    timings["augment"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    client_sets = [
        (plan.assignments[k], augsets[k].ids()) for k in range(config.n_clients)
    ]
    domain_cov = cross_client_coverage(domain_store, client_sets, pool)
    icacs_value = None
    if config.n_clients >= 2:
        per_client_vectors = [pool.vectors_for(augsets[k].ids()) for k in range(config.n_clients)]
        icacs_value = icacs(per_client_vectors, seed=derive_seed(config.seed, _STREAM_ICACS))
    upload, download = comm_cost(config.n_clients, config.xi, pool.dim, augsets)
    report = MetricsReport(
        domain_coverage=domain_cov,
        icacs=icacs_value,
        ruai=ruai([augsets[k].ids() for k in range(config.n_clients)]),
        comm_upload_floats=upload,
        comm_download_records=download,
        convergence_passes=selection.passes if selection is not None else 0,
    )
    timings["metrics"] = time.perf_counter() - t0

    rng = np.random.default_rng([config.seed, _STREAM_ROUNDS])
    for r in range(1, config.rounds + 1):
        picked = sorted(
            int(c) for c in rng.choice(config.n_clients, config.clients_per_round, replace=False)
        )
        messages.append(ProtocolMessage(
            kind="RoundSample", round=r, client=None,
            payload_size=config.clients_per_round, clients=tuple(picked),
        ))

    messages.sort(key=ProtocolMessage.sort_key)
    log = ExperimentLog(
        config=config, messages=messages, selection=selection,
        plan=plan, augsets=augsets, metrics=report, timings=timings,
    )
    if out_dir is not None:
        log.persist(out_dir)
    return log


def compare_strategies(
    configs: list[ExperimentConfig],
    pool: EmbeddingStore | None = None,
) -> list[dict]:
    """One metrics row per config; configs must differ only in strategy."""
    if not configs:
        raise ValidationError("no configs to compare")
    base = {k: v for k, v in configs[0].to_json_dict().items() if k != "strategy"}
    for cfg in configs[1:]:
        other = {k: v for k, v in cfg.to_json_dict().items() if k != "strategy"}
        if other != base:
            raise ValidationError("configs must differ only in strategy")
    rows = []
    for cfg in configs:
        log = run_experiment(cfg, pool=pool)
        rows.append({
            "strategy": cfg.strategy,
            "domain_coverage": log.metrics.domain_coverage.value,
            "icacs": log.metrics.icacs,
            "ruai": log.metrics.ruai,
            "comm_upload_floats": log.metrics.comm_upload_floats,
            "comm_download_records": log.metrics.comm_download_records,
            "convergence_passes": log.metrics.convergence_passes,
        })
    return rows


def heterogeneity_sweep(
    base: ExperimentConfig,
    betas: list[float],
    strategies: tuple[str, ...] = STRATEGIES,
    pool: EmbeddingStore | None = None,
) -> list[dict]:
    """A compare_strategies block per beta; rows carry a leading beta column."""
    if not betas:
        raise ValidationError("betas must be nonempty")
    rows = []
    for beta in betas:
        configs = [
            dataclasses.replace(base, beta_or_mode=float(beta), strategy=s)
            for s in strategies
        ]
        for row in compare_strategies(configs, pool=pool):
            rows.append({"beta": beta, **row})
    return rows


def write_rows_csv(rows: list[dict], path: str | Path) -> None:
    import csv

    if not rows:
        raise ValidationError("no rows to write")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
