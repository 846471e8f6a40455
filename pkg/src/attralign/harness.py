"""End-to-end experiment orchestration for the two evaluation protocols.

A plan file names the prepared dataset, trained base models, LLM targets,
prompting modes, K grids, and the sampling recipe. Running a plan produces
one line-delimited record per (instance x base model x LLM x mode), written
incrementally so interrupted record/replay runs resume by fingerprint, then
rewritten in deterministic (instance, arm) order. A manifest captures every
hash and seed needed to reproduce the run byte-identically in replay mode.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from . import __version__
from .alignment import score_rankings
from .attribution import (
    RankedExplanation,
    group_attributions,
    linear_contributions,
    rank_features,
    tree_shap,
)
from .data import EncodedDataset, decode_instance, load_dataset
from .errors import AttralignError, PlanError, UndersizedCellError
from .gateway import ChatRequest, Gateway, ProviderConfig, RequestAux, RetryPolicy
from .models import GbdtModel, LogisticModel, load_model
from .models.metrics import CELLS, confusion_cells
from .prompts import (
    TEMPLATE_VERSION,
    Demonstration,
    InstanceContext,
    build_few_shot_prompt,
    build_translator_prompt,
    build_zero_shot_prompt,
    parse_ranking,
    select_demonstrations,
)

PLAN_FORMAT = "attralign-plan"
PLAN_VERSION = 1
RECORD_SCHEMA_VERSION = 1
RQ1_DEFAULT_K_GRID = (5, 10, 15, 20)
RQ2_DEFAULT_K_GRID = (3, 5, 10)
RQ2_K_OUT = 10  # replies in autonomous modes are capped at the top 10


@dataclass(frozen=True)
class LlmTarget:
    provider: str
    model: str

    @property
    def arm(self) -> str:
        return f"{self.provider}/{self.model}"


@dataclass
class EvalPlan:
    data_dir: str
    models: list[dict]  # {"tag": ..., "path": ...}
    llms: list[LlmTarget]
    providers: dict[str, ProviderConfig]
    modes: list[str] = field(default_factory=list)
    rq1_k_grid: list[int] = field(default_factory=lambda: list(RQ1_DEFAULT_K_GRID))
    rq2_k_grid: list[int] = field(default_factory=lambda: list(RQ2_DEFAULT_K_GRID))
    rq1_k_out: int | None = None  # None means the full feature count
    per_cell: int = 50
    threshold: float = 0.5
    seed: int = 0
    cassette: str | None = None
    max_attempts: int = 5
    retry_base_delay: float = 1.0

    def validate(self) -> None:
        if not self.models or not self.llms:
            raise PlanError("plan needs at least one base model and one LLM target")
        for mode in self.modes:
            if mode not in ("translator", "zero_shot", "few_shot"):
                raise PlanError(f"unknown mode {mode!r}")
        if self.per_cell < 1:
            raise PlanError("per_cell must be >= 1")


def load_plan(path: str | Path) -> tuple[EvalPlan, str]:
    """Parse a plan file; returns the plan and the file's content hash."""
    raw = Path(path).read_bytes()
    doc = json.loads(raw.decode("utf-8"))
    if doc.get("format") != PLAN_FORMAT or doc.get("version") != PLAN_VERSION:
        raise PlanError(f"{path}: not a supported plan file")
    base = Path(path).parent
    providers = {
        p["name"]: ProviderConfig(
            name=p["name"],
            base_url=p.get("base_url"),
            auth_env=p.get("auth_env"),
            max_in_flight=p.get("max_in_flight", 4),
            bot=p.get("bot"),
            bot_seed=p.get("bot_seed", 0),
        )
        for p in doc.get("providers", [])
    }
    sample = doc.get("sample", {})
    plan = EvalPlan(
        data_dir=str(base / doc["data_dir"]),
        models=[{"tag": m["tag"], "path": str(base / m["path"])} for m in doc["models"]],
        llms=[LlmTarget(provider=l["provider"], model=l["model"]) for l in doc["llms"]],
        providers=providers,
        modes=list(doc.get("modes", [])),
        rq1_k_grid=list(doc.get("rq1_k_grid", RQ1_DEFAULT_K_GRID)),
        rq2_k_grid=list(doc.get("rq2_k_grid", RQ2_DEFAULT_K_GRID)),
        rq1_k_out=doc.get("rq1_k_out"),
        per_cell=sample.get("per_cell", 50),
        threshold=sample.get("threshold", 0.5),
        seed=doc.get("seed", 0),
        cassette=str(base / doc["cassette"]) if doc.get("cassette") else None,
        max_attempts=doc.get("max_attempts", 5),
        retry_base_delay=doc.get("retry_base_delay", 1.0),
    )
    plan.validate()
    return plan, hashlib.sha256(raw).hexdigest()


def stratified_sample(
    test_idx: np.ndarray,
    scores: np.ndarray,
    labels: np.ndarray,
    threshold: float,
    per_cell: int = 50,
    seed: int = 0,
) -> dict[str, list[int]]:
    """Uniform per-cell sample of instance ids, keyed by confusion cell.

    ``scores`` and ``labels`` align with ``test_idx``. Raises
    UndersizedCellError naming the first cell that cannot supply its quota.
    """
    cells = confusion_cells(scores, labels, threshold)
    members: dict[str, list[int]] = {c: [] for c in CELLS}
    for idx, cell in zip(test_idx, cells):
        members[cell].append(int(idx))
    sampled: dict[str, list[int]] = {}
    for i, cell in enumerate(CELLS):
        pool = sorted(members[cell])
        if len(pool) < per_cell:
            raise UndersizedCellError(cell, len(pool), per_cell)
        rng = np.random.default_rng([seed, i])
        take = rng.choice(len(pool), size=per_cell, replace=False)
        sampled[cell] = sorted(pool[j] for j in take)
    return sampled


def reference_ranking(model, ds: EncodedDataset, row: int) -> RankedExplanation:
    """Grouped, ranked attribution for one instance under one base model."""
    x = ds.matrix[row]
    if isinstance(model, LogisticModel):
        attr = linear_contributions(model, x)
    elif isinstance(model, GbdtModel):
        attr = tree_shap(model, x)
    else:
        raise TypeError(f"no attribution route for {type(model).__name__}")
    return rank_features(group_attributions(attr, ds.group_index))


@dataclass
class _Task:
    instance_id: int
    cell: str
    base_model: str
    llm: LlmTarget
    mode: str
    k_out: int
    k_grid: list[int]
    prompt_text: str
    reference: list[str]
    vocabulary: list[str]
    demo_ids: tuple[int, ...]

    @property
    def key(self) -> tuple:
        return (self.instance_id, self.base_model, self.llm.arm, self.mode)


def _record_key(doc: dict) -> tuple:
    return (doc["instance_id"], doc["base_model"], doc["llm"], doc["mode"])


def _execute(task: _Task, gateway: Gateway) -> dict:
    request = ChatRequest(
        provider=task.llm.provider,
        model=task.llm.model,
        messages=(("user", task.prompt_text),),
    )
    aux = RequestAux(
        k_out=task.k_out,
        vocabulary=tuple(task.vocabulary),
        reference=tuple(task.reference),
        instance_id=task.instance_id,
    )
    record = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "instance_id": task.instance_id,
        "cell": task.cell,
        "base_model": task.base_model,
        "llm": task.llm.arm,
        "mode": task.mode,
        "k_out": task.k_out,
        "k_grid": task.k_grid,
        "fingerprint": request.fingerprint(),
        "prompt": task.prompt_text,
        "reply": None,
        "parsed": None,
        "violations": [],
        "reference": task.reference,
        "demo_ids": list(task.demo_ids),
        "scores": None,
        "attempts": [],
        "error": None,
    }
    try:
        response, attempts = gateway.complete(request, aux)
        record["reply"] = response.text
        record["attempts"] = attempts
        parsed = parse_ranking(response.text, task.vocabulary, task.k_out)
        record["parsed"] = parsed.features
        record["violations"] = parsed.violations
        score = score_rankings(task.reference, parsed.features, task.k_grid)
        record["scores"] = score.as_dict()
    except AttralignError as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def _build_tasks(plan: EvalPlan, rq: int) -> tuple[list[_Task], dict]:
    ds, schema, split = load_dataset(plan.data_dir)
    if split is None:
        raise PlanError(f"{plan.data_dir}: dataset has no persisted split")
    modes = plan.modes or (["translator"] if rq == 1 else ["zero_shot", "few_shot"])
    if rq == 1 and modes != ["translator"]:
        raise PlanError("RQ1 runs translator mode only")
    if rq == 2 and not set(modes) <= {"zero_shot", "few_shot"}:
        raise PlanError("RQ2 runs zero_shot/few_shot modes only")

    m = len(ds.original_names)
    k_grid = plan.rq1_k_grid if rq == 1 else plan.rq2_k_grid
    k_out = (plan.rq1_k_out or m) if rq == 1 else RQ2_K_OUT

    tasks: list[_Task] = []
    manifest_info: dict = {"samples": {}, "demo_instance_ids": {}}
    for spec in plan.models:
        tag, model = spec["tag"], load_model(spec["path"])
        test_scores = model.predict_proba(ds.matrix[split.test_idx])
        sampled = stratified_sample(
            split.test_idx, test_scores, ds.labels[split.test_idx],
            plan.threshold, plan.per_cell, plan.seed,
        )
        manifest_info["samples"][tag] = sampled

        demos: list[Demonstration] = []
        if "few_shot" in modes:
            train_scores = model.predict_proba(ds.matrix[split.train_idx])
            demo_ids = select_demonstrations(
                split.train_idx, ds.labels[split.train_idx], train_scores, plan.seed
            )
            manifest_info["demo_instance_ids"][tag] = list(demo_ids)
            for row in demo_ids:
                demos.append(
                    Demonstration(
                        ctx=InstanceContext(
                            instance_id=row,
                            feature_values=decode_instance(ds, schema, row),
                            observed_y=int(ds.labels[row]),
                            predicted_p=float(model.predict_proba(ds.matrix[row])),
                            base_model=tag,
                        ),
                        reference=reference_ranking(model, ds, row),
                    )
                )

        for cell, ids in sampled.items():
            for row in ids:
                ctx = InstanceContext(
                    instance_id=row,
                    feature_values=decode_instance(ds, schema, row),
                    observed_y=int(ds.labels[row]),
                    predicted_p=float(model.predict_proba(ds.matrix[row])),
                    base_model=tag,
                )
                ref = reference_ranking(model, ds, row)
                for mode in modes:
                    if mode == "translator":
                        prompt = build_translator_prompt(ctx, ref, k_out)
                    elif mode == "zero_shot":
                        prompt = build_zero_shot_prompt(ctx, k_out)
                    else:
                        prompt = build_few_shot_prompt(ctx, demos, k_out)
                    for llm in plan.llms:
                        tasks.append(
                            _Task(
                                instance_id=row,
                                cell=cell,
                                base_model=tag,
                                llm=llm,
                                mode=mode,
                                k_out=k_out,
                                k_grid=list(k_grid),
                                prompt_text=prompt.rendered_text,
                                reference=ref.names,
                                vocabulary=list(ds.original_names),
                                demo_ids=prompt.demo_ids,
                            )
                        )
    tasks.sort(key=lambda t: t.key)
    return tasks, manifest_info


def _hash_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(
    plan: EvalPlan,
    rq: int,
    transport_mode: str,
    out_dir: str | Path,
    plan_hash: str = "",
    client: httpx.Client | None = None,
    max_workers: int = 4,
) -> list[dict]:
    """Execute an RQ1 or RQ2 plan end to end; returns the sorted records."""
    if rq not in (1, 2):
        raise PlanError(f"rq must be 1 or 2, got {rq}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.jsonl"
    started_at = time.time()

    tasks, manifest_info = _build_tasks(plan, rq)

    cassette = plan.cassette or str(out / "cassette.jsonl")
    gateway = Gateway(
        providers=plan.providers,
        mode=transport_mode,
        cassette_path=cassette if transport_mode != "live" else None,
        retry=RetryPolicy(
            max_attempts=plan.max_attempts,
            base_delay=plan.retry_base_delay,
            jitter_seed=plan.seed,
        ),
        client=client,
    )

    done: dict[tuple, dict] = {}
    if records_path.exists():
        with records_path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    doc = json.loads(line)
                    done[_record_key(doc)] = doc

    pending = [t for t in tasks if t.key not in done]
    write_lock = threading.Lock()

    def worker(task: _Task) -> tuple[tuple, dict]:
        record = _execute(task, gateway)
        with write_lock:
            with records_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        return task.key, record

    if max_workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for key, record in pool.map(worker, pending):
                done[key] = record
    else:
        for task in pending:
            key, record = worker(task)
            done[key] = record

    records = [done[t.key] for t in tasks]
    tmp = records_path.with_suffix(".jsonl.tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    tmp.replace(records_path)

    data_dir = Path(plan.data_dir)
    manifest = {
        "format": "attralign-manifest",
        "version": 1,
        "rq": rq,
        "transport_mode": transport_mode,
        "plan_hash": plan_hash,
        "data_hashes": {
            p.name: _hash_file(p) for p in sorted(data_dir.glob("*.json"))
        } | {
            p.name: _hash_file(p) for p in sorted(data_dir.glob("*.csv"))
        },
        "model_hashes": {m["tag"]: _hash_file(Path(m["path"])) for m in plan.models},
        "seed": plan.seed,
        "threshold": plan.threshold,
        "per_cell": plan.per_cell,
        "demo_instance_ids": manifest_info["demo_instance_ids"],
        "template_version": TEMPLATE_VERSION,
        "package_version": __version__,
        "n_records": len(records),
        "started_at": started_at,
        "finished_at": time.time(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return records


def run_rq1(plan: EvalPlan, transport_mode: str, out_dir: str | Path, **kwargs) -> list[dict]:
    return run_experiment(plan, 1, transport_mode, out_dir, **kwargs)


def run_rq2(plan: EvalPlan, transport_mode: str, out_dir: str | Path, **kwargs) -> list[dict]:
    return run_experiment(plan, 2, transport_mode, out_dir, **kwargs)


def load_records(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "records.jsonl"
    records = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records
