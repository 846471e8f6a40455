from __future__ import annotations

import numpy as np
import pytest

from attralign import prepare, synth
from attralign.data import save_dataset
from attralign.gateway import ProviderConfig
from attralign.harness import EvalPlan, LlmTarget
from attralign.models import GbdtParams, fit_gbdt, save_model
from attralign.models.gbdt import GbdtModel, Tree
from attralign.models.logistic import fit_logistic
from attralign.schema import bundled_schema_path

CORPUS_SEED = 20_240_101
PREP_SEED = 7


@pytest.fixture(scope="session")
def corpus_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "loans.csv"
    synth.write_corpus(path, n_rows=10_000, seed=CORPUS_SEED)
    return path


@pytest.fixture(scope="session")
def prepared(corpus_csv, tmp_path_factory):
    """Encoded synthetic corpus with split and imputation applied, persisted."""
    ds, schema, split, report = prepare(
        corpus_csv, bundled_schema_path("synthetic"), ratio=0.7, seed=PREP_SEED
    )
    out = tmp_path_factory.mktemp("dataset") / "prep"
    save_dataset(ds, schema, out, split=split, prep_report=report)
    return {"ds": ds, "schema": schema, "split": split, "report": report, "dir": out}


@pytest.fixture(scope="session")
def logistic_model(prepared):
    ds, split = prepared["ds"], prepared["split"]
    return fit_logistic(ds.matrix[split.train_idx], ds.labels[split.train_idx], 1.0)


@pytest.fixture(scope="session")
def gbdt_model(prepared):
    ds, split = prepared["ds"], prepared["split"]
    params = GbdtParams(n_rounds=40, learning_rate=0.15, max_depth=3)
    return fit_gbdt(ds.matrix[split.train_idx], ds.labels[split.train_idx], params)


@pytest.fixture(scope="session")
def model_files(prepared, logistic_model, gbdt_model, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    save_model(logistic_model, out / "logistic.json")
    save_model(gbdt_model, out / "gbdt.json")
    return {"logistic": out / "logistic.json", "gbdt": out / "gbdt.json"}


def make_plan(
    prepared,
    model_files,
    providers: dict[str, ProviderConfig],
    llms: list[LlmTarget],
    model_tags: list[str] = ("logistic",),
    **overrides,
) -> EvalPlan:
    kwargs = dict(
        data_dir=str(prepared["dir"]),
        models=[{"tag": tag, "path": str(model_files[tag])} for tag in model_tags],
        llms=llms,
        providers=providers,
        per_cell=50,
        threshold=0.5,
        seed=11,
        retry_base_delay=0.0,
    )
    kwargs.update(overrides)
    return EvalPlan(**kwargs)


def bot_plan(prepared, model_files, bot: str, bot_seed: int = 0, **overrides) -> EvalPlan:
    name = bot.replace("_", "-")
    return make_plan(
        prepared,
        model_files,
        providers={name: ProviderConfig(name=name, bot=bot, bot_seed=bot_seed)},
        llms=[LlmTarget(provider=name, model=f"{name}-1")],
        **overrides,
    )


def build_tree(nodes: list[dict]) -> Tree:
    """Hand-build a tree from per-node dicts for fixture forests.

    Internal node: {"feature", "threshold", "left", "right", "cover"};
    leaf: {"value", "cover"}.
    """
    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int32)
    threshold = np.zeros(n)
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    value = np.zeros(n)
    cover = np.zeros(n)
    for i, node in enumerate(nodes):
        cover[i] = node["cover"]
        if "feature" in node:
            feature[i] = node["feature"]
            threshold[i] = node["threshold"]
            left[i] = node["left"]
            right[i] = node["right"]
        else:
            value[i] = node["value"]
    return Tree(feature=feature, threshold=threshold, left=left, right=right,
                value=value, cover=cover)


def random_forest(rng: np.random.Generator, m: int, n_trees: int, max_depth: int) -> GbdtModel:
    """Random structurally-valid forest: positive covers, children sum to parent."""

    def grow_tree():
        nodes: list[dict] = []

        def grow(depth: int, cover: float) -> int:
            idx = len(nodes)
            nodes.append({})
            if depth < max_depth and cover >= 2 and rng.random() < 0.85:
                cl = float(np.clip(round(cover * rng.uniform(0.2, 0.8)), 1, cover - 1))
                spec = {
                    "feature": int(rng.integers(0, m)),
                    "threshold": float(rng.normal()),
                    "cover": cover,
                }
                left = grow(depth + 1, cl)
                right = grow(depth + 1, cover - cl)
                spec["left"], spec["right"] = left, right
                nodes[idx] = spec
            else:
                nodes[idx] = {"value": float(rng.normal()), "cover": cover}
            return idx

        grow(0, float(rng.integers(50, 500)))
        return build_tree(nodes)

    trees = [grow_tree() for _ in range(n_trees)]
    return GbdtModel(
        trees=trees,
        learning_rate=1.0,
        base_score=float(rng.normal()),
        n_rounds=n_trees,
        n_features=m,
    )
