"""Report emission: delimited tables, a markdown digest, and figures.

Every output is a pure function of the persisted records (plus the optional
model-metrics file), so regenerating a report from the same records is
byte-identical. Layouts mirror the four reporting shapes: model metrics,
non-perfect overlap listing, non-perfect tau counts, and the autonomous-mode
overlap grid.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .alignment import AlignmentScore, summarize

_FIG_DPI = 120


def _score_of(record: dict) -> AlignmentScore | None:
    doc = record.get("scores")
    if doc is None:
        return None
    return AlignmentScore(
        overlap_at_k={int(k): v for k, v in doc["overlap"].items()},
        tau_at_k={int(k): v for k, v in doc["tau"].items()},
        k_values=list(doc["k_values"]),
    )


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.10g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _arms(records: list[dict]) -> list[tuple[str, str, str]]:
    seen = sorted({(r["base_model"], r["mode"], r["llm"]) for r in records})
    return seen


def _grouped_scores(records: list[dict]) -> dict[tuple[str, str, str], list[AlignmentScore]]:
    by_arm: dict[tuple[str, str, str], list[AlignmentScore]] = defaultdict(list)
    for r in records:
        score = _score_of(r)
        if score is not None:
            by_arm[(r["base_model"], r["mode"], r["llm"])].append(score)
    return by_arm


def write_report(
    records: list[dict],
    out_dir: str | Path,
    model_metrics: list[dict] | None = None,
) -> list[Path]:
    """Emit all applicable report files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    md: list[str] = ["# Evaluation report", ""]

    if model_metrics:
        written += _model_metrics_outputs(model_metrics, out, md)

    rq1 = [r for r in records if r["mode"] == "translator"]
    rq2 = [r for r in records if r["mode"] in ("zero_shot", "few_shot")]
    if rq1:
        written += _rq1_outputs(rq1, out, md)
    if rq2:
        written += _rq2_outputs(rq2, out, md)

    summary = _summary_doc(records, model_metrics)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    written.append(summary_path)

    md_path = out / "report.md"
    md_path.write_text("\n".join(md) + "\n", encoding="utf-8")
    written.append(md_path)
    return written


def _model_metrics_outputs(metrics: list[dict], out: Path, md: list[str]) -> list[Path]:
    csv_path = out / "model_metrics.csv"
    rows = [
        [m["model"], _fmt(m["pr_auc"]), _fmt(m["macro_f1"]), _fmt(m["ks"] * 100), _fmt(m["threshold"])]
        for m in metrics
    ]
    _write_csv(csv_path, ["model", "pr_auc", "macro_f1", "ks_x100", "threshold"], rows)

    md.append("## Model performance")
    md.append("")
    md.append("| Model | PR-AUC | Macro-F1 | KS |")
    md.append("|---|---|---|---|")
    for m in metrics:
        md.append(
            f"| {m['model']} | {m['pr_auc']:.2f} | {m['macro_f1']:.2f} | {m['ks'] * 100:.2f} |"
        )
    md.append("")

    fig, ax = plt.subplots(figsize=(6, 3.2))
    names = [m["model"] for m in metrics]
    x = np.arange(len(names))
    width = 0.27
    ax.bar(x - width, [m["pr_auc"] for m in metrics], width, label="PR-AUC")
    ax.bar(x, [m["macro_f1"] for m in metrics], width, label="Macro-F1")
    ax.bar(x + width, [m["ks"] for m in metrics], width, label="KS")
    ax.set_xticks(x, names)
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.set_title("Baseline model metrics")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig_path = out / "model_metrics.png"
    fig.savefig(fig_path, dpi=_FIG_DPI)
    plt.close(fig)
    return [csv_path, fig_path]


def _rq1_outputs(records: list[dict], out: Path, md: list[str]) -> list[Path]:
    by_arm = _grouped_scores(records)
    if not by_arm:
        return []
    arms = _arms(records)
    k_values = sorted({k for s in next(iter(by_arm.values())) for k in s.k_values})

    overlap_rows: list[list] = []
    tau_rows: list[list] = []
    for base, mode, llm in arms:
        scores = by_arm.get((base, mode, llm), [])
        if not scores:
            continue
        for k in k_values:
            ov = summarize(scores, k, "overlap")
            if ov.n_nonperfect > 0:
                bad = [s.overlap_at_k[k] for s in scores if s.overlap_at_k[k] < 1.0]
                overlap_rows.append(
                    [base, llm, k, ov.n_nonperfect,
                     _fmt(ov.mean_of_nonperfect), _fmt(min(bad)), _fmt(max(bad))]
                )
            tau = summarize(scores, k, "tau")
            bad_tau = [
                v for s in scores if (v := s.tau_at_k.get(k)) is not None and v < 1.0
            ]
            tau_rows.append(
                [base, llm, k, tau.n_nonperfect,
                 _fmt(sum(bad_tau) / len(bad_tau)) if bad_tau else ""]
            )

    overlap_path = out / "rq1_overlap_nonperfect.csv"
    _write_csv(
        overlap_path,
        ["base_model", "llm", "k", "count", "mean_nonperfect", "min", "max"],
        overlap_rows,
    )
    tau_path = out / "rq1_tau_nonperfect.csv"
    _write_csv(tau_path, ["base_model", "llm", "k", "count", "mean_nonperfect"], tau_rows)

    md.append("## Translator mode: non-perfect overlap instances")
    md.append("")
    if overlap_rows:
        md.append("| Base model | LLM | Metric | Number | Mean (min,max) |")
        md.append("|---|---|---|---|---|")
        for base, llm, k, count, mean, lo, hi in overlap_rows:
            md.append(
                f"| {base} | {llm} | Overlap@{k} | {count} | "
                f"{float(mean):.2f} ({float(lo):.2f},{float(hi):.2f}) |"
            )
    else:
        md.append("All instances achieved perfect top-K overlap.")
    md.append("")

    md.append("## Translator mode: number (mean) of non-perfect Kendall tau")
    md.append("")
    md.append("| Base model | LLM | " + " | ".join(f"Top-{k}" for k in k_values) + " |")
    md.append("|---|---|" + "|".join("---" for _ in k_values) + "|")
    tau_by_arm: dict[tuple[str, str], dict[int, tuple[int, str]]] = defaultdict(dict)
    for base, llm, k, count, mean in tau_rows:
        tau_by_arm[(base, llm)][k] = (count, mean)
    for (base, llm), cells in sorted(tau_by_arm.items()):
        parts = []
        for k in k_values:
            count, mean = cells.get(k, (0, ""))
            parts.append(f"{count} ({float(mean):.2f})" if mean else str(count))
        md.append(f"| {base} | {llm} | " + " | ".join(parts) + " |")
    md.append("")

    fig, ax = plt.subplots(figsize=(7, 3.4))
    labels = sorted(tau_by_arm)
    x = np.arange(len(labels))
    width = 0.8 / max(len(k_values), 1)
    for i, k in enumerate(k_values):
        counts = [tau_by_arm[a].get(k, (0, ""))[0] for a in labels]
        ax.bar(x + (i - (len(k_values) - 1) / 2) * width, counts, width, label=f"Top-{k}")
    ax.set_xticks(x, [f"{b}\n{l}" for b, l in labels], fontsize=7)
    ax.set_ylabel("non-perfect tau count")
    ax.set_title("Translator mode: order deviations by cutoff")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig_path = out / "rq1_tau_nonperfect.png"
    fig.savefig(fig_path, dpi=_FIG_DPI)
    plt.close(fig)
    return [overlap_path, tau_path, fig_path]


def _rq2_outputs(records: list[dict], out: Path, md: list[str]) -> list[Path]:
    by_arm = _grouped_scores(records)
    if not by_arm:
        return []
    arms = _arms(records)
    k_values = sorted({k for s in next(iter(by_arm.values())) for k in s.k_values})

    rows: list[list] = []
    for base, mode, llm in arms:
        scores = by_arm.get((base, mode, llm), [])
        if not scores:
            continue
        for k in k_values:
            ov = summarize(scores, k, "overlap")
            rows.append([base, mode, llm, k, _fmt(ov.mean), _fmt(ov.min), _fmt(ov.max)])

    csv_path = out / "rq2_overlap.csv"
    _write_csv(csv_path, ["base_model", "mode", "llm", "k", "mean", "min", "max"], rows)

    md.append("## Autonomous modes: mean (min,max) Overlap@K")
    md.append("")
    for base in sorted({r[0] for r in rows}):
        md.append(f"### Base model: {base}")
        md.append("")
        md.append("| Mode | LLM | " + " | ".join(f"Overlap@{k}" for k in k_values) + " |")
        md.append("|---|---|" + "|".join("---" for _ in k_values) + "|")
        arm_rows = defaultdict(dict)
        for b, mode, llm, k, mean, lo, hi in rows:
            if b == base:
                arm_rows[(mode, llm)][k] = (mean, lo, hi)
        for (mode, llm), cells in sorted(arm_rows.items()):
            parts = [
                f"{float(cells[k][0]):.2f} ({float(cells[k][1]):.2f},{float(cells[k][2]):.2f})"
                for k in k_values
            ]
            md.append(f"| {mode} | {llm} | " + " | ".join(parts) + " |")
        md.append("")

    fig, ax = plt.subplots(figsize=(7.5, 3.4))
    labels = sorted({(r[0], r[1], r[2]) for r in rows})
    x = np.arange(len(labels))
    width = 0.8 / max(len(k_values), 1)
    table = {(r[0], r[1], r[2], r[3]): (float(r[4]), float(r[5]), float(r[6])) for r in rows}
    for i, k in enumerate(k_values):
        means = [table[(b, m, l, k)][0] for b, m, l in labels]
        los = [means[j] - table[(b, m, l, k)][1] for j, (b, m, l) in enumerate(labels)]
        his = [table[(b, m, l, k)][2] - means[j] for j, (b, m, l) in enumerate(labels)]
        ax.bar(
            x + (i - (len(k_values) - 1) / 2) * width, means, width,
            yerr=[los, his], capsize=2, error_kw={"linewidth": 0.8}, label=f"K={k}",
        )
    ax.set_xticks(x, [f"{b}\n{m}\n{l}" for b, m, l in labels], fontsize=6)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("Overlap@K")
    ax.set_title("Autonomous modes: overlap with reference rankings")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig_path = out / "rq2_overlap.png"
    fig.savefig(fig_path, dpi=_FIG_DPI)
    plt.close(fig)
    return [csv_path, fig_path]


def _summary_doc(records: list[dict], model_metrics: list[dict] | None) -> dict:
    by_arm = _grouped_scores(records)
    arms_doc = []
    for (base, mode, llm), scores in sorted(by_arm.items()):
        k_values = sorted({k for s in scores for k in s.k_values})
        per_k = {}
        for k in k_values:
            ov = summarize(scores, k, "overlap")
            entry = {
                "overlap_mean": ov.mean,
                "overlap_min": ov.min,
                "overlap_max": ov.max,
                "overlap_n_nonperfect": ov.n_nonperfect,
            }
            tau = summarize(scores, k, "tau") if k >= 2 else None
            if tau is not None and tau.n_defined:
                entry.update(
                    {
                        "tau_mean": tau.mean,
                        "tau_n_defined": tau.n_defined,
                        "tau_n_nonperfect": tau.n_nonperfect,
                    }
                )
            per_k[str(k)] = entry
        arms_doc.append(
            {
                "base_model": base,
                "mode": mode,
                "llm": llm,
                "n_records": len(scores),
                "by_k": per_k,
            }
        )
    doc = {"n_records": len(records), "arms": arms_doc}
    if model_metrics:
        doc["model_metrics"] = model_metrics
    n_errors = sum(1 for r in records if r.get("error"))
    doc["n_errors"] = n_errors
    return doc
