"""Prompt rendering and reply parsing for the three protocol modes.

Templates live as versioned text assets with ``${slot}`` substitution. All
formatting is fixed so identical inputs render byte-identical prompts:
probabilities print with 4 decimals, integral numbers with thousands
separators and no decimals, other numbers with thousands separators and 2
decimals. Prompts always speak in original (grouped) feature names with
human-readable categorical levels, never encoded dummy names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from string import Template

import numpy as np

from .attribution import RankedExplanation
from .errors import PromptError, UnparseableReplyError

TEMPLATE_VERSION = "1"
MODES = ("translator", "zero_shot", "few_shot")

# Section headings are load-bearing: synthetic bot transports locate these
# blocks when composing replies, so tests catch any drift between template
# text and parser expectations.
FEATURE_HEADING = "Applicant features:"
REFERENCE_HEADING = "Reference feature ranking (most important first):"

_TEMPLATE_DIR = Path(__file__).parent / "templates"
_RANK_LINE = re.compile(r"^\s*(\d+)\.\s+(.*\S)\s*$")


@dataclass(frozen=True)
class InstanceContext:
    instance_id: int
    feature_values: dict[str, object]  # original feature -> display value
    observed_y: int
    predicted_p: float
    base_model: str


@dataclass(frozen=True)
class Demonstration:
    ctx: InstanceContext
    reference: RankedExplanation


@dataclass(frozen=True)
class PromptSpec:
    mode: str
    k_out: int
    rendered_text: str
    reference: list[str] | None = None  # translator only
    demo_ids: tuple[int, ...] = ()  # few_shot only


@dataclass(frozen=True)
class ParsedRanking:
    features: list[str]
    violations: list[dict[str, str]]


def format_value(value: object) -> str:
    """Deterministic human-readable rendering of one feature value."""
    if isinstance(value, str):
        return value
    v = float(value)
    if v == int(v) and abs(v) < 1e15:
        return f"{int(v):,d}"
    return f"{v:,.2f}"


def _feature_table(ctx: InstanceContext) -> str:
    return "\n".join(f"- {name}: {format_value(v)}" for name, v in ctx.feature_values.items())


def render_numbered(names: list[str]) -> str:
    return "\n".join(f"{i}. {name}" for i, name in enumerate(names, start=1))


def _load_template(mode: str) -> Template:
    return Template((_TEMPLATE_DIR / f"{mode}.txt").read_text(encoding="utf-8"))


def _common_slots(ctx: InstanceContext, k_out: int) -> dict[str, str]:
    return {
        "base_model": ctx.base_model,
        "feature_table": _feature_table(ctx),
        "outcome": str(ctx.observed_y),
        "probability": f"{ctx.predicted_p:.4f}",
        "k_out": str(k_out),
    }


def build_translator_prompt(
    ctx: InstanceContext, ref: RankedExplanation, k_out: int
) -> PromptSpec:
    """Reference-conditioned prompt: the full ranking appears verbatim."""
    m = len(ctx.feature_values)
    if len(ref.names) != m or set(ref.names) != set(ctx.feature_values):
        raise PromptError("reference ranking must cover exactly the instance features")
    if k_out > m:
        raise PromptError(f"k_out={k_out} exceeds the {m} available features")
    text = _load_template("translator").substitute(
        reference_block=render_numbered(ref.names),
        **_common_slots(ctx, k_out),
    )
    return PromptSpec(
        mode="translator", k_out=k_out, rendered_text=text, reference=list(ref.names)
    )


def build_zero_shot_prompt(ctx: InstanceContext, k_out: int) -> PromptSpec:
    if k_out > len(ctx.feature_values):
        raise PromptError(f"k_out={k_out} exceeds the available features")
    text = _load_template("zero_shot").substitute(**_common_slots(ctx, k_out))
    return PromptSpec(mode="zero_shot", k_out=k_out, rendered_text=text)


def build_few_shot_prompt(
    ctx: InstanceContext, demos: list[Demonstration], k_out: int
) -> PromptSpec:
    if len(demos) != 2:
        raise PromptError(f"need exactly 2 demonstrations, got {len(demos)}")
    for demo in demos:
        if demo.ctx.instance_id == ctx.instance_id:
            raise PromptError("demonstration collides with the target instance")
        if demo.ctx.base_model != ctx.base_model:
            raise PromptError("demonstration rankings must come from the same base model")
    blocks = []
    for i, demo in enumerate(demos, start=1):
        blocks.append(
            f"Example {i}:\n\n"
            f"{FEATURE_HEADING}\n{_feature_table(demo.ctx)}\n\n"
            f"Observed outcome: {demo.ctx.observed_y} (1 = charged off, 0 = fully paid)\n"
            f"Predicted probability of default: {demo.ctx.predicted_p:.4f}\n\n"
            f"{REFERENCE_HEADING}\n{render_numbered(demo.reference.top(k_out))}\n"
        )
    text = _load_template("few_shot").substitute(
        demo_blocks="\n".join(blocks),
        **_common_slots(ctx, k_out),
    )
    return PromptSpec(
        mode="few_shot",
        k_out=k_out,
        rendered_text=text,
        demo_ids=tuple(d.ctx.instance_id for d in demos),
    )


def select_demonstrations(
    pool_ids: np.ndarray, labels: np.ndarray, probabilities: np.ndarray, seed: int = 0
) -> tuple[int, int]:
    """Pick one observed-default and one observed-paid demonstration.

    Each is the pool instance its base model scores most confidently toward
    its true class; ties break to the lower instance id. The policy is fully
    deterministic; ``seed`` is accepted for manifest symmetry only.
    """
    pool_ids = np.asarray(pool_ids)
    labels = np.asarray(labels)
    probabilities = np.asarray(probabilities, dtype=float)
    chosen: dict[int, int] = {}
    for cls in (1, 0):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            raise PromptError(f"demonstration pool has no instances of class {cls}")
        conf = probabilities[members] if cls == 1 else 1.0 - probabilities[members]
        best = conf.max()
        tied = members[conf == best]
        chosen[cls] = int(pool_ids[tied].min())
    return chosen[1], chosen[0]


def parse_ranking(text: str, vocabulary: list[str], k_out: int) -> ParsedRanking:
    """Recover a validated ranking from an LLM reply.

    Accepts the first-to-last span of ``<rank>. <name>`` lines; prose before
    and after the span is ignored. Inside the span, unknown names and
    duplicates are recorded as violations and skipped, non-blank lines that
    do not parse are recorded as malformed, and the accepted list truncates
    to ``k_out`` (a shortfall is recorded as ``truncated``).
    """
    vocab = set(vocabulary)
    lines = text.splitlines()
    matches = [(i, _RANK_LINE.match(line)) for i, line in enumerate(lines)]
    hits = [i for i, m in matches if m]
    if not hits:
        raise UnparseableReplyError("reply contains no ranking lines")
    accepted: list[str] = []
    violations: list[dict[str, str]] = []
    for i in range(hits[0], hits[-1] + 1):
        m = matches[i][1]
        if m is None:
            if lines[i].strip():
                violations.append({"kind": "malformed_line", "detail": lines[i].strip()})
            continue
        name = m.group(2)
        if name not in vocab:
            violations.append({"kind": "unknown_feature", "detail": name})
        elif name in accepted:
            violations.append({"kind": "duplicate", "detail": name})
        else:
            accepted.append(name)
    if not accepted:
        raise UnparseableReplyError("no ranking line named a known feature")
    if len(accepted) < k_out:
        violations.append(
            {"kind": "truncated", "detail": f"{len(accepted)} of {k_out} requested"}
        )
    return ParsedRanking(features=accepted[:k_out], violations=violations)
