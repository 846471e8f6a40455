"""Synthetic transports with known analytic behavior.

Bots make the whole pipeline testable offline: a bot sees exactly what a
real model would (the rendered prompt) plus an out-of-band aux block for the
oracles that need ground truth a prompt cannot carry. The echo and scrambler
bots read the reference ranking back out of the prompt text, so an
end-to-end run through them exercises prompt rendering and reply parsing,
not just the scorer.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .errors import PlanError, TransportError
from .gateway import ChatRequest, ChatResponse, ProviderConfig, RequestAux
from .prompts import FEATURE_HEADING, REFERENCE_HEADING, render_numbered

_RANK_LINE = re.compile(r"^\s*\d+\.\s+(.*\S)\s*$")
_TABLE_LINE = re.compile(r"^- (.+?): ")


def _prompt_text(request: ChatRequest) -> str:
    return "\n".join(content for _, content in request.messages)


def _numbered_block_after(text: str, heading: str) -> list[str]:
    """Names in the numbered list under the last occurrence of a heading."""
    lines = text.splitlines()
    starts = [i for i, line in enumerate(lines) if line.strip() == heading]
    if not starts:
        raise TransportError(f"prompt has no {heading!r} section", retryable=False)
    names: list[str] = []
    for line in lines[starts[-1] + 1:]:
        m = _RANK_LINE.match(line)
        if m is None:
            break
        names.append(m.group(1))
    if not names:
        raise TransportError(f"empty block under {heading!r}", retryable=False)
    return names


def _feature_names(text: str) -> list[str]:
    lines = text.splitlines()
    starts = [i for i, line in enumerate(lines) if line.strip() == FEATURE_HEADING]
    if not starts:
        raise TransportError("prompt has no feature table", retryable=False)
    names: list[str] = []
    for line in lines[starts[-1] + 1:]:
        m = _TABLE_LINE.match(line)
        if m is None:
            break
        names.append(m.group(1))
    if not names:
        raise TransportError("empty feature table", retryable=False)
    return names


def _k_out(aux: RequestAux | None, fallback: int) -> int:
    return aux.k_out if aux is not None and aux.k_out > 0 else fallback


def _reply(request: ChatRequest, names: list[str]) -> ChatResponse:
    return ChatResponse(
        text=render_numbered(names), status=200,
        provider=request.provider, model=request.model,
    )


class EchoBot:
    """Replies with the prompt's reference ranking verbatim (top k_out)."""

    def __init__(self, cfg: ProviderConfig):
        self._cfg = cfg

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        ref = _numbered_block_after(_prompt_text(request), REFERENCE_HEADING)
        return _reply(request, ref[: _k_out(aux, len(ref))])


class ScramblerBot:
    """Replies with the prompt's reference ranking fully reversed."""

    def __init__(self, cfg: ProviderConfig):
        self._cfg = cfg

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        ref = _numbered_block_after(_prompt_text(request), REFERENCE_HEADING)
        return _reply(request, ref[::-1][: _k_out(aux, len(ref))])


class RandomPermutationBot:
    """Uniform random permutation of the feature vocabulary, per request.

    The permutation is a pure function of (bot_seed, request fingerprint),
    so record/replay and resumed runs see identical replies.
    """

    def __init__(self, cfg: ProviderConfig):
        self._seed = cfg.bot_seed

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        vocab = _feature_names(_prompt_text(request))
        digest = hashlib.sha256(
            f"{self._seed}:{request.fingerprint()}".encode()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        order = [vocab[i] for i in rng.permutation(len(vocab))]
        return _reply(request, order[: _k_out(aux, len(order))])


class ConstantListBot:
    """The same features every time: the vocabulary in lexicographic order."""

    def __init__(self, cfg: ProviderConfig):
        self._cfg = cfg

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        vocab = sorted(_feature_names(_prompt_text(request)))
        return _reply(request, vocab[: _k_out(aux, len(vocab))])


class ReferenceLeakBot:
    """Replies with the true reference ranking even when the prompt omits it.

    Upper-bound sanity check for autonomous modes; requires the aux block.
    """

    def __init__(self, cfg: ProviderConfig):
        self._cfg = cfg

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        if aux is None or not aux.reference:
            raise TransportError("reference-leak bot needs aux reference", retryable=False)
        return _reply(request, list(aux.reference)[: _k_out(aux, len(aux.reference))])


BOT_KINDS = {
    "echo": EchoBot,
    "scrambler": ScramblerBot,
    "random_permutation": RandomPermutationBot,
    "constant_list": ConstantListBot,
    "reference_leak": ReferenceLeakBot,
}


def make_bot(cfg: ProviderConfig):
    try:
        return BOT_KINDS[cfg.bot](cfg)
    except KeyError:
        raise PlanError(f"unknown bot kind {cfg.bot!r}") from None
