"""Rank-agreement metrics between a reference and a hypothesis ranking.

Both metrics depend only on order, never on attribution magnitudes.
Kendall's tau is evaluated on the intersection of the two top-K sets; with
fewer than two shared items it is undefined and excluded from summaries
rather than imputed. Tau uses integer pair counts divided once, so the
identity cases (+1 identical, -1 reversed) come out exact, not within an
ulp.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AlignmentScore:
    overlap_at_k: dict[int, float]
    tau_at_k: dict[int, float | None]
    k_values: list[int]

    def as_dict(self) -> dict:
        return {
            "overlap": {str(k): v for k, v in self.overlap_at_k.items()},
            "tau": {str(k): v for k, v in self.tau_at_k.items()},
            "k_values": self.k_values,
        }


def overlap_at_k(ref: list[str], hyp: list[str], k: int) -> float:
    """Shared fraction of the two top-K sets.

    A hypothesis shorter than K contributes its full set, so the numerator
    can only shrink.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    if k > len(ref):
        raise ValueError(f"K={k} exceeds reference length {len(ref)}")
    ref_top = set(ref[:k])
    hyp_top = set(hyp[:k])
    return len(ref_top & hyp_top) / k


def kendall_tau_topk(ref: list[str], hyp: list[str], k: int) -> float | None:
    """Tau-a over the induced orderings of the shared top-K items.

    Rankings are strict orders by construction, so no tie correction is
    needed (tau-a equals tau-b here). Returns None when fewer than two items
    are shared.
    """
    if k < 2:
        raise ValueError("K must be >= 2 for tau")
    hyp_top = set(hyp[:k])
    shared = [name for name in ref[:k] if name in hyp_top]
    n = len(shared)
    if n < 2:
        return None
    hyp_pos = {name: i for i, name in enumerate(hyp[:k])}
    b = [hyp_pos[name] for name in shared]  # hyp order induced by ref order
    concordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            if b[j] > b[i]:
                concordant += 1
    pairs = n * (n - 1) // 2
    return (2 * concordant - pairs) / pairs


@dataclass(frozen=True)
class SummaryStats:
    mean: float | None
    min: float | None
    max: float | None
    n_defined: int
    n_nonperfect: int
    mean_of_nonperfect: float | None


def summarize(scores: list[AlignmentScore], k: int, metric: str = "overlap") -> SummaryStats:
    """Statistics over the defined values of one metric at one K.

    Undefined taus are excluded; ``n_nonperfect`` counts values strictly
    below 1. With no defined values the statistics themselves are None.
    """
    if not scores:
        raise ValueError("no scores to summarize")
    if metric == "overlap":
        values = [s.overlap_at_k.get(k) for s in scores]
    elif metric == "tau":
        values = [s.tau_at_k.get(k) for s in scores]
    else:
        raise ValueError(f"unknown metric {metric!r}")
    defined = [v for v in values if v is not None]
    if not defined:
        return SummaryStats(None, None, None, 0, 0, None)
    nonperfect = [v for v in defined if v < 1.0]
    return SummaryStats(
        mean=sum(defined) / len(defined),
        min=min(defined),
        max=max(defined),
        n_defined=len(defined),
        n_nonperfect=len(nonperfect),
        mean_of_nonperfect=(sum(nonperfect) / len(nonperfect)) if nonperfect else None,
    )


def score_rankings(ref: list[str], hyp: list[str], k_values: list[int]) -> AlignmentScore:
    """Overlap and tau at every K in the grid."""
    return AlignmentScore(
        overlap_at_k={k: overlap_at_k(ref, hyp, k) for k in k_values},
        tau_at_k={k: kendall_tau_topk(ref, hyp, k) for k in k_values if k >= 2},
        k_values=list(k_values),
    )
