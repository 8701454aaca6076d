"""Dependency-tree complexity metrics.

Two utterance-level measures are derived from the parse:

* complexity score  SC = lam * L / alpha + (1 - lam) * beta  (alpha > 0),
  falling back to (1 - lam) * beta when no token heads another;
* average dependency length  ADL = mean |h - d| over non-root arcs.

alpha counts distinct head positions (virtual root excluded), beta counts
nodes on the longest root-to-leaf path (single token => beta = 1), and root
attachments are excluded from the arc set: |h - 0| would measure linear
position rather than word-to-word distance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .corpus import ContextWindow, Utterance
from .errors import CorpusWarning, MissingTreeError, UndefinedValueError, ValidationError


@dataclass(frozen=True)
class TreeStats:
    L: int
    alpha: int
    beta: int
    arcs: tuple[tuple[int, int], ...]  # (head, dependent) positions, root arc excluded


def tree_stats(utterance: Utterance) -> TreeStats:
    """Token count, head count, depth and arc list of one parsed utterance."""
    if not utterance.tokens:
        raise MissingTreeError(f"utterance {utterance.id!r} is empty")
    if not utterance.parsed:
        raise MissingTreeError(f"utterance {utterance.id!r} has no dependency tree")
    heads = {t.position: t.head for t in utterance.tokens}
    arcs = tuple((t.head, t.position) for t in utterance.tokens if t.head != 0)
    alpha = len({h for h, _ in arcs})

    depth_memo: dict[int, int] = {}

    def depth(pos: int) -> int:
        if pos == 0:
            return 0
        if pos not in depth_memo:
            depth_memo[pos] = depth(heads[pos]) + 1
        return depth_memo[pos]

    beta = max(depth(t.position) for t in utterance.tokens)
    return TreeStats(L=len(utterance.tokens), alpha=alpha, beta=beta, arcs=arcs)


def syntactic_complexity(stats: TreeStats, lam: float = 0.5) -> float:
    """Length/head/depth blend; lam weights the length-per-head term."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    if stats.alpha > 0:
        return lam * stats.L / stats.alpha + (1.0 - lam) * stats.beta
    return (1.0 - lam) * stats.beta


def average_dependency_length(stats: TreeStats) -> float:
    """Mean |head - dependent| over non-root arcs; needs at least one arc."""
    if not stats.arcs:
        raise UndefinedValueError("no dependency arcs: average length undefined")
    return sum(abs(h - d) for h, d in stats.arcs) / len(stats.arcs)


def combine_stats(parts: list[TreeStats]) -> TreeStats:
    """Aggregate per-utterance stats as a forest: sum L and alpha, max beta,
    concatenate arcs (duplicates count; positions stay utterance-local)."""
    if not parts:
        raise ValidationError("nothing to combine")
    arcs: list[tuple[int, int]] = []
    for p in parts:
        arcs.extend(p.arcs)
    return TreeStats(
        L=sum(p.L for p in parts),
        alpha=sum(p.alpha for p in parts),
        beta=max(p.beta for p in parts),
        arcs=tuple(arcs),
    )


def window_tree_stats(window: ContextWindow, scope: str = "explainer") -> TreeStats:
    """Combined forest stats over the window's contributing utterances.

    Unparsed or empty contributors are skipped with a warning; when none
    remain a MissingTreeError is raised.
    """
    parts = []
    for utt in window.utterances(scope):
        if utt.tokens and utt.parsed:
            parts.append(tree_stats(utt))
        else:
            warnings.warn(
                f"window {window.window_id}: skipping unparsed utterance {utt.id!r}",
                CorpusWarning,
            )
    if not parts:
        raise MissingTreeError(
            f"window {window.window_id}: no parsed utterance contributes"
        )
    return combine_stats(parts)


def window_syntax_metrics(
    window: ContextWindow, lam: float = 0.5, scope: str = "explainer"
) -> tuple[float, float]:
    """(SC, ADL) over the window's contributing utterances.

    ADL raises UndefinedValueError when the combined forest has no arcs
    (all single-token utterances).
    """
    combined = window_tree_stats(window, scope)
    return syntactic_complexity(combined, lam), average_dependency_length(combined)
