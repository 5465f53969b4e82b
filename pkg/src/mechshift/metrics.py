"""Orientation accuracy of an estimated CPDAG against the true DAG's class."""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import SkeletonMismatchError
from .graph import Cpdag, Dag, skeleton
from .mec import cpdag_of


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    n_directed: int
    n_correct: int
    n_skeleton: int


def evaluate(estimated: Cpdag, truth: Dag | Cpdag) -> EvalResult:
    """Score directed edges of ``estimated`` against the reference pattern.

    A Dag reference means every estimated direction is judged against that
    DAG's own orientation, which is the right yardstick for scorers that can
    orient beyond the equivalence class; pass a Cpdag to judge against a
    pattern instead. Precision is the fraction of directed estimate edges the
    reference confirms (1.0 when nothing is directed); recall is directed
    edges over total skeleton edges. Orientation only: skeletons must match
    exactly.
    """
    if isinstance(truth, Dag):
        reference = cpdag_of([truth])
    else:
        reference = truth
    if estimated.num_vars != reference.num_vars:
        raise SkeletonMismatchError(
            f"vertex counts differ: {estimated.num_vars} vs {reference.num_vars}"
        )
    sk_est = skeleton(estimated)
    sk_ref = skeleton(reference)
    if sk_est != sk_ref:
        missing = sorted(sk_ref - sk_est)
        extra = sorted(sk_est - sk_ref)
        raise SkeletonMismatchError(
            f"skeletons differ (missing {missing}, extra {extra}); "
            "orientation metrics are only defined on a shared skeleton"
        )
    if not sk_ref:
        raise SkeletonMismatchError("empty skeleton: no edges to score")

    directed = set(estimated.directed)
    correct = directed & set(reference.directed)
    n_directed = len(directed)
    n_correct = len(correct)
    n_skeleton = len(sk_ref)
    precision = n_correct / n_directed if n_directed else 1.0
    recall = n_directed / n_skeleton
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return EvalResult(precision, recall, f1, n_directed, n_correct, n_skeleton)
