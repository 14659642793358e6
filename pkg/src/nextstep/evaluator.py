"""Evaluation harness: leave-one-out ranking quality over a corpus.

Each predictable step is scored by where its true concept lands in the
ranking computed without that step's own counts. The per-step score is a
reciprocal-rank variant shaped around a paginated display: propositions
arrive in packs of six, ranks inside a pack are softened by a fudge
exponent, and every further pack halves the credit because reaching it
costs the user an extra action.
"""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import ConceptId, NextStepError, StepKind, Taxonomy, Trajectory
from .predictor import (
    FrequencyModel,
    Method,
    RankedPrediction,
    extract_context,
    leave_one_out_rank,
    predictable_indices,
    train,
)


class InvalidParamsError(NextStepError):
    pass


class InvalidRankError(NextStepError):
    pass


class ConceptNotInTaxonomyError(NextStepError):
    pass


class NoEvaluableStepsError(NextStepError):
    pass


RANK_MODE_WITHIN_PACK = "within_pack"
RANK_MODE_GLOBAL = "global"


@dataclass(frozen=True)
class ScoreParams:
    """Knobs of the rank score: s(r) = pack_penalty^bucket * (1/r')^alpha.

    r' restarts at 1 inside each pack of pack_size propositions
    (rank_mode="global" keeps the raw rank in the power term instead).
    """

    alpha: float = 0.2
    pack_size: int = 6
    pack_penalty: float = 0.5
    rank_mode: str = RANK_MODE_WITHIN_PACK

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise InvalidParamsError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.pack_size < 1:
            raise InvalidParamsError(f"pack_size must be >= 1, got {self.pack_size}")
        if not 0 < self.pack_penalty <= 1:
            raise InvalidParamsError(
                f"pack_penalty must be in (0, 1], got {self.pack_penalty}"
            )
        if self.rank_mode not in (RANK_MODE_WITHIN_PACK, RANK_MODE_GLOBAL):
            raise InvalidParamsError(f"unknown rank_mode {self.rank_mode!r}")
        if self.rank_mode == RANK_MODE_WITHIN_PACK:
            # Strict decrease across a pack boundary needs the penalty to
            # undercut the last within-pack score.
            bound = self.pack_size ** (-self.alpha)
            if self.pack_penalty >= bound:
                raise InvalidParamsError(
                    f"pack_penalty {self.pack_penalty} must be < "
                    f"pack_size^(-alpha) = {bound:.6f} to keep scores "
                    "strictly decreasing"
                )


def step_score(rank: int, params: ScoreParams = ScoreParams()) -> float:
    """Credit for a truth found at the given 1-based rank, in (0, 1]."""
    if rank < 1:
        raise InvalidRankError(f"rank must be >= 1, got {rank}")
    bucket = (rank - 1) // params.pack_size
    if params.rank_mode == RANK_MODE_GLOBAL:
        within = rank
    else:
        within = (rank - 1) % params.pack_size + 1
    return params.pack_penalty**bucket * (1.0 / within) ** params.alpha


def rank_of_truth(
    prediction: RankedPrediction, true_concepts: Iterable[ConceptId]
) -> int:
    """Best 1-based position of any true concept in the prediction."""
    truths = list(true_concepts)
    if not truths:
        raise ConceptNotInTaxonomyError("true concept set is empty")
    best = None
    for concept in truths:
        try:
            pos = prediction.position(concept)
        except KeyError:
            raise ConceptNotInTaxonomyError(
                f"concept ({concept.domain.value}, {concept.index}) "
                "not in the prediction's taxonomy"
            ) from None
        if best is None or pos < best:
            best = pos
    return best


def confidence_interval(scores: Sequence[float]) -> Tuple[float, float]:
    """95% normal-approximation interval for the mean of the scores."""
    n = len(scores)
    mean = statistics.fmean(scores)
    spread = statistics.stdev(scores) if n > 1 else 0.0
    half = 1.96 * spread / math.sqrt(n)
    return (mean - half, mean + half)


@dataclass(frozen=True)
class EvalReport:
    method: Method
    target_kind: StepKind
    n_evaluated: int
    mean_rank: float
    mrr: float
    ci95: Tuple[float, float]
    histogram: Dict[int, int] = field(default_factory=dict)
    ci_method: str = "normal-approximation"

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "target_kind": self.target_kind.value,
            "n_evaluated": self.n_evaluated,
            "mean_rank": self.mean_rank,
            "mrr": self.mrr,
            "ci95": [self.ci95[0], self.ci95[1]],
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "ci_method": self.ci_method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


@dataclass(frozen=True)
class ReorientationFlag:
    user_id: str
    step_index: int
    rank_of_truth: int
    threshold: int


@dataclass(frozen=True)
class _Instance:
    trajectory: Trajectory
    step_index: int


def _evaluable_instances(
    corpus: Sequence[Trajectory], target_kind: StepKind, method: Method
) -> List[_Instance]:
    instances = []
    for trajectory in corpus:
        for index in predictable_indices(trajectory):
            step = trajectory.steps[index]
            if step.kind is not target_kind:
                continue
            if extract_context(trajectory, index, method) is None:
                continue
            instances.append(_Instance(trajectory, index))
    return instances


def _rank_instances(
    model: FrequencyModel,
    instances: Sequence[_Instance],
    method: Method,
    taxonomy: Taxonomy,
) -> List[int]:
    ranks = []
    for inst in instances:
        prediction = leave_one_out_rank(
            model, inst.trajectory, inst.step_index, method, taxonomy
        )
        truth = inst.trajectory.steps[inst.step_index].concepts
        ranks.append(rank_of_truth(prediction, truth))
    return ranks


def _all_ranks(
    corpus: Sequence[Trajectory],
    target_kind: StepKind,
    method: Method,
    taxonomy: Taxonomy,
    jobs: int = 1,
) -> Tuple[List[_Instance], List[int]]:
    instances = _evaluable_instances(corpus, target_kind, method)
    if not instances:
        raise NoEvaluableStepsError(
            f"no evaluable {target_kind.value} steps under {method.value}"
        )
    model = train(corpus, target_kind, method)
    if jobs <= 1 or len(instances) < 2:
        return instances, _rank_instances(model, instances, method, taxonomy)
    # Each worker mutates its own model copy; chunks are merged in order,
    # so the result is identical for any worker count.
    chunk_size = math.ceil(len(instances) / jobs)
    chunks = [
        instances[i : i + chunk_size] for i in range(0, len(instances), chunk_size)
    ]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [
            pool.submit(_rank_instances, model.copy(), chunk, method, taxonomy)
            for chunk in chunks
        ]
        ranks: List[int] = []
        for future in futures:
            ranks.extend(future.result())
    return instances, ranks


def evaluate(
    corpus: Sequence[Trajectory],
    target_kind: StepKind,
    method: Method,
    params: ScoreParams = ScoreParams(),
    taxonomy: Optional[Taxonomy] = None,
    jobs: int = 1,
) -> EvalReport:
    """Leave-one-out evaluation of every predictable step of one kind.

    The taxonomy defaults to one reconstructed from the corpus' own
    concepts; pass it explicitly to rank against the full concept list.
    """
    if taxonomy is None:
        taxonomy = taxonomy_from_corpus(corpus, target_kind)
    _, ranks = _all_ranks(corpus, target_kind, method, taxonomy, jobs)
    scores = [step_score(r, params) for r in ranks]
    histogram: Dict[int, int] = {}
    for r in ranks:
        histogram[r] = histogram.get(r, 0) + 1
    return EvalReport(
        method=method,
        target_kind=target_kind,
        n_evaluated=len(ranks),
        mean_rank=statistics.fmean(ranks),
        mrr=statistics.fmean(scores),
        ci95=confidence_interval(scores),
        histogram=histogram,
    )


def detect_reorientations(
    corpus: Sequence[Trajectory],
    target_kind: StepKind,
    method: Method,
    params: ScoreParams = ScoreParams(),
    threshold: Optional[int] = None,
    taxonomy: Optional[Taxonomy] = None,
) -> List[ReorientationFlag]:
    """Steps whose truth ranked below the first displayed pack.

    A poorly predicted step is the operational residual used as a
    reorientation signal; the default threshold is the pack size.
    """
    if threshold is None:
        threshold = params.pack_size
    if threshold < 1:
        raise InvalidParamsError(f"threshold must be >= 1, got {threshold}")
    if taxonomy is None:
        taxonomy = taxonomy_from_corpus(corpus, target_kind)
    instances, ranks = _all_ranks(corpus, target_kind, method, taxonomy)
    flags = [
        ReorientationFlag(inst.trajectory.user_id, inst.step_index, r, threshold)
        for inst, r in zip(instances, ranks)
        if r > threshold
    ]
    flags.sort(key=lambda f: (f.user_id, f.step_index))
    return flags


def taxonomy_from_corpus(
    corpus: Sequence[Trajectory], target_kind: StepKind
) -> Taxonomy:
    """Minimal taxonomy spanning the concepts observed in a corpus."""
    concepts = {}
    for trajectory in corpus:
        for step in trajectory.steps:
            if step.kind is target_kind:
                for concept in step.concepts:
                    concepts[concept.index] = concept
    return Taxonomy(target_kind, tuple(concepts.values()), {})


# --- report output -----------------------------------------------------------

METHOD_DISPLAY = {
    Method.BASELINE: "Baseline",
    Method.LAST_DIPLOMA: "LastDiploma",
    Method.HIGHEST_DIPLOMA: "HighestDiploma",
    Method.PREVIOUS_STEP: "PreviousStep",
    Method.FIRST_JOB_AFTER: "FirstJobAfter",
    Method.NEXT_STEP_INTENT: "NextStepIntent",
}


def report_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table with the Method | MR | MRR | CI columns."""
    rows = [("Method", "MR", "MRR", "CI")]
    for report in reports:
        rows.append(
            (
                METHOD_DISPLAY[report.method],
                f"{report.mean_rank:.1f}",
                f"{report.mrr:.3f}",
                f"[{report.ci95[0]:.3f}, {report.ci95[1]:.3f}]",
            )
        )
    widths = [max(len(row[col]) for row in rows) for col in range(4)]
    lines = []
    for i, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def histogram_csv(report: EvalReport) -> str:
    """CSV of the rank histogram, one unit interval per row."""
    lines = ["rank_bin,count"]
    for rank_bin in sorted(report.histogram):
        lines.append(f"{rank_bin},{report.histogram[rank_bin]}")
    return "\n".join(lines) + "\n"
