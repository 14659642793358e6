"""Frequency model and next-step concept ranking.

Training counts, for every step of the target kind, how often each of its
concepts (the hypotheses H) co-occurs with the concepts C of a context step
chosen by the conditioning method. Ranking sorts hypotheses by the summed
co-occurrence counts; because the context is fixed for one query, dividing
by its probability cannot change the order, so raw counts are sorted
directly. When the context was never seen with any hypothesis, the ranking
backs off to the marginal counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

from .core import ConceptId, NextStepError, StepKind, Taxonomy, Trajectory


class EmptyCorpusError(NextStepError):
    pass


class IndexOutOfRangeError(NextStepError, IndexError):
    pass


class UnderflowError(NextStepError):
    """A decrement would push a count below zero: the step was not trained."""


class Method(str, Enum):
    """Conditioning strategies choosing which step supplies the context."""

    BASELINE = "baseline"
    LAST_DIPLOMA = "last-diploma"
    HIGHEST_DIPLOMA = "highest-diploma"
    PREVIOUS_STEP = "previous"
    FIRST_JOB_AFTER = "first-job"
    NEXT_STEP_INTENT = "next"

    @classmethod
    def parse(cls, value: str) -> "Method":
        try:
            return cls(value.strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {value!r} (expected one of: {names})") from None


# Joint counts are keyed (hypothesis index, context domain, context index):
# the context step may live in either taxonomy (a diploma conditioning a job
# prediction and vice versa), so the context index alone is ambiguous.
JointKey = Tuple[int, StepKind, int]


@dataclass
class FrequencyModel:
    target_kind: StepKind
    marginal: Dict[int, int] = field(default_factory=dict)
    joint: Dict[JointKey, int] = field(default_factory=dict)
    total_steps: int = 0
    # Checksum: always equals sum(marginal.values()). A step with two
    # concepts contributes two occurrences.
    concept_occurrences: int = 0

    def copy(self) -> "FrequencyModel":
        return replace(self, marginal=dict(self.marginal), joint=dict(self.joint))

    def check(self) -> None:
        if any(v < 0 for v in self.marginal.values()):
            raise UnderflowError("negative marginal count")
        if any(v < 0 for v in self.joint.values()):
            raise UnderflowError("negative joint count")
        if sum(self.marginal.values()) != self.concept_occurrences:
            raise NextStepError("marginal checksum mismatch")

    def dump_json(self) -> str:
        """Canonical dump: equal models serialize to identical bytes."""
        data = {
            "target_kind": self.target_kind.value,
            "total_steps": self.total_steps,
            "marginal": {
                str(idx): count
                for idx, count in sorted(self.marginal.items())
                if count
            },
            "joint": [
                [h, dom.value, c, count]
                for (h, dom, c), count in sorted(
                    self.joint.items(),
                    key=lambda item: (item[0][0], item[0][1].value, item[0][2]),
                )
                if count
            ],
        }
        return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def load_json(cls, text: str) -> "FrequencyModel":
        data = json.loads(text)
        marginal = {int(idx): int(count) for idx, count in data["marginal"].items()}
        joint = {
            (int(h), StepKind.parse(dom), int(c)): int(count)
            for h, dom, c, count in data["joint"]
        }
        model = cls(
            target_kind=StepKind.parse(data["target_kind"]),
            marginal=marginal,
            joint=joint,
            total_steps=int(data["total_steps"]),
            concept_occurrences=sum(marginal.values()),
        )
        model.check()
        return model


@dataclass(frozen=True)
class Hypothesis:
    concept: ConceptId
    score: float
    count: int


@dataclass(frozen=True)
class RankedPrediction:
    """Every taxonomy concept exactly once, best hypothesis first."""

    hypotheses: tuple
    method: Optional[Method]
    context_concepts: frozenset
    backed_off: bool

    def concepts(self) -> list:
        return [h.concept for h in self.hypotheses]

    def position(self, concept: ConceptId) -> int:
        """1-based rank of a concept."""
        for pos, hyp in enumerate(self.hypotheses, start=1):
            if (hyp.concept.domain, hyp.concept.index) == (concept.domain, concept.index):
                return pos
        raise KeyError(f"concept {concept.label!r} not in prediction")


def predictable_indices(trajectory: Trajectory) -> range:
    """Indices eligible for prediction: never the first or the last step."""
    return range(1, len(trajectory.steps) - 1)


def _context_at(
    trajectory: Trajectory, step_index: int, method: Method
) -> Optional[FrozenSet[ConceptId]]:
    """Context concepts for any step index; None when the needed step is absent."""
    steps = trajectory.steps
    if method is Method.BASELINE:
        return frozenset()
    if method is Method.PREVIOUS_STEP:
        if step_index == 0:
            return None
        return frozenset(steps[step_index - 1].concepts)
    if method in (Method.LAST_DIPLOMA, Method.HIGHEST_DIPLOMA):
        # Level proxy for the "highest" diploma: chronological ordinal among
        # the diplomas seen so far, so the most recent one is the highest.
        diplomas = [s for s in steps[:step_index] if s.kind is StepKind.DIPLOMA]
        if not diplomas:
            return None
        return frozenset(diplomas[-1].concepts)
    if method is Method.FIRST_JOB_AFTER:
        for step in steps[step_index + 1 :]:
            if step.kind is StepKind.JOB:
                return frozenset(step.concepts)
        return None
    if method is Method.NEXT_STEP_INTENT:
        if step_index + 1 >= len(steps):
            return None
        return frozenset(steps[step_index + 1].concepts)
    raise ValueError(f"unhandled method {method}")


def extract_context(
    trajectory: Trajectory, step_index: int, method: Method
) -> Optional[FrozenSet[ConceptId]]:
    """Context for predicting one step. Only inner steps are predictable."""
    last = len(trajectory.steps) - 1
    if step_index < 1 or step_index > last - 1:
        raise IndexOutOfRangeError(
            f"step index {step_index} not predictable in a "
            f"{len(trajectory.steps)}-step trajectory"
        )
    return _context_at(trajectory, step_index, method)


def _step_contributions(
    trajectory: Trajectory, step_index: int, method: Method
) -> Tuple[list, list]:
    """(marginal hypothesis indices, joint keys) one step adds to a model."""
    step = trajectory.steps[step_index]
    hypotheses = [c.index for c in step.concepts]
    joints = []
    context = _context_at(trajectory, step_index, method)
    if context:
        for h in hypotheses:
            for c in context:
                joints.append((h, c.domain, c.index))
    return hypotheses, joints


def train(
    corpus: Sequence[Trajectory], target_kind: StepKind, method: Method
) -> FrequencyModel:
    """Count hypothesis marginals and context co-occurrences over a corpus.

    Every step of the target kind is counted, whatever its position; steps
    whose context is undefined under the method feed the marginals only.
    """
    if not corpus:
        raise EmptyCorpusError("cannot train on an empty corpus")
    model = FrequencyModel(target_kind=target_kind)
    for trajectory in corpus:
        for index, step in enumerate(trajectory.steps):
            if step.kind is not target_kind:
                continue
            hypotheses, joints = _step_contributions(trajectory, index, method)
            for h in hypotheses:
                model.marginal[h] = model.marginal.get(h, 0) + 1
            for key in joints:
                model.joint[key] = model.joint.get(key, 0) + 1
            model.total_steps += 1
            model.concept_occurrences += len(hypotheses)
    return model


def rank(
    model: FrequencyModel,
    context: Optional[Iterable[ConceptId]],
    taxonomy: Taxonomy,
    method: Optional[Method] = None,
) -> RankedPrediction:
    """Order every taxonomy concept by its conditional count.

    With a non-empty context whose joint counts are not all zero, the score
    of a hypothesis is the sum of its joint counts over the context
    concepts. Otherwise the marginal counts take over (backed_off is set
    when a real context had to fall back). Ties break by marginal count,
    then concept index.
    """
    context_set = frozenset(context) if context is not None else frozenset()
    joint_counts = {}
    for concept in taxonomy.concepts:
        joint_counts[concept.index] = sum(
            model.joint.get((concept.index, c.domain, c.index), 0)
            for c in context_set
        )
    use_joint = bool(context_set) and any(joint_counts.values())
    backed_off = bool(context_set) and not use_joint

    hypotheses = []
    for concept in taxonomy.concepts:
        marginal = model.marginal.get(concept.index, 0)
        count = joint_counts[concept.index] if use_joint else marginal
        hypotheses.append((concept, count, marginal))
    hypotheses.sort(key=lambda item: (-item[1], -item[2], item[0].index))
    return RankedPrediction(
        hypotheses=tuple(
            Hypothesis(concept, float(count), count) for concept, count, _ in hypotheses
        ),
        method=method,
        context_concepts=context_set,
        backed_off=backed_off,
    )


def leave_one_out_rank(
    model: FrequencyModel,
    trajectory: Trajectory,
    step_index: int,
    method: Method,
    taxonomy: Taxonomy,
) -> RankedPrediction:
    """Rank a step with its own training contribution removed.

    Decrements the step's marginal and joint counts, ranks, then restores;
    exactly equivalent to retraining without the step.
    """
    step = trajectory.steps[step_index]
    if step.kind is not model.target_kind:
        raise UnderflowError(
            f"step {step_index} is a {step.kind.value}, model targets "
            f"{model.target_kind.value}"
        )
    hypotheses, joints = _step_contributions(trajectory, step_index, method)
    for h in hypotheses:
        if model.marginal.get(h, 0) < 1:
            raise UnderflowError(f"marginal for concept {h} would go negative")
    joint_need: Dict[JointKey, int] = {}
    for key in joints:
        joint_need[key] = joint_need.get(key, 0) + 1
    for key, need in joint_need.items():
        if model.joint.get(key, 0) < need:
            raise UnderflowError(f"joint count for {key} would go negative")
    if model.total_steps < 1:
        raise UnderflowError("model has no trained steps")

    context = extract_context(trajectory, step_index, method)
    for h in hypotheses:
        model.marginal[h] -= 1
    for key in joints:
        model.joint[key] -= 1
    model.total_steps -= 1
    model.concept_occurrences -= len(hypotheses)
    try:
        return rank(model, context, taxonomy, method=method)
    finally:
        for h in hypotheses:
            model.marginal[h] += 1
        for key in joints:
            model.joint[key] += 1
        model.total_steps += 1
        model.concept_occurrences += len(hypotheses)
