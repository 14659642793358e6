"""Builders and independent reference implementations shared by the tests.

The reference functions recompute counts and orderings with plain loops
and Counters, on purpose kept separate from the library code so the two
can disagree.
"""

from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from nextstep.core import ConceptId, Step, StepDate, StepKind, Taxonomy, Trajectory
from nextstep.predictor import Method

D = StepKind.DIPLOMA
J = StepKind.JOB


def taxonomy(domain: StepKind, n: int) -> Taxonomy:
    concepts = tuple(
        ConceptId(domain, i, f"{domain.value}-c{i}") for i in range(n)
    )
    field_map = {f"{domain.value[0]}f{i}": {concepts[i]} for i in range(n)}
    return Taxonomy(domain, concepts, field_map)


def step(
    tax: Taxonomy,
    indices: Sequence[int],
    year: int,
    title: Optional[str] = None,
    end_year: Optional[int] = None,
) -> Step:
    kind = tax.domain
    concepts = tuple(tax.by_index(i) for i in indices)
    fields = frozenset(f"{kind.value[0]}f{i}" for i in indices)
    return Step(
        kind=kind,
        title=title or f"{kind.value} {year}",
        start=StepDate(year, 1),
        end=StepDate(end_year if end_year is not None else year + 1, 6),
        fields=fields,
        concepts=concepts,
    )


def user(
    uid: str,
    spec: Sequence[Tuple[str, Sequence[int]]],
    dtax: Taxonomy,
    jtax: Taxonomy,
) -> Trajectory:
    """spec: [("d", [0]), ("j", [1, 2]), ...] in chronological order."""
    steps = []
    year = 2000
    for kind_code, indices in spec:
        tax = dtax if kind_code == "d" else jtax
        steps.append(step(tax, indices, year))
        year += 2
    return Trajectory(uid, tuple(steps))


def random_corpus(rng, n_users: int, dtax: Taxonomy, jtax: Taxonomy,
                  min_steps: int = 3, max_steps: int = 7) -> List[Trajectory]:
    """Arbitrary kind mixes, 1-3 concepts per step. Deterministic per rng."""
    users = []
    for u in range(n_users):
        n = rng.randint(min_steps, max_steps)
        spec = []
        for _ in range(n):
            code = "d" if rng.random() < 0.45 else "j"
            tax = dtax if code == "d" else jtax
            k = rng.randint(1, min(3, len(tax)))
            spec.append((code, sorted(rng.sample(range(len(tax)), k))))
        users.append(user(f"u{u}", spec, dtax, jtax))
    return users


# --- reference implementations -------------------------------------------------


def reference_context(
    trajectory: Trajectory, index: int, method: Method
) -> Optional[frozenset]:
    steps = trajectory.steps
    if method is Method.BASELINE:
        return frozenset()
    if method is Method.PREVIOUS_STEP:
        return frozenset(steps[index - 1].concepts) if index >= 1 else None
    if method in (Method.LAST_DIPLOMA, Method.HIGHEST_DIPLOMA):
        found = None
        for s in steps[:index]:
            if s.kind is D:
                found = s
        return frozenset(found.concepts) if found is not None else None
    if method is Method.FIRST_JOB_AFTER:
        for s in steps[index + 1 :]:
            if s.kind is J:
                return frozenset(s.concepts)
        return None
    if method is Method.NEXT_STEP_INTENT:
        if index + 1 < len(steps):
            return frozenset(steps[index + 1].concepts)
        return None
    raise AssertionError(method)


def reference_counts(
    corpus: Sequence[Trajectory],
    target_kind: StepKind,
    method: Method,
    skip: Optional[Tuple[str, int]] = None,
) -> Tuple[Counter, Counter]:
    """(marginal, joint) built by explicit enumeration.

    skip=(user_id, step_index) leaves one step's contributions out,
    mimicking a retrain without it.
    """
    marginal: Counter = Counter()
    joint: Counter = Counter()
    for trajectory in corpus:
        for index, s in enumerate(trajectory.steps):
            if s.kind is not target_kind:
                continue
            if skip is not None and (trajectory.user_id, index) == skip:
                continue
            context = reference_context(trajectory, index, method)
            for h in s.concepts:
                marginal[h.index] += 1
                if context:
                    for c in context:
                        joint[(h.index, c.domain, c.index)] += 1
    return marginal, joint


def reference_order(
    marginal: Counter,
    joint: Counter,
    context: Optional[Iterable[ConceptId]],
    taxonomy: Taxonomy,
) -> List[int]:
    """Concept indices best-first under the count-then-sort contract."""
    ctx = frozenset(context) if context else frozenset()
    summed: Dict[int, int] = {}
    for concept in taxonomy.concepts:
        summed[concept.index] = sum(
            joint.get((concept.index, c.domain, c.index), 0) for c in ctx
        )
    use_joint = bool(ctx) and any(summed.values())
    rows = []
    for concept in taxonomy.concepts:
        score = summed[concept.index] if use_joint else marginal.get(concept.index, 0)
        rows.append((-score, -marginal.get(concept.index, 0), concept.index))
    rows.sort()
    return [index for _, _, index in rows]
