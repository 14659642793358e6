"""Core domain types: steps, trajectories, concept taxonomies.

Everything here is immutable after construction and safe to share between
threads. Concept identity is (domain, index); labels are display-only.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union


class NextStepError(Exception):
    """Base class for all package errors."""


class TaxonomyError(NextStepError):
    """Invalid taxonomy file or inconsistent concept definitions."""


# A step never carries more than this many concepts, no matter how many
# fields voted. Keeps pathological taxonomy files from exploding contexts.
MAX_CONCEPTS_PER_STEP = 4


class StepKind(str, Enum):
    DIPLOMA = "diploma"
    JOB = "job"

    @classmethod
    def parse(cls, value: str) -> "StepKind":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown step kind: {value!r}") from None


@dataclass(frozen=True, order=True)
class ConceptId:
    """One concept of a taxonomy. Identified by (domain, index)."""

    domain: StepKind
    index: int
    label: str = field(compare=False)

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"concept index must be >= 0, got {self.index}")
        if not self.label:
            raise ValueError("concept label must be non-empty")


_WS_RE = re.compile(r"\s+")


def field_tag(raw: str) -> str:
    """Normalize a field tag: lowercase, trimmed, single internal spaces."""
    tag = _WS_RE.sub(" ", raw.strip()).lower()
    if not tag:
        raise ValueError("field tag must be non-empty")
    return tag


@dataclass(frozen=True)
class StepDate:
    """Year-month date; day is optional because resume data rarely has it."""

    year: int
    month: int
    day: Optional[int] = None

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None and not 1 <= self.day <= 31:
            raise ValueError(f"day out of range: {self.day}")

    def sort_key(self) -> tuple:
        # Missing day compares like the first of the month.
        return (self.year, self.month, self.day if self.day is not None else 1)

    def __lt__(self, other: "StepDate") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "StepDate") -> bool:
        return self.sort_key() <= other.sort_key()

    @classmethod
    def parse(cls, text: str) -> "StepDate":
        parts = text.strip().split("-")
        if len(parts) not in (2, 3):
            raise ValueError(f"expected YYYY-MM or YYYY-MM-DD, got {text!r}")
        year, month = int(parts[0]), int(parts[1])
        day = int(parts[2]) if len(parts) == 3 else None
        return cls(year, month, day)

    def isoformat(self) -> str:
        if self.day is None:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"

    def __str__(self) -> str:
        return self.isoformat()


@dataclass(frozen=True)
class Step:
    """One dated trajectory entry: a diploma or a job."""

    kind: StepKind
    title: str
    start: StepDate
    end: Optional[StepDate] = None
    location: Optional[str] = None
    description: Optional[str] = None
    fields: frozenset = frozenset()
    concepts: tuple = ()

    def __post_init__(self) -> None:
        if not self.title:
            raise ValueError("step title must be non-empty")
        object.__setattr__(self, "fields", frozenset(self.fields))
        object.__setattr__(self, "concepts", tuple(self.concepts))
        if self.end is not None and self.end < self.start:
            raise ValueError(
                f"step end {self.end} precedes start {self.start}"
            )
        seen = set()
        for concept in self.concepts:
            if concept.domain != self.kind:
                raise ValueError(
                    f"concept {concept.label!r} belongs to {concept.domain.value}, "
                    f"step is a {self.kind.value}"
                )
            key = (concept.domain, concept.index)
            if key in seen:
                raise ValueError(f"duplicate concept index {concept.index}")
            seen.add(key)
        if len(self.concepts) > MAX_CONCEPTS_PER_STEP:
            raise ValueError(
                f"step carries {len(self.concepts)} concepts, "
                f"max is {MAX_CONCEPTS_PER_STEP}"
            )


@dataclass(frozen=True)
class Skill:
    label: str
    rating: Optional[int] = None


def _step_sort_key(step: Step) -> tuple:
    # Ties on start break by end date then title; an open-ended step sorts
    # after any finished one with the same start.
    end_key = step.end.sort_key() if step.end is not None else (9999, 12, 31)
    return (step.start.sort_key(), end_key, step.title)


@dataclass(frozen=True)
class Trajectory:
    """Ordered steps of one anonymous user."""

    user_id: str
    steps: tuple = ()
    skills: tuple = ()

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        ordered = tuple(sorted(self.steps, key=_step_sort_key))
        object.__setattr__(self, "steps", ordered)
        object.__setattr__(self, "skills", tuple(self.skills))

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Taxonomy:
    """Concept list for one domain plus the field -> concepts map."""

    domain: StepKind
    concepts: tuple = ()
    field_map: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self) -> None:
        concepts = tuple(sorted(self.concepts, key=lambda c: c.index))
        object.__setattr__(self, "concepts", concepts)
        seen_idx = set()
        seen_labels = set()
        for concept in concepts:
            if concept.domain != self.domain:
                raise TaxonomyError(
                    f"concept {concept.label!r} has domain {concept.domain.value}, "
                    f"taxonomy is {self.domain.value}"
                )
            if concept.index in seen_idx:
                raise TaxonomyError(f"duplicate concept index {concept.index}")
            if concept.label in seen_labels:
                raise TaxonomyError(f"duplicate concept label {concept.label!r}")
            seen_idx.add(concept.index)
            seen_labels.add(concept.label)
        frozen_map = {}
        known = {(c.domain, c.index) for c in concepts}
        for tag, mapped in dict(self.field_map).items():
            mapped = frozenset(mapped)
            if not mapped:
                raise TaxonomyError(f"field {tag!r} maps to an empty concept set")
            for concept in mapped:
                if (concept.domain, concept.index) not in known:
                    raise TaxonomyError(
                        f"field {tag!r} references unknown concept "
                        f"({concept.domain.value}, {concept.index})"
                    )
            frozen_map[tag] = mapped
        object.__setattr__(self, "field_map", frozen_map)

    def __len__(self) -> int:
        return len(self.concepts)

    def by_index(self, index: int) -> ConceptId:
        for concept in self.concepts:
            if concept.index == index:
                return concept
        raise KeyError(f"no concept with index {index} in {self.domain.value} taxonomy")

    def has_index(self, index: int) -> bool:
        return any(c.index == index for c in self.concepts)


def classify_step(step_fields: Iterable[str], taxonomy: Taxonomy) -> list:
    """Map a step's field tags to concepts, best-supported first.

    Returns the union of field_map lookups ordered by descending number of
    supporting fields, ties broken by concept index ascending. Unknown
    fields contribute nothing.
    """
    support: dict = {}
    for tag in set(step_fields):
        for concept in taxonomy.field_map.get(tag, ()):
            support[concept] = support.get(concept, 0) + 1
    ordered = sorted(support.items(), key=lambda item: (-item[1], item[0].index))
    return [concept for concept, _ in ordered]


# --- serialization -----------------------------------------------------------
# Full-fidelity dict forms (concepts included). The line-oriented corpus
# exchange format lives in nextstep.ingest and carries fields only.

def concept_to_dict(concept: ConceptId) -> dict:
    return {"domain": concept.domain.value, "index": concept.index, "label": concept.label}


def concept_from_dict(data: Mapping) -> ConceptId:
    return ConceptId(StepKind.parse(data["domain"]), int(data["index"]), data["label"])


def step_to_dict(step: Step) -> dict:
    return {
        "kind": step.kind.value,
        "title": step.title,
        "start": step.start.isoformat(),
        "end": step.end.isoformat() if step.end else None,
        "location": step.location,
        "description": step.description,
        "fields": sorted(step.fields),
        "concepts": [concept_to_dict(c) for c in step.concepts],
    }


def step_from_dict(data: Mapping) -> Step:
    return Step(
        kind=StepKind.parse(data["kind"]),
        title=data["title"],
        start=StepDate.parse(data["start"]),
        end=StepDate.parse(data["end"]) if data.get("end") else None,
        location=data.get("location"),
        description=data.get("description"),
        fields=frozenset(data.get("fields", ())),
        concepts=tuple(concept_from_dict(c) for c in data.get("concepts", ())),
    )


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "user_id": trajectory.user_id,
        "steps": [step_to_dict(s) for s in trajectory.steps],
        "skills": [{"label": s.label, "rating": s.rating} for s in trajectory.skills],
    }


def trajectory_from_dict(data: Mapping) -> Trajectory:
    return Trajectory(
        user_id=data["user_id"],
        steps=tuple(step_from_dict(s) for s in data.get("steps", ())),
        skills=tuple(
            Skill(s["label"], s.get("rating")) for s in data.get("skills", ())
        ),
    )


# --- taxonomy files ----------------------------------------------------------
# CSV with header domain,concept_index,concept_label,field — one row per
# (concept, field) pair; an empty field declares a concept with no fields.

TAXONOMY_HEADER = ["domain", "concept_index", "concept_label", "field"]


def load_taxonomies(path: Union[str, Path]) -> dict:
    """Read a taxonomy CSV. Returns {StepKind: Taxonomy} for the domains present."""
    labels: dict = {}
    fields: dict = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != TAXONOMY_HEADER:
            raise TaxonomyError(
                f"{path}: expected header {','.join(TAXONOMY_HEADER)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise TaxonomyError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                domain = StepKind.parse(row[0])
                index = int(row[1])
            except ValueError as exc:
                raise TaxonomyError(f"{path}:{lineno}: {exc}") from None
            label = row[2].strip()
            if not label:
                raise TaxonomyError(f"{path}:{lineno}: empty concept label")
            key = (domain, index)
            if key in labels and labels[key] != label:
                raise TaxonomyError(
                    f"{path}:{lineno}: concept {index} relabeled "
                    f"{labels[key]!r} -> {label!r}"
                )
            labels[key] = label
            raw_field = row[3].strip()
            if raw_field:
                fields.setdefault(key, set()).add(field_tag(raw_field))

    out: dict = {}
    for domain in StepKind:
        concepts = [
            ConceptId(d, i, lbl) for (d, i), lbl in labels.items() if d == domain
        ]
        if not concepts:
            continue
        by_key = {(c.domain, c.index): c for c in concepts}
        field_map: dict = {}
        for (d, i), tags in fields.items():
            if d != domain:
                continue
            for tag in tags:
                field_map.setdefault(tag, set()).add(by_key[(d, i)])
        out[domain] = Taxonomy(domain, tuple(concepts), field_map)
    return out


def load_taxonomy(path: Union[str, Path], domain: StepKind) -> Taxonomy:
    loaded = load_taxonomies(path)
    if domain not in loaded:
        raise TaxonomyError(f"{path}: no {domain.value} concepts found")
    return loaded[domain]


def save_taxonomy(taxonomy: Taxonomy, path: Union[str, Path]) -> None:
    # Inverse of load: one row per (concept, field), fieldless concepts get
    # a single row with an empty field column.
    by_concept: dict = {c: [] for c in taxonomy.concepts}
    for tag, mapped in taxonomy.field_map.items():
        for concept in mapped:
            by_concept[concept].append(tag)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TAXONOMY_HEADER)
        for concept in taxonomy.concepts:
            tags = sorted(by_concept[concept])
            if not tags:
                writer.writerow([concept.domain.value, concept.index, concept.label, ""])
            for tag in tags:
                writer.writerow([concept.domain.value, concept.index, concept.label, tag])


def canonical_taxonomies() -> dict:
    """The packaged concept catalogs: 17 diploma concepts and 47 job concepts."""
    from importlib.resources import files

    data = files("nextstep") / "data"
    out = {}
    out.update(load_taxonomies(str(data / "taxonomy_diploma.csv")))
    out.update(load_taxonomies(str(data / "taxonomy_job.csv")))
    return out
