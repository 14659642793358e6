"""Corpus loading: title normalization, classification, filtering.

Corpus files are UTF-8 JSON lines, one user per line:

    {"user_id": str,
     "steps": [{"kind": "diploma"|"job", "title": str, "start": "YYYY-MM",
                "end": "YYYY-MM"|null, "location": str|null,
                "fields": [str], "description": str|null}],
     "skills": [{"label": str, "rating": int|null}]}

Alias files are CSV with header key,canonical,kind.

Two filters run before modeling, in this order: steps with an empty concept
set are dropped first, then profiles left with fewer than 3 steps are
dropped entirely. Both removals are counted separately.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, TextIO, Tuple, Union

from .core import (
    MAX_CONCEPTS_PER_STEP,
    NextStepError,
    Skill,
    Step,
    StepDate,
    StepKind,
    Taxonomy,
    Trajectory,
    classify_step,
    field_tag,
    step_to_dict,
)

MIN_STEPS_PER_PROFILE = 3


class ParseError(NextStepError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class DuplicateUserError(ParseError):
    pass


class MissingKindError(NextStepError):
    """Title not in the alias table and no kind hint available."""


class AliasConflictError(NextStepError):
    """Two alias rows (or a canonical's own key) disagree."""


# Punctuation removed by key normalization, stated bit-exactly so any two
# implementations agree: . , ; : / ( ) ' " -
_KEY_PUNCT_RE = re.compile(r"[.,;:/()'\"-]")
_WS_RE = re.compile(r"\s+")


def normalize_key(raw: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    key = _KEY_PUNCT_RE.sub("", raw.lower())
    return _WS_RE.sub(" ", key).strip()


@dataclass(frozen=True)
class AliasEntry:
    canonical: str
    kind: StepKind


@dataclass(frozen=True)
class AliasTable:
    """Normalized-key -> canonical title map, with a kind per canonical.

    Every canonical title also maps its own normalized key back to itself,
    which makes normalize_title idempotent on its output.
    """

    entries: Mapping[str, AliasEntry] = field(default_factory=dict)

    def __post_init__(self) -> None:
        entries = dict(self.entries)
        for key, entry in list(entries.items()):
            if normalize_key(key) != key:
                raise AliasConflictError(f"alias key {key!r} is not normalized")
            self_key = normalize_key(entry.canonical)
            existing = entries.get(self_key)
            if existing is None:
                entries[self_key] = AliasEntry(entry.canonical, entry.kind)
            elif existing.canonical != entry.canonical:
                raise AliasConflictError(
                    f"key {self_key!r} maps to both {existing.canonical!r} "
                    f"and {entry.canonical!r}"
                )
        object.__setattr__(self, "entries", entries)

    def lookup(self, key: str) -> Optional[AliasEntry]:
        return self.entries.get(key)

    @classmethod
    def empty(cls) -> "AliasTable":
        return cls({})


def load_aliases(path: Union[str, Path]) -> AliasTable:
    entries: dict = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["key", "canonical", "kind"]:
            raise ParseError(f"{path}: expected header key,canonical,kind, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 columns, got {len(row)}", lineno)
            key = normalize_key(row[0])
            if not key:
                raise ParseError(f"{path}: empty alias key", lineno)
            try:
                kind = StepKind.parse(row[2])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", lineno) from None
            entry = AliasEntry(row[1].strip(), kind)
            if key in entries and entries[key] != entry:
                raise AliasConflictError(
                    f"{path}:{lineno}: key {key!r} maps to both "
                    f"{entries[key].canonical!r} and {entry.canonical!r}"
                )
            entries[key] = entry
    return AliasTable(entries)


def normalize_title(
    raw: str,
    aliases: AliasTable,
    kind_hint: Optional[StepKind] = None,
) -> Tuple[str, StepKind]:
    """Resolve a raw step title to (canonical title, kind).

    The key-normalized title is looked up exactly in the alias table; on a
    hit the canonical title and its kind win, on a miss the normalized key
    itself is returned with the hinted kind.
    """
    if not raw or not raw.strip():
        raise ValueError("raw title must be non-empty")
    key = normalize_key(raw)
    entry = aliases.lookup(key)
    if entry is not None:
        return entry.canonical, entry.kind
    if kind_hint is None:
        raise MissingKindError(f"title {raw!r} not in alias table and no kind hint")
    return key, kind_hint


@dataclass(frozen=True)
class RawStep:
    """A step as parsed from the corpus file, before normalization."""

    raw_title: str
    kind_hint: Optional[StepKind] = None
    start: Optional[StepDate] = None
    end: Optional[StepDate] = None
    location: Optional[str] = None
    description: Optional[str] = None
    raw_fields: tuple = ()

    def __post_init__(self) -> None:
        if not self.raw_title.strip():
            raise ValueError("raw title must be non-empty")


@dataclass(frozen=True)
class CorpusStats:
    users: int = 0
    steps: int = 0
    diploma_steps: int = 0
    job_steps: int = 0
    mean_steps_per_user: float = 0.0
    dropped_profiles: int = 0
    dropped_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "users": self.users,
            "steps": self.steps,
            "diploma_steps": self.diploma_steps,
            "job_steps": self.job_steps,
            "mean_steps_per_user": self.mean_steps_per_user,
            "dropped_profiles": self.dropped_profiles,
            "dropped_steps": self.dropped_steps,
        }


def corpus_stats(
    corpus: Iterable[Trajectory],
    dropped_profiles: int = 0,
    dropped_steps: int = 0,
) -> CorpusStats:
    users = 0
    diploma = 0
    job = 0
    for trajectory in corpus:
        users += 1
        for step in trajectory.steps:
            if step.kind is StepKind.DIPLOMA:
                diploma += 1
            else:
                job += 1
    total = diploma + job
    return CorpusStats(
        users=users,
        steps=total,
        diploma_steps=diploma,
        job_steps=job,
        mean_steps_per_user=total / users if users else 0.0,
        dropped_profiles=dropped_profiles,
        dropped_steps=dropped_steps,
    )


def _parse_raw_step(data: Mapping, lineno: int) -> RawStep:
    if not isinstance(data, Mapping):
        raise ParseError("step must be an object", lineno)
    title = data.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ParseError("step title missing or empty", lineno)
    kind_hint = None
    if data.get("kind") is not None:
        try:
            kind_hint = StepKind.parse(data["kind"])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    start_text = data.get("start")
    if not isinstance(start_text, str):
        raise ParseError(f"step {title!r} has no start date", lineno)
    try:
        start = StepDate.parse(start_text)
        end = StepDate.parse(data["end"]) if data.get("end") else None
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    fields = data.get("fields", [])
    if not isinstance(fields, list):
        raise ParseError(f"step {title!r} fields must be a list", lineno)
    return RawStep(
        raw_title=title,
        kind_hint=kind_hint,
        start=start,
        end=end,
        location=data.get("location"),
        description=data.get("description"),
        raw_fields=tuple(fields),
    )


def build_step(
    raw: RawStep,
    aliases: AliasTable,
    taxonomies: Mapping[StepKind, Taxonomy],
) -> Step:
    """Normalize, classify and assemble one step. Concepts may be empty."""
    title, kind = normalize_title(raw.raw_title, aliases, raw.kind_hint)
    tags = frozenset(field_tag(f) for f in raw.raw_fields if f and f.strip())
    taxonomy = taxonomies.get(kind)
    concepts = classify_step(tags, taxonomy) if taxonomy is not None else []
    return Step(
        kind=kind,
        title=title,
        start=raw.start,
        end=raw.end,
        location=raw.location,
        description=raw.description,
        fields=tags,
        concepts=tuple(concepts[:MAX_CONCEPTS_PER_STEP]),
    )


def load_corpus_lines(
    lines: Iterable[str],
    aliases: AliasTable,
    taxonomies: Mapping[StepKind, Taxonomy],
) -> Tuple[list, CorpusStats]:
    trajectories = []
    seen_users = set()
    dropped_steps = 0
    dropped_profiles = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(record, Mapping):
            raise ParseError("corpus line must be a JSON object", lineno)
        user_id = record.get("user_id")
        if not isinstance(user_id, str) or not user_id:
            raise ParseError("user_id missing or empty", lineno)
        if user_id in seen_users:
            raise DuplicateUserError(f"duplicate user_id {user_id!r}", lineno)
        seen_users.add(user_id)

        steps = []
        for raw_data in record.get("steps", []):
            raw = _parse_raw_step(raw_data, lineno)
            try:
                step = build_step(raw, aliases, taxonomies)
            except MissingKindError as exc:
                raise ParseError(str(exc), lineno) from None
            if step.concepts:
                steps.append(step)
            else:
                dropped_steps += 1

        if len(steps) < MIN_STEPS_PER_PROFILE:
            dropped_profiles += 1
            continue

        skills = []
        for skill_data in record.get("skills", []) or []:
            if not isinstance(skill_data, Mapping) or "label" not in skill_data:
                raise ParseError("skill must be an object with a label", lineno)
            rating = skill_data.get("rating")
            skills.append(Skill(skill_data["label"], rating))
        trajectories.append(Trajectory(user_id, tuple(steps), tuple(skills)))

    stats = corpus_stats(trajectories, dropped_profiles, dropped_steps)
    return trajectories, stats


def load_corpus(
    path: Union[str, Path],
    aliases: AliasTable,
    taxonomies: Mapping[StepKind, Taxonomy],
) -> Tuple[list, CorpusStats]:
    with open(path, encoding="utf-8") as handle:
        return load_corpus_lines(handle, aliases, taxonomies)


def _step_record(step: Step) -> dict:
    data = step_to_dict(step)
    del data["concepts"]  # derived on load from fields + taxonomy
    return data


def write_corpus_lines(corpus: Iterable[Trajectory], out: TextIO) -> None:
    for trajectory in corpus:
        record = {
            "user_id": trajectory.user_id,
            "steps": [_step_record(s) for s in trajectory.steps],
            "skills": [
                {"label": s.label, "rating": s.rating} for s in trajectory.skills
            ],
        }
        out.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_corpus(corpus: Iterable[Trajectory], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        write_corpus_lines(corpus, handle)


def dump_corpus(corpus: Iterable[Trajectory]) -> str:
    buffer = io.StringIO()
    write_corpus_lines(corpus, buffer)
    return buffer.getvalue()
