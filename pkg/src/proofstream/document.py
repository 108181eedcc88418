"""Versioned document model: stable span identities, edits, and diffing.

Edits are span-granular. A frontend sends whole text; diff_full_text turns
it into minimal span edits by longest-common-subsequence over normalized
content hashes, so comment and whitespace changes match everything and
produce empty diffs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .syntax import Command, SpanText, normalize, parse_command, split_spans


def norm_hash(raw: str) -> str:
    return hashlib.sha256(normalize(raw).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Span:
    span_id: int  # positive; 0 is the reserved document-start anchor
    text: SpanText
    command: Command
    norm_hash: str


@dataclass(frozen=True)
class DocumentVersion:
    version: int
    spans: Tuple[Span, ...]

    def span(self, span_id: int) -> Optional[Span]:
        for s in self.spans:
            if s.span_id == span_id:
                return s
        return None

    def full_text(self) -> str:
        return "\n".join(s.text.raw for s in self.spans)


@dataclass(frozen=True)
class InsertAfter:
    anchor: int
    text: str


@dataclass(frozen=True)
class Remove:
    span_id: int


@dataclass(frozen=True)
class Replace:
    span_id: int
    text: str


Edit = Union[InsertAfter, Remove, Replace]


class UnknownSpan(Exception):
    def __init__(self, span_id: int):
        self.span_id = span_id
        super().__init__(f"unknown span {span_id}")


class IdAllocator:
    """Monotone span id source; ids are never reused within a session."""

    def __init__(self):
        self._next = 1

    def take(self) -> int:
        out = self._next
        self._next += 1
        return out


def _make_span(text: SpanText, alloc: IdAllocator) -> Span:
    return Span(alloc.take(), text, parse_command(text), norm_hash(text.raw))


def init_document(text: str, alloc: IdAllocator) -> DocumentVersion:
    spans = tuple(_make_span(t, alloc) for t in split_spans(text))
    return DocumentVersion(1, spans)


def _resplit(raw_list: List[Tuple[int, str, bool]], version: int) -> DocumentVersion:
    """Rebuild a version from (id, raw, terminated) triples, recomputing byte
    ranges for a newline-joined layout. Untouched entries keep their id (and,
    since raw is unchanged, their hash); new entries carry fresh ids assigned
    by the caller.
    """
    spans: List[Span] = []
    offset = 0
    for i, (span_id, raw, terminated) in enumerate(raw_list):
        if i > 0:
            offset += 1  # the joining newline
        size = len(raw.encode("utf-8"))
        text = SpanText(raw, offset, offset + size, terminated)
        spans.append(Span(span_id, text, parse_command(text), norm_hash(raw)))
        offset += size
    return DocumentVersion(version, tuple(spans))


def apply_edits(
    v: DocumentVersion, edits: Sequence[Edit], alloc: IdAllocator
) -> DocumentVersion:
    """Apply edits sequentially; fresh ids for inserted/replaced text.

    One edit's text may split into several spans (or none). The whole batch
    is atomic: any UnknownSpan leaves the version untouched.
    """
    working: List[Tuple[int, str, bool]] = [
        (s.span_id, s.text.raw, s.text.terminated) for s in v.spans
    ]

    def index_of(span_id: int) -> int:
        for i, (sid, _, _) in enumerate(working):
            if sid == span_id:
                return i
        raise UnknownSpan(span_id)

    def pieces_of(text: str) -> List[Tuple[int, str, bool]]:
        return [(alloc.take(), t.raw, t.terminated) for t in split_spans(text)]

    for e in edits:
        if isinstance(e, InsertAfter):
            at = 0 if e.anchor == 0 else index_of(e.anchor) + 1
            working[at:at] = pieces_of(e.text)
        elif isinstance(e, Remove):
            del working[index_of(e.span_id)]
        elif isinstance(e, Replace):
            at = index_of(e.span_id)
            working[at : at + 1] = pieces_of(e.text)
        else:
            raise TypeError(f"not an edit: {e!r}")
    return _resplit(working, v.version + 1)


def _lcs_pairs(old: List[str], new: List[str]) -> List[Tuple[int, int]]:
    """Matched (old_index, new_index) pairs; earliest match preferred."""
    n, m = len(old), len(new)
    length = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = length[i], length[i + 1]
        for j in range(m - 1, -1, -1):
            if old[i] == new[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = max(below[j], row[j + 1])
    pairs: List[Tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if old[i] == new[j] and length[i][j] == length[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif length[i + 1][j] >= length[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def diff_full_text(v: DocumentVersion, new_text: str) -> List[Edit]:
    """Span edits turning v into new_text, minimal up to LCS matching.

    Matched spans keep their ids. Within one mismatch block, a leading
    Replace reuses the first removed span's position and the remaining new
    text joins into that one edit, so applying the result reproduces
    new_text's span sequence exactly.
    """
    old_spans = v.spans
    new_spans = split_spans(new_text)
    old_hashes = [s.norm_hash for s in old_spans]
    new_hashes = [norm_hash(t.raw) for t in new_spans]
    pairs = _lcs_pairs(old_hashes, new_hashes)

    edits: List[Edit] = []
    oi = nj = 0
    anchor = 0  # id of the last matched old span seen so far
    for pi, pj in pairs + [(len(old_spans), len(new_spans))]:
        gap_old = [old_spans[k] for k in range(oi, pi)]
        gap_new = [new_spans[k] for k in range(nj, pj)]
        if gap_new and gap_old:
            joined = " ".join(t.raw for t in gap_new)
            edits.append(Replace(gap_old[0].span_id, joined))
            for s in gap_old[1:]:
                edits.append(Remove(s.span_id))
        elif gap_old:
            for s in gap_old:
                edits.append(Remove(s.span_id))
        elif gap_new:
            joined = " ".join(t.raw for t in gap_new)
            edits.append(InsertAfter(anchor, joined))
        if pi < len(old_spans):
            anchor = old_spans[pi].span_id
        oi, nj = pi + 1, pj + 1
    return edits
