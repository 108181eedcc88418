"""Document versioning, span identity, edits, and LCS diffing."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofstream.document import (
    DocumentVersion,
    IdAllocator,
    InsertAfter,
    Remove,
    Replace,
    UnknownSpan,
    apply_edits,
    diff_full_text,
    init_document,
    norm_hash,
)
from proofstream.syntax import Malformed, normalize


def mkdoc(text: str):
    alloc = IdAllocator()
    return init_document(text, alloc), alloc


def test_init_document():
    v, _ = mkdoc("def a := p. qed.")
    assert v.version == 1
    assert [s.span_id for s in v.spans] == [1, 2]
    v, _ = mkdoc("")
    assert v.version == 1
    assert v.spans == ()
    v, _ = mkdoc("lemma x : p")
    assert len(v.spans) == 1
    assert isinstance(v.spans[0].command, Malformed)


def test_replace_gets_fresh_id():
    v, alloc = mkdoc("def a := p. qed.")
    v2 = apply_edits(v, [Replace(2, "qed.")], alloc)
    assert v2.version == 2
    assert [s.span_id for s in v2.spans] == [1, 3]


def test_insert_after_start():
    v, alloc = mkdoc("def a := p.")
    v2 = apply_edits(v, [InsertAfter(0, "def b := q.")], alloc)
    assert [s.text.raw for s in v2.spans] == ["def b := q.", "def a := p."]
    assert v2.spans[0].span_id == 2


def test_unknown_span_is_atomic():
    v, alloc = mkdoc("def a := p. qed.")
    with pytest.raises(UnknownSpan):
        apply_edits(v, [Replace(1, "def b := q."), Remove(99)], alloc)
    assert v.version == 1
    assert [s.span_id for s in v.spans] == [1, 2]


def test_one_edit_text_may_split_into_many_spans():
    v, alloc = mkdoc("def a := p.")
    v2 = apply_edits(v, [Replace(1, "def b := q. def c := r.")], alloc)
    assert len(v2.spans) == 2
    assert v2.spans[0].span_id != v2.spans[1].span_id


def test_edits_apply_sequentially():
    v, alloc = mkdoc("def a := p. def b := q.")
    v2 = apply_edits(v, [Remove(1), Remove(2)], alloc)
    assert v2.spans == ()
    with pytest.raises(UnknownSpan):
        apply_edits(v, [Remove(1), Remove(1)], alloc)


def test_byte_ranges_recomputed():
    v, alloc = mkdoc("def a := p.    qed.")
    v2 = apply_edits(v, [Replace(1, "def ab := p.")], alloc)
    data = v2.full_text().encode("utf-8")
    for s in v2.spans:
        assert data[s.text.start : s.text.end].decode("utf-8") == s.text.raw


def test_diff_single_replacement():
    v, _ = mkdoc("def a := p. def b := q. qed.")
    edits = diff_full_text(v, "def a := p. def x := q. qed.")
    assert edits == [Replace(2, "def x := q.")]


def test_diff_identical_text_empty():
    v, _ = mkdoc("def a := p. qed.")
    assert diff_full_text(v, "def a := p. qed.") == []


def test_diff_prepended_span():
    v, _ = mkdoc("def a := p.")
    edits = diff_full_text(v, "def z := q. def a := p.")
    assert edits == [InsertAfter(0, "def z := q.")]


def test_diff_appended_span_anchors_on_predecessor():
    v, _ = mkdoc("def a := p.")
    edits = diff_full_text(v, "def a := p. def z := q.")
    assert edits == [InsertAfter(1, "def z := q.")]


def test_diff_comment_and_whitespace_edits_are_empty():
    v, _ = mkdoc("def a := p. lemma t : a. proof. search 2. qed.")
    assert diff_full_text(v, "def a := p. (* new *) lemma t : a. proof.\n\n search   2. qed.") == []


def test_diff_pure_removal():
    v, _ = mkdoc("def a := p. def b := q. qed.")
    assert diff_full_text(v, "def a := p. qed.") == [Remove(2)]


def test_diff_block_collapses_to_replace_plus_removes():
    v, _ = mkdoc("def a := p. def b := q. def c := r. qed.")
    edits = diff_full_text(v, "def a := p. def x := s. qed.")
    assert edits == [Replace(2, "def x := s."), Remove(3)]


def test_matched_spans_keep_ids_and_hashes():
    v, alloc = mkdoc("def a := p. lemma t : a. proof. search 2. qed.")
    before = {s.span_id: s.norm_hash for s in v.spans}
    edits = diff_full_text(v, "def a := p. lemma t : a. proof. search 3. qed.")
    v2 = apply_edits(v, edits, alloc)
    changed = [s for s in v2.spans if s.span_id not in before]
    assert len(changed) == 1
    assert normalize(changed[0].text.raw) == "search 3 ."
    for s in v2.spans:
        if s.span_id in before:
            assert s.norm_hash == before[s.span_id]


_commands = st.sampled_from(
    [
        "def a := p.",
        "def b := q.",
        "lemma t : p -> p.",
        "proof.",
        "intro h.",
        "exact h.",
        "search 2.",
        "qed.",
        "(* only a comment *) qed.",
        "broken :=",
    ]
)
_docs = st.lists(_commands, max_size=10).map(" ".join)


@settings(max_examples=120)
@given(_docs, _docs)
def test_apply_diff_converges_to_new_text(old_text, new_text):
    v, alloc = mkdoc(old_text)
    edits = diff_full_text(v, new_text)
    v2 = apply_edits(v, edits, alloc)
    from proofstream.syntax import split_spans

    want = [norm_hash(t.raw) for t in split_spans(new_text)]
    got = [s.norm_hash for s in v2.spans]
    assert got == want
    assert v2.version == v.version + 1


@settings(max_examples=80)
@given(_docs, _docs)
def test_diff_then_diff_is_empty(old_text, new_text):
    v, alloc = mkdoc(old_text)
    v2 = apply_edits(v, diff_full_text(v, new_text), alloc)
    assert diff_full_text(v2, v2.full_text()) == []
