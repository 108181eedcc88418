"""Shared helpers for engine-level and acceptance tests."""

import random

from proofstream.document import IdAllocator, init_document
from proofstream.stm import SpanStatus, check_document


def essence(status: SpanStatus):
    """Status identity for cross-run comparison: state plus message
    severities and texts. Offsets are excluded deliberately: memoized
    results may carry offsets from a twin span whose comments sat
    elsewhere, and the contract pins only state and wording."""
    return (status.state, tuple((m.severity, m.text) for m in status.messages))


def batch_essences(text: str):
    """From-scratch reference check; per-span essences in document order."""
    doc = init_document(text, IdAllocator())
    report = check_document(doc)
    return [essence(report.statuses[s.span_id]) for s in doc.spans]


class Collector:
    """Engine emit callback that records every message in arrival order."""

    def __init__(self):
        self.messages = []

    def __call__(self, message: dict) -> None:
        self.messages.append(message)

    def of_type(self, mtype: str):
        return [m for m in self.messages if m["type"] == mtype]

    def clear(self) -> None:
        self.messages.clear()


_STATE_RANK = {"pending": 0, "running": 1, "finished": 2, "failed": 2, "cancelled": 2}


def assert_status_monotone(messages):
    """Per (version, span), statuses must only move forward and never
    leave a terminal state."""
    last = {}
    for m in messages:
        if m["type"] != "status":
            continue
        key = (m["version"], m["span"])
        rank = _STATE_RANK[m["state"]]
        prev = last.get(key)
        assert prev is None or (prev < 2 and rank >= prev), (
            f"status regression for {key}: rank {prev} -> {rank}"
        )
        last[key] = rank


# A pool of command texts for random document generation. Atoms are drawn
# from a..f so the truth-table oracle stays cheap; some entries are broken
# on purpose so structural errors stay exercised.
_GOOD = [
    "def idem := a -> a.",
    "def conj := a /\\ b.",
    "lemma t1 : a -> a. proof. intro h1. exact h1. qed.",
    "lemma t2 : a -> b -> a. proof. intro h1. intro h2. exact h1. qed.",
    "lemma t3 : a /\\ b -> a. proof. intro h1. cases h1. exact h2. qed.",
    "lemma t4 : a -> a \\/ b. proof. intro h1. left. exact h1. qed.",
    "lemma t5 : b -> a \\/ b. proof. intro h1. right. exact h1. qed.",
    "lemma t6 : a /\\ b -> b /\\ a. proof. search 6. qed.",
    "lemma t7 : ~~c -> c. proof. search 4. qed.",
    "lemma t8 : false -> d. proof. intro h1. exfalso. exact h1. qed.",
    "lemma t9 : (a -> b) -> a -> b. proof. intro h1. intro h2. apply h1. exact h2. qed.",
]
_BAD = [
    "lemma broken : a -> a. proof. intro h1. qed.",  # open goal at qed
    "lemma wrong : a -> b. proof. intro h1. exact h1. qed.",  # exact mismatch
    "lemma nohead : e \\/ ~e.",  # lemma without proof
    "qed.",  # stray qed
    "intro h1.",  # stray step
    "def oops := ->.",  # malformed formula
]
COMMAND_POOL = _GOOD + _BAD


def random_document(rng: random.Random, max_spans: int = 12) -> str:
    n = rng.randint(1, max_spans)
    return "\n".join(rng.choice(COMMAND_POOL) for _ in range(n))
