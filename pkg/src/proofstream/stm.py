"""The state-transaction machine.

Prover states form a hash chain: state_0 = H("init"), and each
environment-affecting span advances it by its effect hash. A lemma's
effect is its statement alone, never its proof body, which is what makes
proof edits invisible to everything downstream. Proof regions are
postponed tasks keyed by (post-header state, body hash) and validated by
kernel replay at qed; whole-span results are memoized content-addressed,
so replanning after an edit reuses every result whose key survives.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .document import DocumentVersion
from .kernel import Atom, Formula, Impl, And, Or, FalseConst
from .syntax import (
    Command,
    Def,
    LemmaHeader,
    Malformed,
    ProofOpen,
    Qed,
    Step,
    pretty,
)
from .tactics import (
    Cancelled as SearchCancelled,
    ReplayError,
    StepError,
    apply_step,
    initial_proof_state,
    replay,
)

# --- statuses ----------------------------------------------------------------

PENDING = "pending"
RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"
CANCELLED = "cancelled"
TERMINAL = (FINISHED, FAILED, CANCELLED)


@dataclass(frozen=True)
class StatusMessage:
    severity: str  # error | warning | info
    text: str
    offset: int = 0  # byte offset into the span's raw text


@dataclass(frozen=True)
class SpanStatus:
    state: str
    messages: Tuple[StatusMessage, ...] = ()

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL


STATUS_PENDING = SpanStatus(PENDING)
STATUS_RUNNING = SpanStatus(RUNNING)
STATUS_FINISHED = SpanStatus(FINISHED)


def failed_status(text: str, offset: int = 0) -> SpanStatus:
    return SpanStatus(FAILED, (StatusMessage("error", text, offset),))


def cancelled_status(text: str) -> SpanStatus:
    return SpanStatus(CANCELLED, (StatusMessage("info", text, 0),))


# --- environment --------------------------------------------------------------


class ProofStatusCell:
    """pending | proved | failed. Written only by the coordinator, when it
    applies a region result (or reuses a memoized one); workers get value
    snapshots and never need to observe later writes."""

    __slots__ = ("value",)

    def __init__(self, value: str = "pending"):
        self.value = value


@dataclass(frozen=True)
class Fact:
    name: str
    statement: Formula  # fully definition-expanded
    kind: str  # "def" | "lemma"
    cell: Optional[ProofStatusCell]  # lemmas only


class Environment:
    """Immutable ordered name -> Fact mapping; extension copies."""

    __slots__ = ("_facts",)

    def __init__(self, facts: Optional[Dict[str, Fact]] = None):
        self._facts = facts or {}

    def get(self, name: str) -> Optional[Fact]:
        return self._facts.get(name)

    def extended(self, fact: Fact) -> "Environment":
        facts = dict(self._facts)
        facts[fact.name] = fact
        return Environment(facts)

    def facts(self) -> Tuple[Fact, ...]:
        return tuple(self._facts.values())

    def lemma_statements(self) -> Dict[str, Formula]:
        """Name -> statement for lemma facts, in declaration order: the fact
        map proofs may reference. Defs are aliases, not provable facts, and
        pending or failed lemmas stay usable (promises are never retracted)."""
        return {f.name: f.statement for f in self._facts.values() if f.kind == "lemma"}


EMPTY_ENV = Environment()


def expand(f: Formula, env: Environment) -> Formula:
    """Replace atoms naming def facts by their (already expanded) bodies."""
    if isinstance(f, Atom):
        fact = env.get(f.name)
        if fact is not None and fact.kind == "def":
            return fact.statement
        return f
    if isinstance(f, Impl):
        return Impl(expand(f.lhs, env), expand(f.rhs, env))
    if isinstance(f, And):
        return And(expand(f.lhs, env), expand(f.rhs, env))
    if isinstance(f, Or):
        return Or(expand(f.lhs, env), expand(f.rhs, env))
    return f  # FalseConst


# --- hashing ------------------------------------------------------------------


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


STATE_INIT = _digest("init")


def effect_def(name: str, body: Formula) -> str:
    return _digest("def", name, pretty(body))


def effect_lemma(name: str, statement: Formula) -> str:
    """Hash of the statement as written; deliberately excludes the proof."""
    return _digest("lemma", name, pretty(statement))


def effect_error(norm_hash: str) -> str:
    return _digest("error", norm_hash)


def advance(parent: str, effect: str) -> str:
    return _digest(parent, effect)


def body_digest(norm_hashes: List[str]) -> str:
    return _digest("body", *norm_hashes)


# --- plan ---------------------------------------------------------------------


@dataclass(frozen=True)
class EnvItem:
    """A chain-advancing def or lemma header; memoizable by (parent, norm)."""

    span_id: int
    parent: str
    state_after: str
    key: Tuple[str, str]
    command: Union[Def, LemmaHeader]
    region_index: Optional[int]  # set on headers that own a complete region
    reused: bool


@dataclass(frozen=True)
class ErrorItem:
    """A parse or structure failure. Advances the chain with an "error"
    effect (conservative poisoning) but is never memoized: recomputing the
    message is free and keeps offsets true to the current raw text."""

    span_id: int
    parent: str
    state_after: str
    message: str
    offset: int


@dataclass(frozen=True)
class BodyItem:
    """A span inside a complete proof region; no chain effect."""

    span_id: int
    region_index: int
    position: int


PlanItem = Union[EnvItem, ErrorItem, BodyItem]


@dataclass(frozen=True)
class RegionPlan:
    index: int
    name: str
    statement: Formula  # as written, unexpanded
    header_span_id: int
    state: str  # StateId after the header
    body_span_ids: Tuple[int, ...]
    body_commands: Tuple[Command, ...]
    body_hash: str
    key: Tuple[str, str]
    reused: bool


@dataclass(frozen=True)
class Plan:
    version: int
    items: Tuple[PlanItem, ...]  # document order, one per span
    regions: Tuple[RegionPlan, ...]

    def region_keys(self) -> frozenset:
        return frozenset(r.key for r in self.regions)

    def final_state(self) -> str:
        state = STATE_INIT
        for item in self.items:
            if isinstance(item, (EnvItem, ErrorItem)):
                state = item.state_after
        return state


def plan(v: DocumentVersion, memo: "MemoStore") -> Plan:
    """Walk spans computing the state chain, group proof regions, and mark
    everything whose memo key already has a result as reused.

    Structure rules: a region is `lemma` + `proof` + steps + `qed`. A lemma
    followed by anything but `proof` fails the header span. A region broken
    off by a def/lemma/EOF before `qed` keeps its header (the statement is
    still a usable promise) but fails the collected body spans, poisoning
    the chain. Loose proof/step/qed spans fail where they stand.
    """
    items: List[PlanItem] = []
    regions: List[RegionPlan] = []
    state = STATE_INIT

    def add_error(span, message: str, offset: int = 0) -> None:
        nonlocal state
        parent = state
        state = advance(parent, effect_error(span.norm_hash))
        items.append(ErrorItem(span.span_id, parent, state, message, offset))

    def add_env(span, cmd, region_index: Optional[int]) -> None:
        nonlocal state
        parent = state
        if isinstance(cmd, Def):
            effect = effect_def(cmd.name, cmd.body)
        else:
            effect = effect_lemma(cmd.name, cmd.statement)
        state = advance(parent, effect)
        key = (parent, span.norm_hash)
        items.append(
            EnvItem(span.span_id, parent, state, key, cmd, region_index, key in memo.env)
        )

    spans = list(v.spans)
    i = 0
    while i < len(spans):
        span = spans[i]
        cmd = span.command
        if isinstance(cmd, Def):
            add_env(span, cmd, None)
            i += 1
        elif isinstance(cmd, Malformed):
            add_error(span, cmd.message, cmd.offset)
            i += 1
        elif isinstance(cmd, ProofOpen):
            add_error(span, "proof without an open lemma")
            i += 1
        elif isinstance(cmd, Step):
            add_error(span, "step outside a proof region")
            i += 1
        elif isinstance(cmd, Qed):
            add_error(span, "qed without an open proof region")
            i += 1
        elif isinstance(cmd, LemmaHeader):
            if i + 1 < len(spans) and isinstance(spans[i + 1].command, ProofOpen):
                body = []
                j = i + 1
                closed = False
                while j < len(spans):
                    inner = spans[j].command
                    if isinstance(inner, (Def, LemmaHeader)):
                        break
                    body.append(spans[j])
                    j += 1
                    if isinstance(inner, Qed):
                        closed = True
                        break
                if closed:
                    index = len(regions)
                    add_env(span, cmd, index)
                    bh = body_digest([b.norm_hash for b in body])
                    key = (state, bh)
                    regions.append(
                        RegionPlan(
                            index,
                            cmd.name,
                            cmd.statement,
                            span.span_id,
                            state,
                            tuple(b.span_id for b in body),
                            tuple(b.command for b in body),
                            bh,
                            key,
                            key in memo.region,
                        )
                    )
                    for pos, b in enumerate(body):
                        items.append(BodyItem(b.span_id, index, pos))
                else:
                    add_env(span, cmd, None)
                    for b in body:
                        add_error(b, "missing qed: proof region never closed")
                i = j
            else:
                add_error(span, "lemma without proof")
                i += 1
        else:
            raise AssertionError(f"unplannable command {cmd!r}")
    return Plan(v.version, tuple(items), tuple(regions))


# --- transactions ---------------------------------------------------------------


@dataclass(frozen=True)
class TransactionOutcome:
    env: Environment
    status: SpanStatus
    fact: Optional[Fact]


def exec_transaction(env: Environment, cmd: Command) -> TransactionOutcome:
    """Run one environment-affecting command. Total: failures are statuses."""
    if isinstance(cmd, Def):
        if env.get(cmd.name) is not None:
            return TransactionOutcome(env, failed_status(f"duplicate name {cmd.name}"), None)
        fact = Fact(cmd.name, expand(cmd.body, env), "def", None)
        return TransactionOutcome(env.extended(fact), STATUS_FINISHED, fact)
    if isinstance(cmd, LemmaHeader):
        if env.get(cmd.name) is not None:
            return TransactionOutcome(env, failed_status(f"duplicate name {cmd.name}"), None)
        fact = Fact(cmd.name, expand(cmd.statement, env), "lemma", ProofStatusCell())
        return TransactionOutcome(env.extended(fact), STATUS_FINISHED, fact)
    if isinstance(cmd, Malformed):
        return TransactionOutcome(env, failed_status(cmd.message, cmd.offset), None)
    raise TypeError(f"not an environment-affecting command: {cmd!r}")


# --- proof regions ----------------------------------------------------------------


class RegionCancelled(Exception):
    pass


@dataclass(frozen=True)
class RegionResult:
    verdict: str  # "proved" | "failed"
    statuses: Tuple[SpanStatus, ...]  # aligned with body positions


PROVED = "proved"
FAILED_PROOF = "failed"


def check_proof_region(
    facts: Dict[str, Formula],
    statement: Formula,
    body_commands: Tuple[Command, ...],
    cancel=None,
) -> RegionResult:
    """Execute a region's steps and replay the derivation at qed.

    `facts` is the lemma-statement map from BEFORE the header, so a proof
    can never use its own lemma. After a failed step, the remaining spans
    are unreachable and get cancelled statuses. Raises RegionCancelled if
    the token is observed set; a cancelled region reports nothing.
    """
    statuses: List[Optional[SpanStatus]] = [None] * len(body_commands)
    statuses[0] = STATUS_FINISHED  # the structure pass guarantees ProofOpen
    state = initial_proof_state(statement)
    dead = False
    verdict = FAILED_PROOF
    for pos in range(1, len(body_commands)):
        if cancel is not None and cancel.is_set():
            raise RegionCancelled()
        if dead:
            statuses[pos] = cancelled_status("unreachable after failed step")
            continue
        cmd = body_commands[pos]
        if isinstance(cmd, Step):
            try:
                state = apply_step(state, cmd.step, facts, cancel)
                statuses[pos] = STATUS_FINISHED
            except SearchCancelled as e:
                raise RegionCancelled() from e
            except StepError as e:
                statuses[pos] = failed_status(str(e))
                dead = True
        elif isinstance(cmd, Qed):
            remaining = len(state.goals)
            if remaining:
                plural = "s" if remaining > 1 else ""
                statuses[pos] = failed_status(f"{remaining} open goal{plural}")
                dead = True
                continue
            try:
                thm = replay(state.derivation, facts)
                if thm.conclusion != statement:
                    raise ReplayError("replayed conclusion differs from the statement")
                statuses[pos] = STATUS_FINISHED
                verdict = PROVED
            except ReplayError as e:
                statuses[pos] = failed_status(str(e))
                dead = True
        elif isinstance(cmd, Malformed):
            statuses[pos] = failed_status(cmd.message, cmd.offset)
            dead = True
        else:
            statuses[pos] = failed_status("unexpected command inside a proof region")
            dead = True
    return RegionResult(verdict, tuple(statuses))


# --- memo -------------------------------------------------------------------------


class MemoStore:
    """Unbounded content-addressed result store for one engine session."""

    def __init__(self):
        self.env: Dict[Tuple[str, str], TransactionOutcome] = {}
        self.region: Dict[Tuple[str, str], RegionResult] = {}


def stale_region_keys(old_plan: Plan, new_plan: Plan) -> frozenset:
    """Region keys that were planned before but make no sense now; running
    tasks with these keys should get their cancellation tokens set."""
    return old_plan.region_keys() - new_plan.region_keys()


# --- synchronous checking -----------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    statuses: Dict[int, SpanStatus]  # span_id -> terminal status
    verdicts: Dict[int, str]  # header span_id -> proved | failed
    env_executed: int  # transactions actually run (memo misses)
    regions_executed: int
    plan: Plan


def check_document(v: DocumentVersion, memo: Optional[MemoStore] = None) -> CheckReport:
    """Check a whole version to quiescence, inline and single-threaded.

    This is the semantic reference: the concurrent engine must produce the
    same terminal statuses for the same version and memo state. With a warm
    memo it also exhibits exactly the planned reuse, which makes it the
    measuring stick for reuse-locality tests.
    """
    memo = memo if memo is not None else MemoStore()
    p = plan(v, memo)
    statuses: Dict[int, SpanStatus] = {}
    verdicts: Dict[int, str] = {}
    env_executed = 0
    regions_executed = 0

    env = EMPTY_ENV
    # region index -> (env before header, header outcome)
    region_ctx: Dict[int, Tuple[Environment, TransactionOutcome]] = {}
    for item in p.items:
        if isinstance(item, EnvItem):
            before = env
            if item.reused:
                outcome = memo.env[item.key]
            else:
                outcome = exec_transaction(env, item.command)
                memo.env[item.key] = outcome
                env_executed += 1
            env = outcome.env
            statuses[item.span_id] = outcome.status
            if item.region_index is not None:
                region_ctx[item.region_index] = (before, outcome)
        elif isinstance(item, ErrorItem):
            statuses[item.span_id] = failed_status(item.message, item.offset)

    for region in p.regions:
        before, outcome = region_ctx[region.index]
        if outcome.fact is None:  # header failed (duplicate name)
            for sid in region.body_span_ids:
                statuses[sid] = failed_status("lemma header failed")
            verdicts[region.header_span_id] = FAILED_PROOF
            continue
        if region.reused:
            result = memo.region[region.key]
        else:
            result = check_proof_region(
                before.lemma_statements(), outcome.fact.statement, region.body_commands
            )
            memo.region[region.key] = result
            regions_executed += 1
        for sid, status in zip(region.body_span_ids, result.statuses):
            statuses[sid] = status
        outcome.fact.cell.value = result.verdict
        verdicts[region.header_span_id] = result.verdict
    return CheckReport(statuses, verdicts, env_executed, regions_executed, p)
