"""Untrusted proof engine: goal states, steps, bounded search, kernel replay.

Nothing here is trusted. Steps record a derivation tree as they run, and
`replay` pushes that tree through kernel.infer at the end; the kernel is
the final authority on whether a finished proof stands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Mapping, Optional, Sequence, Tuple

from .kernel import (
    FALSE,
    And,
    Formula,
    Impl,
    KernelError,
    Or,
    Rule,
    Thm,
    infer,
    neg,
)
from .syntax import (
    Apply,
    ByContra,
    Cases,
    Exact,
    Exfalso,
    Intro,
    Left,
    ProofStep,
    Right,
    Search,
    Split,
    pretty,
)

# Facts visible to a proof: fact name -> statement, in declaration order.
FactMap = Mapping[str, Formula]


class StepError(Exception):
    """A step that does not apply. kind is one of: NoOpenGoal,
    WrongTargetShape, UnknownName, DuplicateHypName, NotFound, Cancelled."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


class NotFound(StepError):
    def __init__(self, message: str = "search budget exhausted"):
        super().__init__("NotFound", message)


class Cancelled(StepError):
    def __init__(self, message: str = "search cancelled"):
        super().__init__("Cancelled", message)


class ReplayError(Exception):
    pass


@dataclass(frozen=True)
class Goal:
    hyps: Tuple[Tuple[str, Formula], ...]
    target: Formula

    def hyp(self, name: str) -> Optional[Formula]:
        for n, f in self.hyps:
            if n == name:
                return f
        return None

    def format(self) -> str:
        left = ", ".join(f"{n} : {pretty(f)}" for n, f in self.hyps)
        return f"{left} |- {pretty(self.target)}" if left else f"|- {pretty(self.target)}"


# One derivation node per executed step. `formula` is what replay needs:
#   exact     the proved formula (assumed, discharged or left to the env)
#   intro     the antecedent being discharged
#   apply     the full implication chain of the applied fact
#   left      the missing right disjunct   right  the missing left disjunct
#   cases_and the conjunction              cases_or the disjunction
#   by_contra the original target          exfalso  the original target
#   split, hole: unused
@dataclass(frozen=True)
class DNode:
    kind: str
    formula: Optional[Formula]
    children: Tuple["DNode", ...]


HOLE = DNode("hole", None, ())


@dataclass(frozen=True)
class ProofState:
    """Open goals plus the partial derivation; the n-th goal corresponds to
    the n-th hole in preorder (every step acts on the first of each)."""

    goals: Tuple[Goal, ...]
    derivation: DNode

    @property
    def done(self) -> bool:
        return not self.goals


def initial_proof_state(statement: Formula) -> ProofState:
    return ProofState((Goal((), statement),), HOLE)


def _fill_first_hole(node: DNode, replacement: DNode) -> Optional[DNode]:
    if node.kind == "hole":
        return replacement
    for i, child in enumerate(node.children):
        filled = _fill_first_hole(child, replacement)
        if filled is not None:
            kids = node.children[:i] + (filled,) + node.children[i + 1 :]
            return DNode(node.kind, node.formula, kids)
    return None


def _resolve(goal: Goal, env: FactMap, name: str) -> Optional[Formula]:
    """Local hypotheses shadow environment facts."""
    local = goal.hyp(name)
    if local is not None:
        return local
    return env.get(name)


def _peel(chi: Formula, target: Formula) -> Optional[List[Formula]]:
    """Antecedents for the smallest k >= 0 with chi = a1 -> .. -> ak -> target."""
    args: List[Formula] = []
    cur = chi
    while True:
        if cur == target:
            return args
        if isinstance(cur, Impl):
            args.append(cur.lhs)
            cur = cur.rhs
        else:
            return None


def _fresh_names(goal: Goal, count: int) -> List[str]:
    used = {n for n, _ in goal.hyps}
    out: List[str] = []
    i = 1
    while len(out) < count:
        cand = f"h{i}"
        if cand not in used:
            out.append(cand)
            used.add(cand)
        i += 1
    return out


def apply_step(
    state: ProofState, step: ProofStep, env: FactMap, cancel=None
) -> ProofState:
    """Apply one step to the first goal; raises StepError if it does not apply."""
    if isinstance(step, Search):
        return _splice_search(state, step.depth, env, cancel)
    if not state.goals:
        raise StepError("NoOpenGoal", "no open goal")
    goal, rest = state.goals[0], state.goals[1:]
    target = goal.target

    if isinstance(step, Intro):
        if not isinstance(target, Impl):
            raise StepError("WrongTargetShape", "intro needs an implication target")
        if goal.hyp(step.name) is not None:
            raise StepError("DuplicateHypName", f"hypothesis {step.name} already exists")
        sub = Goal(goal.hyps + ((step.name, target.lhs),), target.rhs)
        return _close(state, rest, [sub], DNode("intro", target.lhs, (HOLE,)))

    if isinstance(step, Exact):
        f = _resolve(goal, env, step.name)
        if f is None:
            raise StepError("UnknownName", f"unknown name {step.name}")
        if f != target:
            raise StepError(
                "WrongTargetShape", f"{step.name} : {pretty(f)} does not match the target"
            )
        return _close(state, rest, [], DNode("exact", f, ()))

    if isinstance(step, Apply):
        f = _resolve(goal, env, step.name)
        if f is None:
            raise StepError("UnknownName", f"unknown name {step.name}")
        args = _peel(f, target)
        if args is None:
            raise StepError(
                "WrongTargetShape", f"{step.name} : {pretty(f)} does not conclude the target"
            )
        subs = [Goal(goal.hyps, a) for a in args]
        node = DNode("apply", f, tuple(HOLE for _ in args))
        return _close(state, rest, subs, node)

    if isinstance(step, Split):
        if not isinstance(target, And):
            raise StepError("WrongTargetShape", "split needs a conjunction target")
        subs = [Goal(goal.hyps, target.lhs), Goal(goal.hyps, target.rhs)]
        return _close(state, rest, subs, DNode("split", None, (HOLE, HOLE)))

    if isinstance(step, Left):
        if not isinstance(target, Or):
            raise StepError("WrongTargetShape", "left needs a disjunction target")
        sub = Goal(goal.hyps, target.lhs)
        return _close(state, rest, [sub], DNode("left", target.rhs, (HOLE,)))

    if isinstance(step, Right):
        if not isinstance(target, Or):
            raise StepError("WrongTargetShape", "right needs a disjunction target")
        sub = Goal(goal.hyps, target.rhs)
        return _close(state, rest, [sub], DNode("right", target.lhs, (HOLE,)))

    if isinstance(step, Cases):
        f = goal.hyp(step.name)
        if f is None:
            raise StepError("UnknownName", f"no hypothesis {step.name}")
        if isinstance(f, And):
            a, b = _fresh_names(goal, 2)
            sub = Goal(goal.hyps + ((a, f.lhs), (b, f.rhs)), target)
            return _close(state, rest, [sub], DNode("cases_and", f, (HOLE,)))
        if isinstance(f, Or):
            a = _fresh_names(goal, 1)[0]
            subs = [
                Goal(goal.hyps + ((a, f.lhs),), target),
                Goal(goal.hyps + ((a, f.rhs),), target),
            ]
            return _close(state, rest, subs, DNode("cases_or", f, (HOLE, HOLE)))
        raise StepError(
            "WrongTargetShape", f"cases needs a conjunction or disjunction, got {pretty(f)}"
        )

    if isinstance(step, ByContra):
        if goal.hyp(step.name) is not None:
            raise StepError("DuplicateHypName", f"hypothesis {step.name} already exists")
        sub = Goal(goal.hyps + ((step.name, neg(target)),), FALSE)
        return _close(state, rest, [sub], DNode("by_contra", target, (HOLE,)))

    if isinstance(step, Exfalso):
        sub = Goal(goal.hyps, FALSE)
        return _close(state, rest, [sub], DNode("exfalso", target, (HOLE,)))

    raise StepError("WrongTargetShape", f"unsupported step {step!r}")


def _close(
    state: ProofState, rest: Tuple[Goal, ...], subs: Sequence[Goal], node: DNode
) -> ProofState:
    filled = _fill_first_hole(state.derivation, node)
    assert filled is not None, "goal/hole invariant broken"
    return ProofState(tuple(subs) + rest, filled)


# --- search -----------------------------------------------------------------


def _candidates(goal: Goal, env: FactMap) -> Iterator[ProofStep]:
    """Canonical candidate order; determinism depends on it, change nothing.

    Exact over hyps then env; Intro; Apply over hyps then env (k >= 1 only,
    k = 0 is Exact); Split; Left; Right; Cases over eligible hyps; Exfalso
    (pointless when the target is already false); ByContra unless its
    hypothesis already exists. Shadowed env names are skipped: resolution
    would pick the hypothesis, which has its own candidate already.
    """
    target = goal.target
    used = {n for n, _ in goal.hyps}
    for n, f in goal.hyps:
        if f == target:
            yield Exact(n)
    for n, f in env.items():
        if n not in used and f == target:
            yield Exact(n)
    if isinstance(target, Impl):
        yield Intro(_fresh_names(goal, 1)[0])
    for n, f in goal.hyps:
        if _peel(f, target):
            yield Apply(n)
    for n, f in env.items():
        if n not in used and _peel(f, target):
            yield Apply(n)
    if isinstance(target, And):
        yield Split()
    if isinstance(target, Or):
        yield Left()
        yield Right()
    for n, f in goal.hyps:
        if isinstance(f, (And, Or)):
            yield Cases(n)
    if target != FALSE:
        yield Exfalso()
    if neg(target) not in {f for _, f in goal.hyps}:
        yield ByContra(_fresh_names(goal, 1)[0])


def _dfs(
    state: ProofState, budget: int, env: FactMap, cancel, acc: List[ProofStep]
) -> Optional[List[ProofStep]]:
    if cancel is not None and cancel.is_set():
        raise Cancelled()
    if state.done:
        return list(acc)
    if budget == 0:
        return None
    for step in _candidates(state.goals[0], env):
        try:
            nxt = apply_step(state, step, env)
        except StepError:
            continue
        acc.append(step)
        found = _dfs(nxt, budget - 1, env, cancel, acc)
        if found is not None:
            return found
        acc.pop()
    return None


def search(
    state: ProofState, depth: int, env: FactMap, cancel=None
) -> List[ProofStep]:
    """Iterative-deepening search; first solution in canonical order.

    Depth counts total steps across all goals. Raises NotFound when the
    budget is exhausted; Cancelled as soon as the token is observed set
    (checked at every node expansion).
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    for limit in range(1, depth + 1):
        found = _dfs(state, limit, env, cancel, [])
        if found is not None:
            return found
    raise NotFound()


def _splice_search(state: ProofState, depth: int, env: FactMap, cancel) -> ProofState:
    if not state.goals:
        raise StepError("NoOpenGoal", "no open goal")
    focused = ProofState((state.goals[0],), HOLE)
    steps = search(focused, depth, env, cancel)
    for s in steps:
        state = apply_step(state, s, env)
    return state


# --- replay -----------------------------------------------------------------


def _replay(node: DNode) -> Thm:
    k = node.kind
    if k == "hole":
        raise ReplayError("incomplete derivation")
    if k == "exact":
        return infer(Rule.ASSUME, [], [node.formula])
    if k == "intro":
        return infer(Rule.IMPL_INTRO, [_replay(node.children[0])], [node.formula])
    if k == "apply":
        thm = infer(Rule.ASSUME, [], [node.formula])
        for child in node.children:
            thm = infer(Rule.IMPL_ELIM, [thm, _replay(child)], [])
        return thm
    if k == "split":
        return infer(
            Rule.AND_INTRO, [_replay(node.children[0]), _replay(node.children[1])], []
        )
    if k == "left":
        return infer(Rule.OR_INTRO_L, [_replay(node.children[0])], [node.formula])
    if k == "right":
        return infer(Rule.OR_INTRO_R, [_replay(node.children[0])], [node.formula])
    if k == "cases_and":
        conj = node.formula
        body = _replay(node.children[0])
        curried = infer(Rule.IMPL_INTRO, [body], [conj.rhs])
        curried = infer(Rule.IMPL_INTRO, [curried], [conj.lhs])
        assumed = infer(Rule.ASSUME, [], [conj])
        left = infer(Rule.AND_ELIM_L, [assumed], [])
        right = infer(Rule.AND_ELIM_R, [assumed], [])
        step1 = infer(Rule.IMPL_ELIM, [curried, left], [])
        return infer(Rule.IMPL_ELIM, [step1, right], [])
    if k == "cases_or":
        assumed = infer(Rule.ASSUME, [], [node.formula])
        return infer(
            Rule.OR_ELIM,
            [assumed, _replay(node.children[0]), _replay(node.children[1])],
            [],
        )
    if k == "by_contra":
        target = node.formula
        body = infer(Rule.IMPL_INTRO, [_replay(node.children[0])], [neg(target)])
        dn = infer(Rule.DOUBLE_NEG_ELIM, [], [target])
        return infer(Rule.IMPL_ELIM, [dn, body], [])
    if k == "exfalso":
        return infer(Rule.FALSE_ELIM, [_replay(node.children[0])], [node.formula])
    raise ReplayError(f"unknown derivation node {k!r}")


def replay(derivation: DNode, env: FactMap) -> Thm:
    """Rebuild the theorem through the kernel. Every leftover hypothesis must
    be the statement of an environment fact; anything else means the tactic
    layer (or a tampered derivation) produced garbage."""
    try:
        thm = _replay(derivation)
    except KernelError as e:
        raise ReplayError(f"kernel rejected replay: {e}") from e
    statements = set(env.values())
    stray = [f for f in thm.hypotheses if f not in statements]
    if stray:
        raise ReplayError(
            "undischarged hypotheses not in the environment: "
            + ", ".join(sorted(pretty(f) for f in stray))
        )
    return thm


def dn_statement(n: int, atom_name: str = "p") -> Formula:
    """The benchmark family: 2n stacked negations over an atom, implying it.

    Provable classically in exactly 2n + 2 steps; search cost grows steeply
    with n, which makes it a good knob for load tests.
    """
    from .kernel import Atom

    base = Atom(atom_name)
    f: Formula = base
    for _ in range(2 * n):
        f = neg(f)
    return Impl(f, base)
