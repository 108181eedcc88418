"""Trusted inference core.

Everything downstream (tactics, document checking, the wire protocol) is
untrusted machinery that may only *propose* proofs; a certified theorem
(`Thm`) can be produced exclusively by `infer`, which implements a fixed
table of natural-deduction rules for classical propositional logic.

The module also ships `tautology_check`, an exhaustive truth-table oracle.
It is deliberately independent of `infer` so tests can cross-check the two.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Sequence, Set, Tuple, Union


class KernelError(Exception):
    """Base class for rejected inferences and oracle misuse."""


class ArityMismatch(KernelError):
    def __init__(self, rule: "Rule", what: str, expected: int, got: int):
        self.rule = rule
        super().__init__(
            f"{rule.rule_name}: expected {expected} {what}, got {got}"
        )


class MalformedPremise(KernelError):
    def __init__(self, rule: "Rule", position: int, reason: str):
        self.rule = rule
        self.position = position
        super().__init__(f"{rule.rule_name}: premise {position}: {reason}")


class TooManyAtoms(KernelError):
    """The truth-table oracle is inapplicable, not that the input is wrong."""


_ATOM_NAME = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*\Z")


@dataclass(frozen=True)
class Atom:
    name: str

    def __post_init__(self):
        if not _ATOM_NAME.match(self.name):
            raise ValueError(f"invalid atom name: {self.name!r}")


@dataclass(frozen=True)
class FalseConst:
    pass


@dataclass(frozen=True)
class Impl:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class And:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Or:
    lhs: "Formula"
    rhs: "Formula"


Formula = Union[Atom, FalseConst, Impl, And, Or]

FALSE = FalseConst()


def neg(phi: Formula) -> Formula:
    """Negation is not primitive: ~phi is phi -> false."""
    return Impl(phi, FALSE)


def atoms(phi: Formula) -> Set[str]:
    if isinstance(phi, Atom):
        return {phi.name}
    if isinstance(phi, FalseConst):
        return set()
    return atoms(phi.lhs) | atoms(phi.rhs)


def evaluate(phi: Formula, assignment: Dict[str, bool]) -> bool:
    if isinstance(phi, Atom):
        return assignment[phi.name]
    if isinstance(phi, FalseConst):
        return False
    if isinstance(phi, Impl):
        return (not evaluate(phi.lhs, assignment)) or evaluate(phi.rhs, assignment)
    if isinstance(phi, And):
        return evaluate(phi.lhs, assignment) and evaluate(phi.rhs, assignment)
    return evaluate(phi.lhs, assignment) or evaluate(phi.rhs, assignment)


# Private seal: Thm() refuses to construct without it, so the only route to
# a theorem from outside this module is infer().
_SEAL = object()


class Thm:
    """A certified judgment `hypotheses |- conclusion`."""

    __slots__ = ("_hyps", "_concl")

    def __init__(self, seal, hyps: FrozenSet[Formula], concl: Formula):
        if seal is not _SEAL:
            raise KernelError("Thm values can only be constructed by infer()")
        self._hyps = frozenset(hyps)
        self._concl = concl

    @property
    def hypotheses(self) -> FrozenSet[Formula]:
        return self._hyps

    @property
    def conclusion(self) -> Formula:
        return self._concl

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Thm)
            and self._hyps == other._hyps
            and self._concl == other._concl
        )

    def __hash__(self) -> int:
        return hash((self._hyps, self._concl))

    def __repr__(self) -> str:
        return f"Thm({set(self._hyps)!r} |- {self._concl!r})"


class Rule(Enum):
    """Primitive rules with exact arities (premise count, formula-arg count)."""

    ASSUME = ("Assume", 0, 1)
    IMPL_INTRO = ("ImplIntro", 1, 1)
    IMPL_ELIM = ("ImplElim", 2, 0)
    AND_INTRO = ("AndIntro", 2, 0)
    AND_ELIM_L = ("AndElimL", 1, 0)
    AND_ELIM_R = ("AndElimR", 1, 0)
    OR_INTRO_L = ("OrIntroL", 1, 1)
    OR_INTRO_R = ("OrIntroR", 1, 1)
    OR_ELIM = ("OrElim", 3, 0)
    FALSE_ELIM = ("FalseElim", 1, 1)
    DOUBLE_NEG_ELIM = ("DoubleNegElim", 0, 1)

    @property
    def rule_name(self) -> str:
        return self.value[0]

    @property
    def premise_count(self) -> int:
        return self.value[1]

    @property
    def arg_count(self) -> int:
        return self.value[2]


def _mk(hyps: Iterable[Formula], concl: Formula) -> Thm:
    return Thm(_SEAL, frozenset(hyps), concl)


def infer(rule: Rule, premises: Sequence[Thm], args: Sequence[Formula]) -> Thm:
    """Apply one primitive rule; the sole constructor of Thm values."""
    if len(premises) != rule.premise_count:
        raise ArityMismatch(rule, "premises", rule.premise_count, len(premises))
    if len(args) != rule.arg_count:
        raise ArityMismatch(rule, "formula arguments", rule.arg_count, len(args))
    for i, p in enumerate(premises):
        if not isinstance(p, Thm):
            raise MalformedPremise(rule, i, "not a certified theorem")

    if rule is Rule.ASSUME:
        (phi,) = args
        return _mk({phi}, phi)

    if rule is Rule.IMPL_INTRO:
        (t,) = premises
        (phi,) = args
        return _mk(t.hypotheses - {phi}, Impl(phi, t.conclusion))

    if rule is Rule.IMPL_ELIM:
        timp, targ = premises
        if not isinstance(timp.conclusion, Impl):
            raise MalformedPremise(rule, 0, "conclusion is not an implication")
        if targ.conclusion != timp.conclusion.lhs:
            raise MalformedPremise(rule, 1, "does not match the antecedent")
        return _mk(timp.hypotheses | targ.hypotheses, timp.conclusion.rhs)

    if rule is Rule.AND_INTRO:
        tl, tr = premises
        return _mk(tl.hypotheses | tr.hypotheses, And(tl.conclusion, tr.conclusion))

    if rule is Rule.AND_ELIM_L or rule is Rule.AND_ELIM_R:
        (t,) = premises
        if not isinstance(t.conclusion, And):
            raise MalformedPremise(rule, 0, "conclusion is not a conjunction")
        side = t.conclusion.lhs if rule is Rule.AND_ELIM_L else t.conclusion.rhs
        return _mk(t.hypotheses, side)

    if rule is Rule.OR_INTRO_L:
        (t,) = premises
        (psi,) = args
        return _mk(t.hypotheses, Or(t.conclusion, psi))

    if rule is Rule.OR_INTRO_R:
        (t,) = premises
        (phi,) = args
        return _mk(t.hypotheses, Or(phi, t.conclusion))

    if rule is Rule.OR_ELIM:
        tor, tl, tr = premises
        if not isinstance(tor.conclusion, Or):
            raise MalformedPremise(rule, 0, "conclusion is not a disjunction")
        if tl.conclusion != tr.conclusion:
            raise MalformedPremise(rule, 2, "case conclusions differ")
        chi = tl.conclusion
        hyps = (
            tor.hypotheses
            | (tl.hypotheses - {tor.conclusion.lhs})
            | (tr.hypotheses - {tor.conclusion.rhs})
        )
        return _mk(hyps, chi)

    if rule is Rule.FALSE_ELIM:
        (t,) = premises
        (phi,) = args
        if not isinstance(t.conclusion, FalseConst):
            raise MalformedPremise(rule, 0, "conclusion is not false")
        return _mk(t.hypotheses, phi)

    if rule is Rule.DOUBLE_NEG_ELIM:
        (phi,) = args
        return _mk(set(), Impl(Impl(Impl(phi, FALSE), FALSE), phi))

    raise KernelError(f"unknown rule {rule!r}")


def tautology_check(
    premises: Sequence[Formula], conclusion: Formula, max_atoms: int = 20
) -> bool:
    """True iff every assignment satisfying all premises satisfies the conclusion.

    Exhaustive over 2^n assignments; refuses (TooManyAtoms) when the combined
    atom count exceeds max_atoms, signalling the oracle is inapplicable.
    """
    names: Set[str] = set()
    for f in premises:
        names |= atoms(f)
    names |= atoms(conclusion)
    if len(names) > max_atoms:
        raise TooManyAtoms(f"{len(names)} atoms exceeds limit {max_atoms}")
    order = sorted(names)
    for values in itertools.product((False, True), repeat=len(order)):
        assignment = dict(zip(order, values))
        if all(evaluate(p, assignment) for p in premises) and not evaluate(
            conclusion, assignment
        ):
            return False
    return True
