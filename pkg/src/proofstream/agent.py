"""The hammer: on-demand proof search for one span of a proof region.

The coordinator snapshots everything the search needs at query time (the
pre-header fact map, the expanded lemma statement, and the prefix of steps
before the chosen span) so the worker can rebuild the proof state without
touching any shared structure. The search runs on the first open goal only
and the suggestion is rendered in concrete syntax, ready to paste over the
span it was asked about.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Tuple

from .kernel import Formula
from .syntax import ProofStep, render_steps
from .tactics import (
    HOLE,
    Cancelled,
    NotFound,
    ProofState,
    StepError,
    apply_step,
    initial_proof_state,
    search,
)


def hammer_payload(
    facts: Dict[str, Formula],
    statement: Formula,
    prefix_steps: Iterable[ProofStep],
    depth: int,
) -> tuple:
    """Freeze the inputs into the picklable shape run_hammer expects."""
    return (dict(facts), statement, tuple(prefix_steps), int(depth))


def run_hammer(payload: tuple, cancel=None) -> Tuple[str, Any]:
    """Execute a hammer query; runs inside a worker process.

    Returns ("done", ("ok", suggestion)), ("done", ("failed", "")) or
    ("cancelled", None), mirroring the worker result convention. A prefix
    that no longer applies cleanly counts as "no open goal", not an error:
    the document has simply moved on from the state the query described.
    """
    facts, statement, prefix, depth = payload
    state = initial_proof_state(statement)
    for step in prefix:
        try:
            state = apply_step(state, step, facts, cancel)
        except Cancelled:
            return "cancelled", None
        except StepError:
            return "done", ("failed", "")
    if state.done:
        return "done", ("failed", "")
    focused = ProofState((state.goals[0],), HOLE)
    try:
        steps = search(focused, depth, facts, cancel)
    except Cancelled:
        return "cancelled", None
    except NotFound:
        return "done", ("failed", "")
    return "done", ("ok", render_steps(steps))
