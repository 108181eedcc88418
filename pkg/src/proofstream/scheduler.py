"""Priority worker pool over forked processes.

Region checks and hammer searches run in separate worker processes so they
can proceed in parallel and be cancelled cooperatively. Each worker owns a
command pipe and one cancellation event; all results funnel through a
single queue back to whoever coordinates (the engine drains it from a
reader thread).

Everything mutable here (heap, registry, free list, event log) belongs to
one coordinator thread. Nothing is locked because nothing is shared across
threads; the only cross-process traffic is pipe messages, the results
queue, and the per-slot events.

The per-task cancellation token of the interface is realized as the event
of the slot the task runs on: the coordinator clears the event before each
dispatch and sets it to cancel, so per task it is still set at most once.
Queued tasks have no slot yet and are simply dropped from the heap.
"""

from __future__ import annotations

import heapq
import multiprocessing
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from .agent import run_hammer
from .stm import RegionCancelled, check_proof_region

TaskKey = Tuple[Any, ...]


class DuplicateKey(Exception):
    pass


class PoolAlreadyStarted(Exception):
    pass


@dataclass(frozen=True)
class Task:
    """One unit of background work.

    priority: 0 regions in the perspective, 1 env transactions (unused
    while transactions run inline on the coordinator), 2 agent queries,
    3 regions outside the perspective. Ties break by document order,
    earlier span first.
    """

    key: TaskKey
    kind: str  # "region" | "query"
    priority: int
    order: int
    payload: tuple


@dataclass(frozen=True)
class Event:
    ts: float  # time.monotonic()
    kind: str
    data: dict


class EventLog:
    """Append-only trace of scheduling decisions.

    Tests assert priority respect ("dispatch" records the best priority
    still waiting) and cancel-to-redispatch latency against the
    timestamps, so entries are recorded at the moment the decision takes
    effect, never batched.
    """

    def __init__(self):
        self._events: List[Event] = []

    def add(self, event: str, **data) -> None:
        self._events.append(Event(time.monotonic(), event, data))

    def events(self, kind: Optional[str] = None) -> List[Event]:
        if kind is None:
            return list(self._events)
        return [e for e in self._events if e.kind == kind]


def _execute(kind: str, payload: tuple, cancel) -> Tuple[str, Any]:
    if kind == "region":
        facts, statement, body = payload
        try:
            return "done", check_proof_region(facts, statement, body, cancel)
        except RegionCancelled:
            return "cancelled", None
    if kind == "query":
        return run_hammer(payload, cancel)
    return "error", f"unknown task kind {kind!r}"


def _worker_main(slot: int, conn, results, cancel) -> None:
    """Long-lived worker loop: one task in, one result out, until the
    coordinator sends None. Any exception becomes an "error" result; a
    worker never dies between tasks."""
    while True:
        try:
            msg = conn.recv()
        except EOFError:
            break
        if msg is None:
            break
        kind, key, payload = msg
        try:
            status, data = _execute(kind, payload, cancel)
        except Exception as exc:
            status, data = "error", repr(exc)
        results.put((slot, key, status, data))
    conn.close()


class _Record:
    __slots__ = ("task", "state", "slot", "entry")

    def __init__(self, task: Task):
        self.task = task
        self.state = "queued"  # queued | running | cancelling
        self.slot: Optional[int] = None
        self.entry: Optional[list] = None  # live heap entry while queued


class Scheduler:
    """Fixed-size pool with a priority ready queue and lazy-deletion heap.

    All methods must be called from the single coordinator thread. Results
    are not consumed here: the owner reads self.results (a process-shared
    queue) and reports each completion back through note_result, which
    frees the slot and dispatches the next ready task.
    """

    def __init__(
        self,
        workers: int = 1,
        log: Optional[EventLog] = None,
        on_dispatch: Optional[Callable[[TaskKey, int], None]] = None,
    ):
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self._workers = workers
        self.log = log if log is not None else EventLog()
        self.on_dispatch = on_dispatch
        self._started = False
        self._seq = 0
        self._heap: List[list] = []
        self._records: Dict[TaskKey, _Record] = {}
        self._running: Dict[int, TaskKey] = {}
        self._free: List[int] = []
        self._procs: list = []
        self._conns: list = []
        self._events: list = []
        self.results: Any = None

    @property
    def workers(self) -> int:
        return self._workers

    def set_workers(self, n: int) -> None:
        if self._started:
            raise PoolAlreadyStarted("pool size is fixed once started")
        if n < 1:
            raise ValueError("workers must be at least 1")
        self._workers = n

    def start(self) -> None:
        if self._started:
            raise PoolAlreadyStarted("already started")
        self._started = True
        ctx = multiprocessing.get_context("fork")
        self.results = ctx.Queue()  # mp.Queue: readers need get(timeout=...)
        for slot in range(self._workers):
            parent_end, child_end = ctx.Pipe()
            cancel = ctx.Event()
            proc = ctx.Process(
                target=_worker_main,
                args=(slot, child_end, self.results, cancel),
                daemon=True,
            )
            proc.start()
            child_end.close()
            self._procs.append(proc)
            self._conns.append(parent_end)
            self._events.append(cancel)
            self._free.append(slot)
        self._free.reverse()  # so pop() hands out slot 0 first

    # -- queue ------------------------------------------------------------

    def submit(self, task: Task) -> None:
        if not self._started:
            raise RuntimeError("pool not started")
        if task.key in self._records:
            raise DuplicateKey(repr(task.key))
        rec = _Record(task)
        self._records[task.key] = rec
        self._push(rec, task.priority)
        self.log.add("submit", key=task.key, kind=task.kind, priority=task.priority)
        self._dispatch_free()

    def cancel(self, key: TaskKey) -> str:
        """Idempotent. Returns what the cancel did: "dropped" (was queued,
        no result will ever arrive), "signalled" (running; expect a
        cancelled result), or "absent"."""
        rec = self._records.get(key)
        if rec is None:
            return "absent"
        if rec.state == "queued":
            rec.entry[4] = False
            del self._records[key]
            self.log.add("cancel_queued", key=key)
            return "dropped"
        if rec.state == "running":
            rec.state = "cancelling"
            self._events[rec.slot].set()
            self.log.add("cancel_running", key=key, slot=rec.slot)
            return "signalled"
        return "signalled"  # already cancelling

    def reprioritize(self, key: TaskKey, priority: int) -> None:
        """Queued tasks only; running tasks are never demoted."""
        rec = self._records.get(key)
        if rec is None or rec.state != "queued" or rec.entry[0] == priority:
            return
        rec.entry[4] = False
        self._push(rec, priority)
        self.log.add("reprioritize", key=key, priority=priority)

    def note_result(self, slot: int, key: TaskKey) -> str:
        """Report a completion read off self.results. Frees the slot,
        forgets the task, dispatches the next ready one. Returns the
        record state at completion ("running" | "cancelling" | "unknown")
        so the caller can tell voluntary results from cancelled ones."""
        rec = self._records.pop(key, None)
        prior = rec.state if rec is not None else "unknown"
        if self._running.get(slot) == key:
            del self._running[slot]
            self._free.append(slot)
        self.log.add("result", slot=slot, key=key)
        self._dispatch_free()
        return prior

    # -- introspection ----------------------------------------------------

    def idle(self) -> bool:
        return not self._records

    def has(self, key: TaskKey) -> bool:
        return key in self._records

    def state(self, key: TaskKey) -> Optional[str]:
        rec = self._records.get(key)
        return rec.state if rec is not None else None

    # -- internals ---------------------------------------------------------

    def _push(self, rec: _Record, priority: int) -> None:
        self._seq += 1
        entry = [priority, rec.task.order, self._seq, rec.task.key, True]
        rec.entry = entry
        heapq.heappush(self._heap, entry)

    def _peek_priority(self) -> Optional[int]:
        while self._heap and not self._heap[0][4]:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def _dispatch_free(self) -> None:
        while self._free and self._peek_priority() is not None:
            priority, _order, _seq, key, _alive = heapq.heappop(self._heap)
            rec = self._records[key]
            slot = self._free.pop()
            rec.state = "running"
            rec.slot = slot
            rec.entry = None
            self._running[slot] = key
            self._events[slot].clear()
            self._conns[slot].send((rec.task.kind, key, rec.task.payload))
            self.log.add(
                "dispatch",
                slot=slot,
                key=key,
                priority=priority,
                best_waiting=self._peek_priority(),
            )
            if self.on_dispatch is not None:
                self.on_dispatch(key, slot)

    def shutdown(self) -> None:
        """Stop the pool. Sets every cancel event first so long searches
        come back quickly, then closes the workers and finally drops a
        None sentinel on the results queue for the owner's reader."""
        if not self._started:
            return
        for ev in self._events:
            ev.set()
        for conn in self._conns:
            try:
                conn.send(None)
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()
                proc.join(timeout=1)
        for conn in self._conns:
            conn.close()
        if self.results is not None:
            self.results.put(None)
