"""The coordinator: one thread that owns the document, the plan, and all
status bookkeeping.

Client messages and worker results funnel through a single inbox queue, so
every decision happens in one place and message emission order is a pure
function of arrival order. Environment transactions run inline here rather
than as pool tasks: a transaction is a dict extension plus a formula
expansion (microseconds), far cheaper than a round trip to a worker, and
running them inline means every region's fact map is ready the moment the
plan lands. Only proof regions and hammer queries go to the pool.

Emission contract, per installed version: one "assigned", then statuses in
document order (terminal immediately where the plan already knows the
answer, "pending" for spans waiting on a region task), "running" when a
task is dispatched, a terminal status when its result lands, and a single
{"type":"progress","state":"quiescent"} when nothing is left in flight.
Statuses for a span within one version only ever move forward.
"""

from __future__ import annotations

import queue
import sys
import threading
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

from .agent import hammer_payload
from .document import (
    DocumentVersion,
    IdAllocator,
    InsertAfter,
    Remove,
    Replace,
    UnknownSpan,
    apply_edits,
    diff_full_text,
)
from .scheduler import Scheduler, Task, TaskKey
from .stm import (
    EMPTY_ENV,
    EnvItem,
    ErrorItem,
    MemoStore,
    Plan,
    RegionPlan,
    SpanStatus,
    STATUS_PENDING,
    STATUS_RUNNING,
    exec_transaction,
    failed_status,
    plan,
    stale_region_keys,
)
from .syntax import Step

Emit = Callable[[dict], None]


class _Bad(Exception):
    """Internal: a client message failed semantic validation."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def _need(msg: dict, field: str, kind, what: str):
    value = msg.get(field)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise _Bad(f"bad {what}")
    return value


def _parse_wire_edits(raw) -> List[Any]:
    if not isinstance(raw, list):
        raise _Bad("bad edits")
    out: List[Any] = []
    for e in raw:
        if not isinstance(e, dict):
            raise _Bad("bad edit")
        op = e.get("op")
        if op == "insert_after":
            out.append(InsertAfter(_need(e, "anchor", int, "edit anchor"),
                                   _need(e, "text", str, "edit text")))
        elif op == "remove":
            out.append(Remove(_need(e, "id", int, "edit id")))
        elif op == "replace":
            out.append(Replace(_need(e, "id", int, "edit id"),
                               _need(e, "text", str, "edit text")))
        else:
            raise _Bad(f"bad edit op {op!r}")
    return out


class Engine:
    """Single-document checking engine over a worker pool.

    Thread-safe entry points (handle_client, wait_quiescent, snapshots,
    shutdown) may be called from anywhere; everything else belongs to the
    coordinator thread. The emit callback fires on the coordinator thread
    and must not call back into the engine synchronously.
    """

    def __init__(self, workers: int = 1, emit: Optional[Emit] = None):
        self._emit_cb = emit
        self._alloc = IdAllocator()
        self._doc = DocumentVersion(0, ())
        self._memo = MemoStore()
        self._plan: Optional[Plan] = None
        self._cond = threading.Condition()
        self._quiescent = True
        self._inbox: "queue.Queue[tuple]" = queue.Queue()
        self.scheduler = Scheduler(workers, on_dispatch=self._on_dispatch)
        self._needed: Dict[TaskKey, int] = {}  # region key -> region index
        self._region_ctx: Dict[int, tuple] = {}  # index -> (env before, outcome)
        self._span_region: Dict[int, Tuple[int, int]] = {}  # span -> (index, pos)
        self._positions: Dict[int, int] = {}  # span -> document position
        self._statuses: Dict[int, SpanStatus] = {}
        self._verdicts: Dict[int, str] = {}
        self._perspective: Set[int] = set()
        self._queries: Dict[int, TaskKey] = {}
        self._queries_by_key: Dict[TaskKey, int] = {}
        self._env_executed = 0
        self._regions_executed = 0
        self._started = False
        self._stopping = False
        self._coord: Optional[threading.Thread] = None
        self._reader: Optional[threading.Thread] = None

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "Engine":
        if self._started:
            return self
        self._started = True
        self.scheduler.start()
        self._reader = threading.Thread(
            target=self._read_results, daemon=True, name="results-reader"
        )
        self._coord = threading.Thread(
            target=self._run, daemon=True, name="coordinator"
        )
        self._reader.start()
        self._coord.start()
        return self

    def shutdown(self) -> None:
        if not self._started or self._stopping:
            return
        self._stopping = True
        self._inbox.put(("stop",))
        if self._coord is not None:
            self._coord.join(timeout=10)
        if self._reader is not None:
            self._reader.join(timeout=10)

    def __enter__(self) -> "Engine":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # -- thread-safe entry points --------------------------------------------

    def handle_client(self, msg: dict) -> None:
        self._inbox.put(("client", msg))

    def wait_quiescent(self, timeout: Optional[float] = None) -> bool:
        # Quiescent means: nothing queued for the coordinator, no region
        # task or query in flight. The inbox check closes the race where
        # a caller sends a message and immediately starts waiting.
        with self._cond:
            return self._cond.wait_for(
                lambda: self._quiescent and self._inbox.unfinished_tasks == 0,
                timeout,
            )

    def snapshot_statuses(self) -> Dict[int, SpanStatus]:
        with self._cond:
            return dict(self._statuses)

    def snapshot_verdicts(self) -> Dict[int, str]:
        with self._cond:
            return dict(self._verdicts)

    def document(self) -> DocumentVersion:
        with self._cond:
            return self._doc

    def counters(self) -> Tuple[int, int]:
        """(env transactions executed, region tasks completed) for the
        currently installed version; memo hits count in neither."""
        with self._cond:
            return (self._env_executed, self._regions_executed)

    def current_plan(self) -> Optional[Plan]:
        with self._cond:
            return self._plan

    # -- worker result pump ----------------------------------------------------

    def _read_results(self) -> None:
        while True:
            item = self.scheduler.results.get()
            if item is None:
                break
            self._inbox.put(("result", item))

    # -- coordinator loop -------------------------------------------------------

    def _run(self) -> None:
        while True:
            item = self._inbox.get()
            try:
                if item[0] == "stop":
                    self.scheduler.shutdown()
                    return
                with self._cond:
                    if item[0] == "client":
                        self._handle_client(item[1])
                    else:
                        self._handle_result(*item[1])
                    self._update_quiescence()
            finally:
                self._inbox.task_done()
                with self._cond:
                    self._cond.notify_all()

    def _handle_client(self, msg: dict) -> None:
        if not isinstance(msg, dict):
            return self._protocol_error("message must be a json object")
        mtype = msg.get("type")
        try:
            if mtype == "full_text":
                self._on_full_text(msg)
            elif mtype == "update":
                self._on_update(msg)
            elif mtype == "perspective":
                self._on_perspective(msg)
            elif mtype == "query":
                self._on_query(msg)
            elif mtype == "cancel_query":
                self._on_cancel_query(msg)
            elif mtype == "shutdown":
                pass  # transport-level; the transport closes after draining
            elif mtype == "_transport_error":
                # internal: lets a transport report a line it could not
                # even parse while keeping emission order with everything
                # else that flows through the inbox
                self._protocol_error(str(msg.get("reason", "invalid message")))
            else:
                self._protocol_error(f"unknown type {mtype!r}")
        except _Bad as e:
            self._protocol_error(e.reason)

    # -- client messages -----------------------------------------------------------

    def _on_full_text(self, msg: dict) -> None:
        v_new = _need(msg, "new_version", int, "version")
        text = _need(msg, "text", str, "text")
        if v_new <= self._doc.version:
            raise _Bad("bad version")
        edits = diff_full_text(self._doc, text)
        applied = apply_edits(self._doc, edits, self._alloc)
        self._install(DocumentVersion(v_new, applied.spans))

    def _on_update(self, msg: dict) -> None:
        old = _need(msg, "old_version", int, "version")
        v_new = _need(msg, "new_version", int, "version")
        if old != self._doc.version:
            raise _Bad("version mismatch")
        if v_new <= self._doc.version:
            raise _Bad("bad version")
        edits = _parse_wire_edits(msg.get("edits"))
        try:
            applied = apply_edits(self._doc, edits, self._alloc)
        except UnknownSpan as e:
            raise _Bad(f"unknown span {e.span_id}")
        self._install(DocumentVersion(v_new, applied.spans))

    def _on_perspective(self, msg: dict) -> None:
        version = _need(msg, "version", int, "version")
        spans = msg.get("spans")
        if not isinstance(spans, list) or not all(isinstance(s, int) for s in spans):
            raise _Bad("bad spans")
        if version != self._doc.version:
            return  # stale perspective: silently dropped
        self._perspective = set(spans)
        for key, idx in self._needed.items():
            region = self._plan.regions[idx]
            self.scheduler.reprioritize(key, self._region_priority(region))

    def _on_query(self, msg: dict) -> None:
        qid = _need(msg, "query_id", int, "query id")
        if qid <= 0:
            raise _Bad("bad query id")
        if msg.get("agent") != "hammer":
            raise _Bad("unknown agent")
        if qid in self._queries:
            raise _Bad("query id already in flight")
        span = _need(msg, "span", int, "span")
        params = msg.get("params") or {}
        if not isinstance(params, dict):
            raise _Bad("bad params")
        depth = params.get("depth", 8)
        if not isinstance(depth, int) or isinstance(depth, bool) or depth < 1:
            raise _Bad("bad depth")
        if self._doc.span(span) is None:
            raise _Bad(f"unknown span {span}")

        loc = self._span_region.get(span)
        if loc is None:
            return self._finish_query(qid, "failed")
        idx, pos = loc
        region = self._plan.regions[idx]
        before, outcome = self._region_ctx[idx]
        if outcome.fact is None:
            return self._finish_query(qid, "failed")
        prefix = region.body_commands[1:pos]
        if any(not isinstance(c, Step) for c in prefix):
            return self._finish_query(qid, "failed")
        payload = hammer_payload(
            before.lemma_statements(),
            outcome.fact.statement,
            [c.step for c in prefix],
            depth,
        )
        key = ("query", qid)
        self._queries[qid] = key
        self._queries_by_key[key] = qid
        self._quiescent = False  # queries count as in-flight work
        self.scheduler.submit(
            Task(key, "query", 2, self._positions.get(span, 0), payload)
        )

    def _on_cancel_query(self, msg: dict) -> None:
        qid = _need(msg, "query_id", int, "query id")
        key = self._queries.get(qid)
        if key is None:
            return  # finished or never existed: cancel is idempotent
        if self.scheduler.cancel(key) == "dropped":
            del self._queries[qid]
            del self._queries_by_key[key]
            self._finish_query(qid, "cancelled")
        # "signalled": the worker's cancelled result completes it

    def _finish_query(self, qid: int, status: str, suggestion: str = "") -> None:
        self._emit(
            {
                "type": "query_result",
                "query_id": qid,
                "status": status,
                "suggestion": suggestion,
            }
        )

    # -- plan installation ---------------------------------------------------------

    def _install(self, doc: DocumentVersion) -> None:
        old_plan = self._plan
        self._doc = doc
        p = plan(doc, self._memo)
        self._plan = p
        self._quiescent = False
        self._emit(
            {
                "type": "assigned",
                "version": doc.version,
                "spans": [{"id": s.span_id, "text": s.text.raw} for s in doc.spans],
            }
        )
        if old_plan is not None:
            for key in sorted(stale_region_keys(old_plan, p)):
                self.scheduler.cancel(key)

        self._needed.clear()
        self._region_ctx.clear()
        self._span_region.clear()
        self._statuses = {}
        self._verdicts = {}
        self._env_executed = 0
        self._regions_executed = 0
        self._positions = {s.span_id: i for i, s in enumerate(doc.spans)}

        env = EMPTY_ENV
        for item in p.items:
            if isinstance(item, EnvItem):
                before = env
                if item.reused:
                    outcome = self._memo.env[item.key]
                else:
                    outcome = exec_transaction(env, item.command)
                    self._memo.env[item.key] = outcome
                    self._env_executed += 1
                env = outcome.env
                self._set_status(item.span_id, outcome.status)
                if item.region_index is not None:
                    self._region_ctx[item.region_index] = (before, outcome)
                    # header hammers search the whole statement (empty prefix)
                    self._span_region[item.span_id] = (item.region_index, 0)
            elif isinstance(item, ErrorItem):
                self._set_status(
                    item.span_id, failed_status(item.message, item.offset)
                )
            else:  # BodyItem
                self._span_region[item.span_id] = (item.region_index, item.position)

        for region in p.regions:
            before, outcome = self._region_ctx[region.index]
            if outcome.fact is None:
                for sid in region.body_span_ids:
                    self._set_status(sid, failed_status("lemma header failed"))
                self._verdicts[region.header_span_id] = "failed"
                continue
            if region.reused:
                self._apply_region_result(region, self._memo.region[region.key])
                continue
            outcome.fact.cell.value = "pending"
            for sid in region.body_span_ids:
                self._set_status(sid, STATUS_PENDING)
            self._needed[region.key] = region.index
            state = self.scheduler.state(region.key)
            if state is None:
                self._submit_region(region, before, outcome)
            elif state == "running":
                for sid in region.body_span_ids:
                    self._set_status(sid, STATUS_RUNNING)
            elif state == "queued":
                self.scheduler.reprioritize(
                    region.key, self._region_priority(region)
                )
            # "cancelling": its cancelled result triggers a resubmission

    def _region_priority(self, region: RegionPlan) -> int:
        spans = set(region.body_span_ids)
        spans.add(region.header_span_id)
        return 0 if spans & self._perspective else 3

    def _submit_region(self, region: RegionPlan, before, outcome) -> None:
        payload = (
            dict(before.lemma_statements()),
            outcome.fact.statement,
            region.body_commands,
        )
        self.scheduler.submit(
            Task(
                region.key,
                "region",
                self._region_priority(region),
                self._positions.get(region.header_span_id, 0),
                payload,
            )
        )

    # -- results ---------------------------------------------------------------------

    def _on_dispatch(self, key: TaskKey, slot: int) -> None:
        idx = self._needed.get(key)
        if idx is None:
            return  # query dispatch: no status traffic
        region = self._plan.regions[idx]
        for sid in region.body_span_ids:
            self._set_status(sid, STATUS_RUNNING)

    def _handle_result(self, slot: int, key: TaskKey, status: str, data) -> None:
        self.scheduler.note_result(slot, key)

        qid = self._queries_by_key.get(key)
        if qid is not None:
            del self._queries_by_key[key]
            del self._queries[qid]
            if status == "done":
                verdict, suggestion = data
                self._finish_query(qid, verdict, suggestion)
            elif status == "cancelled":
                self._finish_query(qid, "cancelled")
            else:
                self._finish_query(qid, "failed")
            return

        idx = self._needed.get(key)
        if idx is None:
            # Superseded region: the work is content-addressed, so keep it.
            if status == "done":
                self._memo.region[key] = data
            return
        region = self._plan.regions[idx]
        before, outcome = self._region_ctx[idx]
        if status == "done":
            self._memo.region[key] = data
            self._regions_executed += 1
            del self._needed[key]
            self._apply_region_result(region, data)
        elif status == "cancelled":
            # A replan re-created demand for this key before the worker
            # observed the stale cancellation. Run it again.
            self._submit_region(region, before, outcome)
        else:  # "error" (a worker-side crash; never part of normal flow)
            del self._needed[key]
            outcome.fact.cell.value = "failed"
            self._verdicts[region.header_span_id] = "failed"
            for sid in region.body_span_ids:
                self._set_status(sid, failed_status(f"internal error: {data}"))

    def _apply_region_result(self, region: RegionPlan, result) -> None:
        _, outcome = self._region_ctx[region.index]
        for sid, st in zip(region.body_span_ids, result.statuses):
            self._set_status(sid, st)
        outcome.fact.cell.value = result.verdict
        self._verdicts[region.header_span_id] = result.verdict

    # -- emission ----------------------------------------------------------------------

    def _set_status(self, span_id: int, status: SpanStatus) -> None:
        if self._statuses.get(span_id) == status:
            return
        self._statuses[span_id] = status
        self._emit(
            {
                "type": "status",
                "version": self._doc.version,
                "span": span_id,
                "state": status.state,
                "messages": [
                    {"severity": m.severity, "text": m.text, "offset": m.offset}
                    for m in status.messages
                ],
            }
        )

    def _protocol_error(self, reason: str) -> None:
        self._emit({"type": "protocol_error", "reason": reason})

    def _update_quiescence(self) -> None:
        if self._needed or self._queries or self._quiescent:
            return
        self._quiescent = True
        if self._plan is not None:
            self._emit(
                {
                    "type": "progress",
                    "version": self._doc.version,
                    "state": "quiescent",
                }
            )

    def _emit(self, message: dict) -> None:
        if self._emit_cb is None:
            return
        try:
            self._emit_cb(message)
        except Exception as exc:
            print(f"emit callback failed: {exc!r}", file=sys.stderr)
