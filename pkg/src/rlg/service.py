"""HTTP/JSON API over knowledge bases and interruptible query sessions.

Endpoints live under /api/v1:

  POST /kbs                          compile a program, get a kb id
  GET  /kbs, /kbs/{id}               list / inspect
  POST /kbs/{id}/queries             start an evaluation (async)
  GET  /queries, /queries/{qid}      list / poll state
  POST /queries/{qid}/control        pause | resume | abort | set_logging
  GET  /queries/{qid}/answers        final answers (completed only)
  GET  /queries/{qid}/tables         table dump  ?pattern=...&summary=true
  GET  /queries/{qid}/log/overview   run census
  GET  /queries/{qid}/log/sccs       call-graph components
  GET  /queries/{qid}/log/sccs/{n}   one component  ?abstraction=mode|pred
  GET  /queries/{qid}/log/terminyzer non-termination analysis
  GET  /queries/{qid}/justify        justification root  ?literal=...
  GET  /queries/{qid}/justify/node/{id}/children
  GET  /health

Every query-scoped response carries the qid and current state.  Sessions
and logs persist under a data directory (SILK_DATA_DIR or --data-dir);
after a restart sessions come back read-only, serving their persisted
answers and tables, with log analyses recomputed from the log file.

A query started with intervalMs auto-pauses on the timer and then waits
for a client control action, so a browser or script can inspect tables
mid-run and decide whether to continue or abort.
"""

import json
import os
import threading
import time
import uuid
from typing import Dict, List, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import analysis, forestlog
from .engine import (
    AnswerView, EvalOptions, EvaluationHandle, NoSuchTable,
    SnapshotWhileRunning, TableView, evaluate_async, table_snapshot,
)
from .justify import Justification, UnknownNode
from .reader import ParseFailure
from .terms import App, Atom, Num, Str, Term, Var, canonical_text, parse_term
from .transform import CompiledKB, TransformError, compile_goal, compile_kb

API = "/api/v1"

THEORY_CHOICES = ("simple", "default", "none")


# ---------------------------------------------------------------------------
# term wire encoding

def term_to_json(t: Term):
    """JsonTerm encoding: {"v": name} | {"s": scalar} | {"app": [fn, ...]}.

    Atoms ride as bare strings, numbers as JSON numbers, and strings as
    their JSON-quoted spelling so the three stay distinguishable.
    """
    if isinstance(t, Var):
        return {"v": t.name}
    if isinstance(t, Atom):
        return {"s": t.name}
    if isinstance(t, Num):
        return {"s": t.value}
    if isinstance(t, Str):
        return {"s": json.dumps(t.value)}
    return {"app": [term_to_json(t.fn)] + [term_to_json(a) for a in t.args]}


def term_from_json(j) -> Term:
    if not isinstance(j, dict):
        raise ValueError(f"not a JsonTerm: {j!r}")
    if "v" in j:
        return Var(j["v"])
    if "s" in j:
        v = j["s"]
        if isinstance(v, bool):
            raise ValueError("booleans are not terms")
        if isinstance(v, (int, float)):
            return Num(v)
        if v.startswith('"'):
            return Str(json.loads(v))
        return Atom(v)
    if "app" in j:
        parts = [term_from_json(x) for x in j["app"]]
        if not parts:
            raise ValueError("empty application")
        return App(parts[0], tuple(parts[1:]))
    raise ValueError(f"not a JsonTerm: {j!r}")


# ---------------------------------------------------------------------------
# request bodies

class CreateKB(BaseModel):
    source: str = ""
    theory: str = "default"


class StartQuery(BaseModel):
    goal: str
    intervalMs: Optional[float] = None
    log: bool = True
    maxOps: Optional[int] = None
    theory: Optional[str] = None


class Control(BaseModel):
    action: str
    value: Optional[bool] = None


# ---------------------------------------------------------------------------
# records

class KBRecord:
    def __init__(self, kb_id: str, source: str, theory: str, kb: CompiledKB,
                 created_at: float):
        self.kb_id = kb_id
        self.source = source
        self.theory = theory          # requested: simple | default | none
        self.kb = kb
        self.created_at = created_at
        self.variants: Dict[str, CompiledKB] = {theory: kb}

    def compiled(self, theory: Optional[str]) -> CompiledKB:
        want = theory or self.theory
        got = self.variants.get(want)
        if got is None:
            got = compile_kb(self.source, theory=want)
            self.variants[want] = got
        return got

    @property
    def rule_count(self) -> int:
        return sum(1 for r in self.kb.rules if r.origin == "user")

    def info(self) -> dict:
        return {"kbId": self.kb_id, "ruleCount": self.rule_count,
                "theory": self.kb.theory}


class QuerySession:
    def __init__(self, qid: str, kb_id: str, goal: str, theory: str,
                 created_at: float):
        self.qid = qid
        self.kb_id = kb_id
        self.goal = goal
        self.theory = theory
        self.created_at = created_at
        self.updated_at = created_at
        self.interval_ms: Optional[float] = None
        self.max_ops: Optional[int] = None
        self.log_enabled = False
        self.log_path: Optional[str] = None
        self.handle: Optional[EvaluationHandle] = None
        self.kb: Optional[CompiledKB] = None
        self.restored = False
        self.restored_state: Optional[str] = None
        self.restored_error: Optional[str] = None
        self.snapshot: Optional[dict] = None
        self.justification: Optional[Justification] = None
        self.justify_roots: Dict[str, str] = {}
        self.lock = threading.Lock()
        self.persisted_terminal = False

    @property
    def state(self) -> str:
        if self.handle is not None:
            return self.handle.state
        return self.restored_state or "aborted"

    @property
    def error(self) -> Optional[str]:
        if self.handle is not None:
            return self.handle.error
        return self.restored_error

    def meta(self) -> dict:
        out = {"qid": self.qid, "kbId": self.kb_id, "goal": self.goal,
               "theory": self.theory, "state": self.state}
        if self.handle is not None:
            out["opCount"] = self.handle.op_counter
            out["elapsedS"] = round(self.handle.elapsed_s, 6)
            out["logging"] = self.handle.logging
        if self.error:
            out["error"] = self.error
        return out


def _hold_until_client_action(handle: EvaluationHandle):
    """Interval-timer handler: keep the run paused until resume or abort."""
    with handle._lock:
        while not handle._resume_req:
            handle._lock.wait(0.1)
        handle._resume_req = False


# ---------------------------------------------------------------------------
# persistence

def _snapshot_views(views: List[TableView]) -> list:
    rows = []
    for v in views:
        rows.append({
            "subgoal": canonical_text(v.subgoal),
            "status": v.status,
            "call_count": v.call_count,
            "callers": [[canonical_text(c) if c is not None else None, rid]
                        for (c, rid) in v.callers],
            "answers": [{
                "literal": canonical_text(a.literal),
                "tv": a.tv,
                "delays": [canonical_text(d) for d in a.delays],
            } for a in v.answers],
        })
    return rows


def _restore_views(rows: list) -> List[TableView]:
    views = []
    for r in rows:
        answers = tuple(
            AnswerView(literal=parse_term(a["literal"]), tv=a["tv"],
                       bindings={},
                       delays=tuple(parse_term(d) for d in a["delays"]))
            for a in r["answers"])
        callers = tuple(
            (parse_term(c) if c is not None else None, rid)
            for (c, rid) in r["callers"])
        views.append(TableView(
            subgoal=parse_term(r["subgoal"]), status=r["status"],
            scc_id=None, call_count=r["call_count"], callers=callers,
            answers=answers))
    return views


def _answers_json(handle: EvaluationHandle) -> list:
    out = []
    for a in handle.answers():
        out.append({
            "term": term_to_json(a.literal),
            "text": canonical_text(a.literal),
            "tv": a.tv,
            "bindings": {k: term_to_json(v)
                         for k, v in sorted(a.bindings.items())},
            "delays": [canonical_text(d) for d in a.delays],
        })
    return out


# ---------------------------------------------------------------------------
# application state

class ServiceState:
    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.kbs: Dict[str, KBRecord] = {}
        self.sessions: Dict[str, QuerySession] = {}
        self.lock = threading.Lock()
        for sub in ("kbs", "sessions", "logs"):
            os.makedirs(os.path.join(data_dir, sub), exist_ok=True)
        self._load()

    # -- paths ------------------------------------------------------------

    def _kb_path(self, kb_id: str) -> str:
        return os.path.join(self.data_dir, "kbs", f"{kb_id}.json")

    def _meta_path(self, qid: str) -> str:
        return os.path.join(self.data_dir, "sessions", f"{qid}.json")

    def _snap_path(self, qid: str) -> str:
        return os.path.join(self.data_dir, "sessions", f"{qid}.snapshot.json")

    def _log_path(self, qid: str) -> str:
        return os.path.join(self.data_dir, "logs", f"{qid}.fl")

    # -- loading ------------------------------------------------------------

    def _load(self):
        kb_dir = os.path.join(self.data_dir, "kbs")
        for name in sorted(os.listdir(kb_dir)):
            if not name.endswith(".json"):
                continue
            try:
                with open(os.path.join(kb_dir, name), encoding="utf-8") as fh:
                    data = json.load(fh)
                kb = compile_kb(data["source"], theory=data["theory"])
                rec = KBRecord(data["kbId"], data["source"], data["theory"],
                               kb, data["createdAt"])
                self.kbs[rec.kb_id] = rec
            except (OSError, ValueError, KeyError, ParseFailure,
                    TransformError):
                continue
        sess_dir = os.path.join(self.data_dir, "sessions")
        for name in sorted(os.listdir(sess_dir)):
            if not name.endswith(".json") or name.endswith(".snapshot.json"):
                continue
            try:
                with open(os.path.join(sess_dir, name),
                          encoding="utf-8") as fh:
                    data = json.load(fh)
                s = QuerySession(data["qid"], data["kbId"], data["goal"],
                                 data.get("theory", "default"),
                                 data.get("createdAt", 0.0))
                s.restored = True
                s.interval_ms = data.get("intervalMs")
                s.max_ops = data.get("maxOps")
                s.log_enabled = data.get("log", False)
                s.log_path = data.get("logPath")
                state = data.get("state", "aborted")
                if state in ("running", "paused"):
                    s.restored_state = "aborted"
                    s.restored_error = "service restarted during evaluation"
                else:
                    s.restored_state = state
                    s.restored_error = data.get("error")
                snap = self._snap_path(s.qid)
                if os.path.exists(snap):
                    with open(snap, encoding="utf-8") as fh:
                        s.snapshot = json.load(fh)
                rec = self.kbs.get(s.kb_id)
                if rec is not None:
                    try:
                        s.kb = rec.compiled(s.theory)
                    except (ParseFailure, TransformError):
                        s.kb = None
                self.sessions[s.qid] = s
            except (OSError, ValueError, KeyError):
                continue

    # -- persisting ---------------------------------------------------------

    def persist_kb(self, rec: KBRecord):
        data = {"kbId": rec.kb_id, "source": rec.source,
                "theory": rec.theory, "createdAt": rec.created_at}
        with open(self._kb_path(rec.kb_id), "w", encoding="utf-8") as fh:
            json.dump(data, fh)

    def persist_session(self, s: QuerySession):
        data = {"qid": s.qid, "kbId": s.kb_id, "goal": s.goal,
                "theory": s.theory, "createdAt": s.created_at,
                "intervalMs": s.interval_ms, "maxOps": s.max_ops,
                "log": s.log_enabled, "logPath": s.log_path,
                "state": s.state}
        if s.error:
            data["error"] = s.error
        with open(self._meta_path(s.qid), "w", encoding="utf-8") as fh:
            json.dump(data, fh)

    def persist_terminal(self, s: QuerySession):
        with s.lock:
            if s.persisted_terminal or s.handle is None:
                return
            if s.handle.state in ("running", "paused"):
                return
            s.persisted_terminal = True
            snap = {"tables": _snapshot_views(table_snapshot(s.handle))}
            if s.handle.state == "completed":
                snap["answers"] = _answers_json(s.handle)
            with open(self._snap_path(s.qid), "w", encoding="utf-8") as fh:
                json.dump(snap, fh)
            self.persist_session(s)

    # -- lookups ------------------------------------------------------------

    def kb(self, kb_id: str) -> Optional[KBRecord]:
        return self.kbs.get(kb_id)

    def session(self, qid: str) -> Optional[QuerySession]:
        return self.sessions.get(qid)


# ---------------------------------------------------------------------------
# shared response helpers

def _err(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": message, **extra})


def _parse_diags(exc: ParseFailure) -> list:
    return [{"file": e.file, "line": e.line, "col": e.col,
             "message": e.message, "expected": e.expected}
            for e in exc.errors]


def _log_of(s: QuerySession) -> forestlog.Log:
    if s.handle is not None:
        return forestlog.log_from_events(s.handle.events)
    if s.log_path and os.path.exists(s.log_path):
        return forestlog.load_log(s.log_path)
    return forestlog.log_from_events([])


def _fetchable(s: QuerySession) -> Optional[JSONResponse]:
    """Table and log resources need a paused or terminal evaluation."""
    if s.state == "running":
        return _err(409, "evaluation is running; pause it first",
                    qid=s.qid, state=s.state)
    return None


# ---------------------------------------------------------------------------
# app factory

def create_app(data_dir: Optional[str] = None,
               ui_dir: Optional[str] = None) -> FastAPI:
    data_dir = data_dir or os.environ.get("SILK_DATA_DIR") \
        or os.path.join(os.getcwd(), "rlg-data")
    state = ServiceState(data_dir)
    app = FastAPI(title="rlg", docs_url=None, redoc_url=None)
    app.state.service = state

    # -- health ----------------------------------------------------------

    @app.get(API + "/health")
    def health():
        return {"status": "ok"}

    # -- knowledge bases ---------------------------------------------------

    @app.post(API + "/kbs", status_code=201)
    def create_kb_ep(body: CreateKB):
        if body.theory not in THEORY_CHOICES:
            return JSONResponse(status_code=422, content={
                "diagnostics": [{"message":
                                 f"unknown theory {body.theory!r}"}]})
        try:
            kb = compile_kb(body.source, theory=body.theory)
        except ParseFailure as exc:
            return JSONResponse(status_code=422,
                                content={"diagnostics": _parse_diags(exc)})
        except TransformError as exc:
            return JSONResponse(status_code=422, content={
                "diagnostics": [{"message": str(exc),
                                 "rule_id": exc.rule_id}]})
        rec = KBRecord(f"kb-{uuid.uuid4().hex[:12]}", body.source,
                       body.theory, kb, time.time())
        with state.lock:
            state.kbs[rec.kb_id] = rec
            state.persist_kb(rec)
        return rec.info()

    @app.get(API + "/kbs")
    def list_kbs():
        with state.lock:
            return {"kbs": [state.kbs[k].info()
                            for k in sorted(state.kbs)]}

    @app.get(API + "/kbs/{kb_id}")
    def get_kb(kb_id: str):
        rec = state.kb(kb_id)
        if rec is None:
            return _err(404, "unknown kb")
        return {**rec.info(), "source": rec.source}

    # -- query lifecycle ---------------------------------------------------

    @app.post(API + "/kbs/{kb_id}/queries", status_code=201)
    def start_query(kb_id: str, body: StartQuery):
        rec = state.kb(kb_id)
        if rec is None:
            return _err(404, "unknown kb")
        if body.theory is not None and body.theory not in THEORY_CHOICES:
            return _err(400, f"unknown theory {body.theory!r}")
        try:
            kb = rec.compiled(body.theory)
        except (ParseFailure, TransformError) as exc:
            return _err(400, f"theory override failed: {exc}")
        try:
            plan = compile_goal(kb, body.goal)
        except ParseFailure as exc:
            return JSONResponse(status_code=400, content={
                "error": "goal parse failure",
                "diagnostics": _parse_diags(exc)})
        except TransformError as exc:
            return _err(400, str(exc))
        qid = f"q-{uuid.uuid4().hex[:12]}"
        s = QuerySession(qid, kb_id, body.goal,
                         body.theory or rec.theory, time.time())
        s.interval_ms = body.intervalMs
        s.max_ops = body.maxOps
        s.log_enabled = body.log
        s.log_path = state._log_path(qid) if body.log else None
        s.kb = kb
        opts = EvalOptions(
            logging=body.log, log_path=s.log_path,
            interval_ms=body.intervalMs,
            on_interrupt=(_hold_until_client_action
                          if body.intervalMs is not None else None))
        if body.maxOps is not None:
            opts.max_ops = body.maxOps
        s.handle = evaluate_async(kb, plan, opts)
        with state.lock:
            state.sessions[qid] = s
        state.persist_session(s)

        def finalize():
            s.handle.join()
            state.persist_terminal(s)

        threading.Thread(target=finalize, daemon=True,
                         name=f"rlg-finalize-{qid}").start()
        return {"qid": qid, "state": s.state}

    @app.get(API + "/queries")
    def list_queries():
        with state.lock:
            return {"queries": [state.sessions[q].meta()
                                for q in sorted(state.sessions)]}

    @app.get(API + "/queries/{qid}")
    def query_status(qid: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        return s.meta()

    @app.post(API + "/queries/{qid}/control")
    def control_query(qid: str, body: Control):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        if s.handle is None:
            return _err(409, "restored session is read-only",
                        qid=qid, state=s.state)
        h = s.handle
        st = h.state
        action = body.action
        if action == "pause":
            if st != "running":
                return _err(409, f"cannot pause a {st} query",
                            qid=qid, state=st)
            h.request_pause()
            h.wait_paused(5.0)
        elif action == "resume":
            if st != "paused":
                return _err(409, f"cannot resume a {st} query",
                            qid=qid, state=st)
            h.resume()
            deadline = time.monotonic() + 1.0
            while h.state == "paused" and time.monotonic() < deadline:
                time.sleep(0.002)
        elif action == "abort":
            if st not in ("running", "paused"):
                return _err(409, f"cannot abort a {st} query",
                            qid=qid, state=st)
            h.request_abort()
            h.join(10.0)
        elif action == "set_logging":
            if st not in ("running", "paused"):
                return _err(409, f"cannot toggle logging on a {st} query",
                            qid=qid, state=st)
            h.set_logging(bool(body.value))
        else:
            return _err(400, f"unknown action {action!r}")
        s.updated_at = time.time()
        return {"qid": qid, "state": s.state}

    # -- fetch: answers ----------------------------------------------------

    @app.get(API + "/queries/{qid}/answers")
    def get_answers(qid: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        if s.handle is None:
            if s.snapshot is not None and "answers" in s.snapshot:
                return {"qid": qid, "state": s.state,
                        "answers": s.snapshot["answers"]}
            return _err(409, "answers require a completed evaluation",
                        qid=qid, state=s.state)
        if s.handle.state != "completed":
            return _err(409, "answers require a completed evaluation",
                        qid=qid, state=s.state)
        return {"qid": qid, "state": s.state,
                "answers": _answers_json(s.handle)}

    # -- fetch: tables -----------------------------------------------------

    @app.get(API + "/queries/{qid}/tables")
    def get_tables(qid: str, pattern: Optional[str] = None,
                   summary: bool = False):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        not_ready = _fetchable(s)
        if not_ready is not None:
            return not_ready
        pat = None
        if pattern is not None:
            try:
                pat = parse_term(pattern)
            except (ParseFailure, ValueError) as exc:
                return _err(400, f"bad pattern: {exc}")
        if s.handle is not None:
            try:
                views = table_snapshot(s.handle)
            except SnapshotWhileRunning:
                return _err(409, "evaluation is running; pause it first",
                            qid=qid, state=s.state)
        elif s.snapshot is not None:
            views = _restore_views(s.snapshot.get("tables", []))
        else:
            return _err(409, "no table snapshot for this session",
                        qid=qid, state=s.state)
        rows = analysis.table_dump(views, pat, summary=summary)
        return {"qid": qid, "state": s.state, "summary": summary,
                "tables": [r.as_json() for r in rows]}

    # -- fetch: log analyses -------------------------------------------------

    @app.get(API + "/queries/{qid}/log/overview")
    def get_overview(qid: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        not_ready = _fetchable(s)
        if not_ready is not None:
            return not_ready
        log = _log_of(s)
        diags = [str(d) for d in log.diagnostics]
        diags.extend(forestlog.coverage_gaps(log))
        if s.handle is not None and log.events and \
                s.handle.op_counter > log.events[-1].ctr:
            diags.append(f"ops {log.events[-1].ctr + 1}.."
                         f"{s.handle.op_counter} not logged")
        return {"qid": qid, "state": s.state,
                "overview": analysis.overview(log).as_json(),
                "diagnostics": diags}

    @app.get(API + "/queries/{qid}/log/sccs")
    def get_sccs(qid: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        not_ready = _fetchable(s)
        if not_ready is not None:
            return not_ready
        comps = analysis.sccs(_log_of(s))
        return {"qid": qid, "state": s.state,
                "sccs": [c.as_json() for c in comps]}

    @app.get(API + "/queries/{qid}/log/sccs/{scc_id}")
    def get_scc(qid: str, scc_id: int, abstraction: Optional[str] = None):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        not_ready = _fetchable(s)
        if not_ready is not None:
            return not_ready
        mode = None
        if abstraction is not None:
            mode = {"mode": "mode_abstraction",
                    "pred": "predicate_abstraction"}.get(abstraction)
            if mode is None:
                return _err(400, f"unknown abstraction {abstraction!r}")
        comps = analysis.sccs(_log_of(s), abstraction=mode)
        for c in comps:
            if c.id == scc_id:
                return {"qid": qid, "state": s.state, "scc": c.as_json()}
        return _err(404, f"no scc {scc_id}")

    @app.get(API + "/queries/{qid}/log/terminyzer")
    def get_terminyzer(qid: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        not_ready = _fetchable(s)
        if not_ready is not None:
            return not_ready
        report = analysis.analyze_termination(_log_of(s), kb=s.kb)
        return {"qid": qid, "state": s.state, "report": report.as_json()}

    # -- fetch: justification -----------------------------------------------

    @app.get(API + "/queries/{qid}/justify")
    def get_justify(qid: str, literal: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        if s.handle is None:
            return _err(409, "justification requires a live completed "
                        "evaluation", qid=qid, state=s.state)
        if s.handle.state != "completed":
            return _err(409, "justification requires a completed evaluation",
                        qid=qid, state=s.state)
        with s.lock:
            if s.justification is None:
                s.justification = Justification(s.handle)
            root_id = s.justify_roots.get(literal)
            try:
                if root_id is None:
                    root = s.justification.root(literal)
                    s.justify_roots[literal] = root.id
                else:
                    root = s.justification.node(root_id)
            except NoSuchTable:
                return _err(404, "literal was never evaluated",
                            qid=qid, state=s.state)
            except (ParseFailure, ValueError) as exc:
                return _err(400, f"bad literal: {exc}")
        return {"qid": qid, "state": s.state, "root": root.as_json()}

    @app.get(API + "/queries/{qid}/justify/node/{node_id}/children")
    def expand_node(qid: str, node_id: str):
        s = state.session(qid)
        if s is None:
            return _err(404, "unknown query")
        if s.justification is None:
            return _err(404, "unknown node")
        with s.lock:
            try:
                kids = s.justification.expand(node_id)
            except UnknownNode:
                return _err(404, "unknown node")
        return {"qid": qid, "state": s.state,
                "nodes": [k.as_json() for k in kids]}

    # -- static UI ----------------------------------------------------------

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def main(port: Optional[int] = None, data_dir: Optional[str] = None,
         ui_dir: Optional[str] = None, host: str = "127.0.0.1"):
    """Run the service with uvicorn; honors SILK_PORT and SILK_DATA_DIR."""
    import uvicorn
    if port is None:
        port = int(os.environ.get("SILK_PORT", "8040"))
    app = create_app(data_dir, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
