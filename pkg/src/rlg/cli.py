"""Command line workbench: run queries, analyze forest logs, serve the API.

Subcommands:

  rlg run FILE... -q GOAL    evaluate a goal against program files
  rlg analyze LOG            report on a previously written forest log
  rlg serve                  host the HTTP API and the static console

Exit codes: 0 success, 1 parse or compile errors (for analyze: a log
malformed beyond tolerance), 2 runtime errors, 3 operation budget
exhausted.

run prints answers with TRUE before UNDEFINED.  With --interval MS the
evaluation pauses on a timer at an interactive prompt offering: table
dump, toggle logging, Terminyzer, SCC overview, continue, abort.  With
--json every report uses the same payload shapes the HTTP service
serves, so scripts can consume either side unchanged.  Non-timing output
of run is byte-identical across repeated invocations.
"""

import json
import os
import socket
import sys
from typing import List, Optional, Tuple

import click

from . import analysis, forestlog
from .engine import (
    EngineError, EvalOptions, EvaluationHandle, NoSuchTable, evaluate,
    table_snapshot,
)
from .justify import Justification
from .reader import ParseFailure
from .terms import canonical_text, parse_term, vars_of
from .transform import CompiledKB, TransformError, compile_goal, compile_kb

THEORIES = ("simple", "default", "none")


# ---------------------------------------------------------------------------
# shared text rendering

def _echo_overview(stats, diags: List[str]):
    hist = " ".join(f"{k}:{v}"
                    for k, v in sorted(stats.scc_size_histogram.items()))
    neg = " ".join(f"{k}={v}"
                   for k, v in sorted(stats.negation_op_counts.items()))
    ab = " ".join(f"{k}={v}"
                  for k, v in sorted(stats.abstraction_counts.items()))
    click.echo(f"total calls:        {stats.total_calls}")
    click.echo(f"distinct subgoals:  {stats.distinct_subgoals}")
    click.echo(f"total answers:      {stats.total_answers}")
    click.echo(f"undefined answers:  {stats.undefined_answer_count}")
    click.echo(f"components:         {stats.scc_count}")
    click.echo(f"component sizes:    {hist or '-'}")
    click.echo(f"negation ops:       {neg or '-'}")
    click.echo(f"abstractions:       {ab or '-'}")
    if diags:
        click.echo("diagnostics:")
        for d in diags:
            click.echo(f"  {d}")


def _echo_sccs(comps):
    nontrivial = sum(1 for c in comps if not c.trivial)
    click.echo(f"{len(comps)} components ({nontrivial} nontrivial)")
    for c in comps:
        mark = " [trivial]" if c.trivial else ""
        members = sorted(canonical_text(m) for m in c.members)
        click.echo(f"scc {c.id}{mark}: {len(members)} member(s)")
        for m in members:
            click.echo(f"  {m}")


def _echo_scc_brief(comps):
    nontrivial = [c for c in comps if not c.trivial]
    click.echo(f"sccs: {len(comps)} ({len(nontrivial)} nontrivial)")
    for c in nontrivial:
        members = sorted(canonical_text(m) for m in c.members)
        shown = ", ".join(members[:3])
        more = f", +{len(members) - 3} more" if len(members) > 3 else ""
        click.echo(f"  scc {c.id}: {len(members)} members: {shown}{more}")


def _echo_terminyzer(rep):
    if not (rep.call_sequence_findings or rep.answer_flow_findings
            or rep.suggestions):
        click.echo("no termination findings.")
        return
    for f in rep.call_sequence_findings:
        chain = " -> ".join(canonical_text(t) for t in f.witness_chain[:4])
        if len(f.witness_chain) > 4:
            chain += " -> ..."
        click.echo(f"call cycle {'>'.join(f.rule_cycle)} ({f.growth}): "
                   f"{chain}")
    for f in rep.answer_flow_findings:
        fed = ", ".join(f.feeding_rules) or "-"
        click.echo(f"answer flow {canonical_text(f.subgoal)}: "
                   f"{len(f.answer_event_ctrs)} answers, "
                   f"rate {f.growth_rate:.1f}, fed by {fed}")
    for s in rep.suggestions:
        click.echo(s.message)
        click.echo(f"  rewrite: {s.rewritten_rule}")


def _echo_tables(rows, summary: bool):
    if not rows:
        click.echo("(no tables)")
        return
    if summary:
        for r in rows:
            click.echo(f"{r.predicate}  tables={r.table_count} "
                       f"answers={r.answer_count} calls={r.call_count}")
        return
    for r in rows:
        rules = sorted({rid for rid, _ in r.calling_rules if rid})
        tail = f"  rules={','.join(rules)}" if rules else ""
        click.echo(f"{canonical_text(r.subgoal)}  {r.status}  "
                   f"answers={r.answer_count} true={r.true_count} "
                   f"undef={r.undefined_count} calls={r.call_count}{tail}")


# ---------------------------------------------------------------------------
# justification rendering

_A_MARK = {"undefeated_bang": "!", "defeated_downarrow": "↓"}


def _node_line(n) -> str:
    if n.kind in ("G", "F"):
        head = f"{n.kind}/{n.tv_color}"
    elif n.kind == "A":
        head = "A" + _A_MARK.get(n.arg_status, "")
    else:
        head = "P"
    suffix = " [con]" if n.side == "con_bar" else ""
    return f"{head} {n.text}{suffix}"


def _walk_justification(sess, root) -> List[Tuple[object, int]]:
    """Fully expand the tree; (node, depth) pairs in display order."""
    out: List[Tuple[object, int]] = []
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        out.append((node, depth))
        kids = sess.expand(node.id)
        stack.extend((k, depth + 1) for k in reversed(kids))
    return out


# ---------------------------------------------------------------------------
# compiled-rule emission

def _rule_blocks(kb: CompiledKB) -> List[Tuple[str, str]]:
    out = []
    for r in kb.rules:
        note = f" skips={len(r.skips)}" if r.skips else ""
        src = analysis._rule_source(r, analysis._decoded_body(r))
        out.append((f"% {r.rule_id} ({r.origin}){note}", src))
    return out


# ---------------------------------------------------------------------------
# error exits

def _exit_parse(exc: ParseFailure, as_json: bool):
    if as_json:
        from .service import _parse_diags
        click.echo(json.dumps({"diagnostics": _parse_diags(exc)}, indent=2))
    else:
        for e in exc.errors:
            click.echo(str(e), err=True)
    sys.exit(1)


def _exit_transform(exc: TransformError, as_json: bool):
    if as_json:
        click.echo(json.dumps({"diagnostics": [
            {"message": str(exc), "rule_id": exc.rule_id}]}, indent=2))
    else:
        click.echo(str(exc), err=True)
    sys.exit(1)


# ---------------------------------------------------------------------------
# the interactive interrupt prompt

_MENU = ("  [d] table dump     [l] toggle logging   [t] Terminyzer\n"
         "  [s] SCC overview   [c] continue         [a] abort")

_MENU_KEYS = {
    "d": "d", "table dump": "d",
    "l": "l", "toggle logging": "l",
    "t": "t", "terminyzer": "t",
    "s": "s", "scc overview": "s",
    "c": "c", "continue": "c",
    "a": "a", "abort": "a",
}


def _prompt_handler(kb: CompiledKB):
    """Interrupt handler that talks to the terminal while the run is paused."""

    def on_pause(handle: EvaluationHandle):
        click.echo(f"-- paused ({handle.op_counter} ops) --")
        while True:
            click.echo(_MENU)
            try:
                raw = click.prompt("debug", default="continue",
                                   show_default=False)
            except (click.exceptions.Abort, EOFError):
                handle.request_abort()
                return
            key = _MENU_KEYS.get(raw.strip().lower())
            if key is None:
                click.echo(f"unknown choice: {raw.strip()}")
            elif key == "c":
                return
            elif key == "a":
                handle.request_abort()
                return
            elif key == "d":
                rows = analysis.table_dump(table_snapshot(handle), None,
                                           summary=True)
                _echo_tables(rows, summary=True)
            elif key == "l":
                handle.set_logging(not handle.logging)
                click.echo("logging " + ("on" if handle.logging else "off"))
            elif key == "t":
                log = forestlog.log_from_events(handle.events)
                _echo_terminyzer(analysis.analyze_termination(log, kb=kb))
            elif key == "s":
                log = forestlog.log_from_events(handle.events)
                _echo_scc_brief(analysis.sccs(log))

    return on_pause


# ---------------------------------------------------------------------------
# subcommands

@click.group()
def main():
    """Logic-program workbench: run queries, analyze logs, serve the API."""


@main.command()
@click.argument("files", nargs=-1, required=True)
@click.option("-q", "--query", "goal", required=True,
              help='goal to evaluate, e.g. "win(?X)"')
@click.option("--log", "log_path", metavar="PATH", default=None,
              help="write the forest log to PATH")
@click.option("--log-compat", is_flag=True,
              help="drop rule ids from table_call events (4-argument shape)")
@click.option("--interval", "interval_ms", type=float, metavar="MS",
              default=None,
              help="pause every MS milliseconds at a debugging prompt")
@click.option("--max-ops", type=int, metavar="N", default=None,
              help="fail the run after N table operations")
@click.option("--theory", type=click.Choice(THEORIES), default="default",
              help="defeasibility theory for rules with descriptors")
@click.option("--dump", "dump_pattern", metavar="PATTERN", default=None,
              help="after the run, print tables whose subgoal matches")
@click.option("--justify", "justify_literal", metavar="LITERAL", default=None,
              help="after the run, print a justification tree")
@click.option("--json", "as_json", is_flag=True,
              help="one JSON document instead of text")
@click.option("--emit", is_flag=True, help="print the compiled rules")
def run(files, goal, log_path, log_compat, interval_ms, max_ops, theory,
        dump_pattern, justify_literal, as_json, emit):
    """Evaluate GOAL against one or more program FILES."""
    sources = []
    for path in files:
        try:
            with open(path, encoding="utf-8") as fh:
                sources.append((path, fh.read()))
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
    try:
        kb = compile_kb(sources, theory=theory)
        plan = compile_goal(kb, goal)
    except ParseFailure as exc:
        _exit_parse(exc, as_json)
    except TransformError as exc:
        _exit_transform(exc, as_json)

    pattern = None
    if dump_pattern is not None:
        try:
            pattern = parse_term(dump_pattern)
        except (ParseFailure, ValueError) as exc:
            click.echo(f"bad --dump pattern: {exc}", err=True)
            sys.exit(1)
    if justify_literal is not None:
        try:
            Justification._as_lit(justify_literal)
        except (ParseFailure, ValueError) as exc:
            click.echo(f"bad --justify literal: {exc}", err=True)
            sys.exit(1)

    opts = EvalOptions(
        logging=log_path is not None or interval_ms is not None,
        log_path=log_path, log_compat=log_compat, interval_ms=interval_ms)
    if max_ops is not None:
        opts.max_ops = max_ops
    if interval_ms is not None:
        opts.on_interrupt = _prompt_handler(kb)

    if emit and not as_json:
        click.echo(f"% compiled rules ({len(kb.rules)})")
        for head, src in _rule_blocks(kb):
            click.echo(head)
            click.echo(src)
        click.echo("")

    try:
        handle = evaluate(kb, plan, opts)
    except (EngineError, ParseFailure) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    if as_json:
        _run_json(handle, kb, pattern, justify_literal, emit, log_path)
        return
    _run_text(handle, goal, plan, pattern, dump_pattern, justify_literal,
              log_path)


def _limit_hint(log_path: Optional[str]) -> str:
    if log_path:
        return f"inspect the log: rlg analyze {log_path} --terminyzer"
    return ("rerun with --log out.fl, then inspect it: "
            "rlg analyze out.fl --terminyzer")


def _run_text(handle, goal_text, plan, pattern, dump_pattern,
              justify_literal, log_path):
    if handle.state != "completed":
        if handle.error == "operation budget exhausted":
            click.echo(f"error: operation budget exhausted after "
                       f"{handle.op_counter} ops", err=True)
            click.echo(_limit_hint(log_path), err=True)
            sys.exit(3)
        click.echo(f"error: {handle.error or 'aborted'}", err=True)
        sys.exit(2)

    answers = handle.answers()
    if not answers:
        if vars_of(plan.call):
            click.echo("no answers.")
        else:
            click.echo(f"{goal_text}  FALSE")
    else:
        for a in answers:
            delays = ""
            if a.delays:
                delays = (" (delayed: "
                          + ", ".join(canonical_text(d) for d in a.delays)
                          + ")")
            click.echo(f"{canonical_text(a.literal)}  {a.tv.upper()}{delays}")
        t = sum(1 for a in answers if a.tv == "true")
        click.echo(f"{t} true, {len(answers) - t} undefined.")

    if dump_pattern is not None:
        click.echo("")
        click.echo(f"-- tables matching {dump_pattern} --")
        rows = analysis.table_dump(table_snapshot(handle), pattern)
        _echo_tables(rows, summary=False)

    if justify_literal is not None:
        click.echo("")
        click.echo(f"-- justification: {justify_literal} --")
        sess = Justification(handle)
        try:
            root = sess.root(justify_literal)
        except NoSuchTable:
            click.echo("justification unavailable: literal was never "
                       "evaluated", err=True)
            sys.exit(2)
        for node, depth in _walk_justification(sess, root):
            click.echo("  " * depth + _node_line(node))
    sys.exit(0)


def _run_json(handle, kb, pattern, justify_literal, emit, log_path):
    # share the wire builders with the HTTP service so both sides emit
    # identical payload shapes
    from .service import _answers_json

    completed = handle.state == "completed"
    doc = {
        "state": handle.state,
        "opCount": handle.op_counter,
        "error": handle.error,
        "answers": _answers_json(handle) if completed else [],
    }
    if emit:
        doc["rules"] = [
            {"ruleId": r.rule_id, "tag": r.tag, "origin": r.origin,
             "source": analysis._rule_source(r, analysis._decoded_body(r))}
            for r in kb.rules]
    if pattern is not None and completed:
        rows = analysis.table_dump(table_snapshot(handle), pattern)
        doc["summary"] = False
        doc["tables"] = [r.as_json() for r in rows]
    justify_failed = False
    if justify_literal is not None and completed:
        sess = Justification(handle)
        try:
            root = sess.root(justify_literal)
        except NoSuchTable:
            doc["justify"] = None
            justify_failed = True
        else:
            order = [n for n, _ in _walk_justification(sess, root)]
            doc["justify"] = {"root": root.as_json(),
                              "nodes": [n.as_json() for n in order]}
    if not completed and handle.error == "operation budget exhausted":
        doc["hint"] = _limit_hint(log_path)
    click.echo(json.dumps(doc, indent=2))
    if completed:
        sys.exit(2 if justify_failed else 0)
    sys.exit(3 if handle.error == "operation budget exhausted" else 2)


@main.command()
@click.argument("log_path", metavar="LOG")
@click.option("--overview", "mode", flag_value="overview", default=True,
              help="run census (the default)")
@click.option("--sccs", "mode", flag_value="sccs",
              help="call-graph components")
@click.option("--terminyzer", "mode", flag_value="terminyzer",
              help="non-termination analysis")
@click.option("--abstraction", type=click.Choice(["mode", "pred"]),
              default=None, help="abstract scc members (with --sccs)")
@click.option("--program", "program_path", metavar="FILE", default=None,
              help="program the log came from; enables rewrite suggestions")
@click.option("--theory", type=click.Choice(THEORIES), default="default",
              help="theory used when compiling --program")
@click.option("--json", "as_json", is_flag=True,
              help="one JSON document instead of text")
def analyze(log_path, mode, abstraction, program_path, theory, as_json):
    """Report on a forest log written by run --log or the service."""
    if abstraction is not None and mode != "sccs":
        raise click.UsageError("--abstraction only applies to --sccs")
    try:
        log = forestlog.load_log(log_path)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if not log.events and log.diagnostics:
        for d in log.diagnostics:
            click.echo(str(d), err=True)
        click.echo("error: no usable events in log", err=True)
        sys.exit(1)

    if mode == "overview":
        stats = analysis.overview(log)
        diags = [str(d) for d in log.diagnostics]
        diags.extend(forestlog.coverage_gaps(log))
        if as_json:
            click.echo(json.dumps({"overview": stats.as_json(),
                                   "diagnostics": diags}, indent=2))
        else:
            _echo_overview(stats, diags)
    elif mode == "sccs":
        abstr = {None: None, "mode": "mode_abstraction",
                 "pred": "predicate_abstraction"}[abstraction]
        comps = analysis.sccs(log, abstraction=abstr)
        if as_json:
            click.echo(json.dumps({"sccs": [c.as_json() for c in comps]},
                                  indent=2))
        else:
            _echo_sccs(comps)
    else:
        kb = None
        if program_path is not None:
            try:
                with open(program_path, encoding="utf-8") as fh:
                    kb = compile_kb([(program_path, fh.read())],
                                    theory=theory)
            except OSError as exc:
                click.echo(f"error: {exc}", err=True)
                sys.exit(1)
            except ParseFailure as exc:
                _exit_parse(exc, as_json)
            except TransformError as exc:
                _exit_transform(exc, as_json)
        report = analysis.analyze_termination(log, kb=kb)
        if as_json:
            click.echo(json.dumps({"report": report.as_json()}, indent=2))
        else:
            _echo_terminyzer(report)
    sys.exit(0)


@main.command()
@click.option("--port", type=int, default=None,
              help="listen port (default: SILK_PORT or 8040)")
@click.option("--data-dir", default=None,
              help="where kbs, sessions and logs persist "
                   "(default: SILK_DATA_DIR or ./rlg-data)")
@click.option("--ui-dir", default=None,
              help="static console files to serve at /")
def serve(port, data_dir, ui_dir):
    """Host the HTTP/JSON API (and the console when --ui-dir is given)."""
    if port is None:
        port = int(os.environ.get("SILK_PORT", "8040"))
    if ui_dir is not None and not os.path.isdir(ui_dir):
        click.echo(f"warning: ui dir {ui_dir} not found; serving API only",
                   err=True)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind(("127.0.0.1", port))
    except OSError as exc:
        click.echo(f"error: cannot bind port {port}: {exc}", err=True)
        sys.exit(1)
    finally:
        probe.close()
    click.echo(f"serving on http://127.0.0.1:{port}")
    from . import service
    try:
        service.main(port=port, data_dir=data_dir, ui_dir=ui_dir)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
