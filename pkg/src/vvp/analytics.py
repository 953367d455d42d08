"""Session export, group comparison pipeline, fork consensus, annotation digest.

The comparison pipeline mirrors a two-group between-subjects evaluation: each
metric is tested for normality per group (Shapiro-Wilk), then compared with
Student's t when both groups look normal at the chosen alpha and with the
Mann-Whitney U test otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import ForkNode, QuestionNode, VideoProject
from .project_io import annotation_to_entry, canonical_json_bytes
from .session import (
    EventKind,
    SessionEvent,
    SessionMetrics,
    SessionState,
    format_rfc3339,
    replay,
)
from .stats import (
    ConstantSample,
    GroupSummary,
    SampleTooSmall,
    TestKind,
    TestResult,
    aggregate_group,
    mann_whitney_u,
    shapiro_wilk,
    students_t_test,
)

BUNDLE_FILE_EXTENSION = ".vvx"

# metric extractors, in reporting order
METRIC_NAMES = (
    "correct_answer_ratio",
    "time_spent_ms",
    "optional_interactions",
    "branch_paths_seen",
    "comments",
)


def metric_value(metrics: SessionMetrics, name: str) -> float:
    if name == "correct_answer_ratio":
        if metrics.questions_available == 0:
            return 0.0
        return metrics.correct_answers / metrics.questions_available
    if name == "time_spent_ms":
        return float(metrics.time_spent_ms)
    if name == "optional_interactions":
        return float(metrics.optional_interactions)
    if name == "branch_paths_seen":
        return float(metrics.branch_paths_seen)
    if name == "comments":
        return float(metrics.comments)
    raise KeyError(name)


# ---------------------------------------------------------------------------
# Export bundle


def _session_entry(state: SessionState, project: VideoProject) -> dict:
    metrics = state.metrics(project)
    return {
        "session_id": state.session_id,
        "viewer_id": state.viewer_id,
        "events": [e.to_record() for e in state.events],
        "metrics": {
            "correct_answers": metrics.correct_answers,
            "questions_available": metrics.questions_available,
            "time_spent_ms": metrics.time_spent_ms,
            "active_time_ms": metrics.active_time_ms,
            "optional_interactions": metrics.optional_interactions,
            "branch_paths_seen": metrics.branch_paths_seen,
            "comments": metrics.comments,
        },
        "viewer_annotations": [annotation_to_entry(a) for a in state.viewer_annotations],
        "comments": [
            {
                "seq": c.seq,
                "node": c.node,
                "offset_ms": c.offset_ms,
                "wall_time": c.wall_time,
                "text": c.text,
            }
            for c in state.comments
        ],
        "fork_choices": [
            {"fork": c.fork, "option_id": c.option_id, "seq": c.seq}
            for c in state.fork_choices
        ],
    }


def export_bundle(logs: list[list[SessionEvent]], project: VideoProject) -> bytes:
    """Canonical .vvx document for a set of session logs.

    Deterministic: generated_at is the latest event timestamp, sessions are
    ordered by session id, and the JSON form is canonical, so re-exporting
    the same logs yields byte-identical output.
    """
    states = [replay(events, project) for events in logs]
    states.sort(key=lambda s: s.session_id)

    question_tallies = []
    for node_id in sorted(project.nodes):
        node = project.nodes[node_id]
        if not isinstance(node, QuestionNode):
            continue
        counts = [0] * len(node.choices)
        for state in states:
            record = state.answered.get(node_id)
            if record is not None:
                counts[record.chosen_index] += 1
        correct = sum(
            1
            for state in states
            if (r := state.answered.get(node_id)) is not None and r.correct
        )
        answered_total = sum(counts)
        question_tallies.append(
            {
                "node": node_id,
                "prompt": node.prompt,
                "choice_counts": counts,
                "answered": answered_total,
                "correct": correct,
                "incorrect": answered_total - correct,
            }
        )

    fork_tallies = []
    for node_id in sorted(project.nodes):
        node = project.nodes[node_id]
        if not isinstance(node, ForkNode):
            continue
        entry_options = []
        for opt in node.options:
            first = 0
            total = 0
            for state in states:
                per_fork = [c for c in state.fork_choices if c.fork == node_id]
                total += sum(1 for c in per_fork if c.option_id == opt.option_id)
                if per_fork and per_fork[0].option_id == opt.option_id:
                    first += 1
            entry_options.append(
                {
                    "option_id": opt.option_id,
                    "label": opt.label,
                    "first_choices": first,
                    "total_choices": total,
                }
            )
        fork_tallies.append({"node": node_id, "prompt": node.prompt, "options": entry_options})

    last_wall = None
    for state in states:
        if state.events:
            tail = state.events[-1].wall_time
            last_wall = tail if last_wall is None or tail > last_wall else last_wall
    generated_at = (
        format_rfc3339(last_wall) if last_wall is not None else "1970-01-01T00:00:00.000Z"
    )

    doc = {
        "project_id": project.id,
        "generated_at": generated_at,
        "sessions": [_session_entry(s, project) for s in states],
        "question_tallies": question_tallies,
        "fork_tallies": fork_tallies,
    }
    return canonical_json_bytes(doc)


# ---------------------------------------------------------------------------
# Group comparison


@dataclass(frozen=True)
class MetricComparison:
    metric_name: str
    group_a: GroupSummary
    group_b: GroupSummary
    normality_a: TestResult
    normality_b: TestResult
    chosen_test: TestKind
    result: TestResult
    significant_at_alpha: bool
    alpha: float


@dataclass(frozen=True)
class ComparisonReport:
    alpha: float
    metrics: tuple[MetricComparison, ...]


def _normality(values: list[float]) -> TestResult:
    try:
        return shapiro_wilk(values)
    except ConstantSample:
        # a constant sample carries no evidence of normality; route to U test
        return TestResult(
            TestKind.SHAPIRO_WILK,
            statistic=0.0,
            p_two_tailed=0.0,
            note="constant sample; normality rejected by convention",
        )


def compare_groups(
    group_a: list[SessionMetrics],
    group_b: list[SessionMetrics],
    alpha: float = 0.05,
) -> ComparisonReport:
    """Per-metric two-group comparison with normality-based test selection.

    Student's t is chosen exactly when both groups' Shapiro-Wilk p-values
    exceed alpha; otherwise the Mann-Whitney U test runs. Two-tailed
    throughout; significance means p < alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if len(group_a) < 3 or len(group_b) < 3:
        raise SampleTooSmall("each group needs at least 3 sessions for normality testing")

    rows = []
    for name in METRIC_NAMES:
        values_a = [metric_value(m, name) for m in group_a]
        values_b = [metric_value(m, name) for m in group_b]
        normality_a = _normality(values_a)
        normality_b = _normality(values_b)
        normal = (
            normality_a.p_two_tailed > alpha and normality_b.p_two_tailed > alpha
        )
        # constant samples never reach the t-test: they fail normality above,
        # so the pooled variance here is always positive
        if normal:
            result = students_t_test(values_a, values_b)
        else:
            result = mann_whitney_u(values_a, values_b)
        rows.append(
            MetricComparison(
                metric_name=name,
                group_a=aggregate_group(values_a, name),
                group_b=aggregate_group(values_b, name),
                normality_a=normality_a,
                normality_b=normality_b,
                chosen_test=result.test,
                result=result,
                significant_at_alpha=result.p_two_tailed < alpha,
                alpha=alpha,
            )
        )
    return ComparisonReport(alpha=alpha, metrics=tuple(rows))


def comparison_to_document(report: ComparisonReport) -> dict:
    def test_result(r: TestResult) -> dict:
        out = {"test": r.test.value, "statistic": r.statistic, "p_two_tailed": r.p_two_tailed}
        if r.df is not None:
            out["df"] = r.df
        if r.u is not None:
            out["u"] = r.u
        if r.z is not None:
            out["z"] = r.z
        if r.p_exact is not None:
            out["p_exact"] = r.p_exact
        if r.note:
            out["note"] = r.note
        return out

    def summary(s: GroupSummary) -> dict:
        return {
            "n": s.n,
            "mean": s.mean,
            "median": s.median,
            "sample_sd": s.sample_sd,
            "min": s.min,
            "max": s.max,
            "values": list(s.values),
            "degenerate_sd": s.degenerate_sd,
        }

    return {
        "alpha": report.alpha,
        "metrics": [
            {
                "metric": row.metric_name,
                "group_a": summary(row.group_a),
                "group_b": summary(row.group_b),
                "normality_a": test_result(row.normality_a),
                "normality_b": test_result(row.normality_b),
                "chosen_test": row.chosen_test.value,
                "result": test_result(row.result),
                "significant_at_alpha": row.significant_at_alpha,
            }
            for row in report.metrics
        ],
    }


def render_comparison_table(report: ComparisonReport) -> str:
    """Plain-text table, one row per metric."""
    headers = (
        "metric",
        "n",
        "mean A",
        "med A",
        "sd A",
        "mean B",
        "med B",
        "sd B",
        "test",
        "statistic",
        "p",
        "sig",
    )
    lines = []
    rows = [headers]
    for row in report.metrics:
        a, b, r = row.group_a, row.group_b, row.result
        if r.test is TestKind.STUDENT_T:
            stat = f"t({r.df:.0f})={r.statistic:+.3f}"
        else:
            stat = f"U={r.u:g}, z={r.z:+.3f}"
        p_text = f"{r.p_two_tailed:.3f}"
        if r.p_exact is not None:
            p_text += f" (exact {r.p_exact:.4f})"
        rows.append(
            (
                row.metric_name,
                f"{a.n}/{b.n}",
                f"{a.mean:.3f}",
                f"{a.median:.3f}",
                f"{a.sample_sd:.3f}",
                f"{b.mean:.3f}",
                f"{b.median:.3f}",
                f"{b.sample_sd:.3f}",
                row.chosen_test.value,
                stat,
                p_text,
                "*" if row.significant_at_alpha else "",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append(f"alpha = {report.alpha}; * marks p < alpha (two-tailed)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Fork consensus


@dataclass(frozen=True)
class OptionConsensus:
    option_id: str
    label: str
    first_choices: int
    additional_views: int


@dataclass(frozen=True)
class ForkConsensus:
    node: str
    prompt: str
    options: tuple[OptionConsensus, ...]
    sessions_deciding: int
    controversy: float


@dataclass(frozen=True)
class ConsensusReport:
    project_id: str
    forks: tuple[ForkConsensus, ...]


def _normalized_entropy(counts: list[int], option_count: int) -> float:
    total = sum(counts)
    if total == 0 or option_count < 2:
        return 0.0
    entropy = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            entropy -= p * math.log(p)
    return entropy / math.log(option_count)


def fork_consensus(project: VideoProject, logs: list[list[SessionEvent]]) -> ConsensusReport:
    """Distribution of first-pass path choices per fork, with a controversy
    score: normalized Shannon entropy, 0 for unanimity, 1 for an even split."""
    states = [replay(events, project) for events in logs]
    forks = []
    for node_id in sorted(project.nodes):
        node = project.nodes[node_id]
        if not isinstance(node, ForkNode):
            continue
        firsts: dict[str, int] = {opt.option_id: 0 for opt in node.options}
        extras: dict[str, int] = {opt.option_id: 0 for opt in node.options}
        deciding = 0
        for state in states:
            per_fork = [c for c in state.fork_choices if c.fork == node_id]
            if not per_fork:
                continue
            deciding += 1
            firsts[per_fork[0].option_id] += 1
            for choice in per_fork[1:]:
                extras[choice.option_id] += 1
        forks.append(
            ForkConsensus(
                node=node_id,
                prompt=node.prompt,
                options=tuple(
                    OptionConsensus(
                        opt.option_id, opt.label, firsts[opt.option_id], extras[opt.option_id]
                    )
                    for opt in node.options
                ),
                sessions_deciding=deciding,
                controversy=_normalized_entropy(list(firsts.values()), len(node.options)),
            )
        )
    return ConsensusReport(project_id=project.id, forks=tuple(forks))


def consensus_to_document(report: ConsensusReport) -> dict:
    return {
        "project_id": report.project_id,
        "forks": [
            {
                "node": f.node,
                "prompt": f.prompt,
                "sessions_deciding": f.sessions_deciding,
                "controversy": f.controversy,
                "options": [
                    {
                        "option_id": o.option_id,
                        "label": o.label,
                        "first_choices": o.first_choices,
                        "additional_views": o.additional_views,
                    }
                    for o in f.options
                ],
            }
            for f in report.forks
        ],
    }


# ---------------------------------------------------------------------------
# Viewer annotation digest


@dataclass(frozen=True)
class DigestEntry:
    node: str
    start_ms: int
    end_ms: int
    viewer_id: str
    session_id: str
    title: str
    body: tuple
    created_at: str


def annotation_digest(logs: list[list[SessionEvent]]) -> list[DigestEntry]:
    """All viewer annotations plus comments (as text annotations titled
    "comment"), grouped by anchor node and ordered by node then time."""
    entries: list[DigestEntry] = []
    for events in logs:
        session_id = ""
        viewer_id = ""
        for event in events:
            if event.kind is EventKind.SESSION_STARTED:
                session_id = str(event.payload.get("session_id", ""))
                viewer_id = str(event.payload.get("viewer_id", ""))
            elif event.kind is EventKind.VIEWER_ANNOTATION_ADDED:
                raw = event.payload.get("annotation", {})
                anchor = raw.get("anchor", {})
                entries.append(
                    DigestEntry(
                        node=anchor.get("node", event.node),
                        start_ms=int(anchor.get("start_ms", event.offset_ms)),
                        end_ms=int(anchor.get("end_ms", event.offset_ms)),
                        viewer_id=viewer_id,
                        session_id=session_id,
                        title=str(raw.get("title", "")),
                        body=tuple(
                            (item.get("type", "text"), item.get("value", ""))
                            for item in raw.get("body", [])
                        ),
                        created_at=str(raw.get("created_at", format_rfc3339(event.wall_time))),
                    )
                )
            elif event.kind is EventKind.COMMENT_ADDED:
                entries.append(
                    DigestEntry(
                        node=event.node,
                        start_ms=event.offset_ms,
                        end_ms=event.offset_ms,
                        viewer_id=viewer_id,
                        session_id=session_id,
                        title="comment",
                        body=(("text", str(event.payload.get("text", ""))),),
                        created_at=format_rfc3339(event.wall_time),
                    )
                )
    entries.sort(key=lambda e: (e.node, e.created_at, e.session_id, e.title))
    return entries


def digest_to_document(entries: list[DigestEntry]) -> list[dict]:
    return [
        {
            "anchor": {"node": e.node, "start_ms": e.start_ms, "end_ms": e.end_ms},
            "viewer_id": e.viewer_id,
            "session_id": e.session_id,
            "title": e.title,
            "body": [{"type": t, "value": v} for t, v in e.body],
            "created_at": e.created_at,
        }
        for e in entries
    ]
