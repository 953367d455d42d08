"""Analytics: export bundles, group comparison, consensus, digests."""

from __future__ import annotations

import json
import math

import pytest

from vvp.analytics import (
    METRIC_NAMES,
    annotation_digest,
    compare_groups,
    comparison_to_document,
    consensus_to_document,
    export_bundle,
    fork_consensus,
    metric_value,
    render_comparison_table,
)
from vvp.session import SessionMetrics
from vvp.stats import SampleTooSmall, TestKind as StatTestKind

from conftest import StepClock, demo_session_log, play_through


def metrics_row(
    correct=3, available=6, time_ms=600000, optional=5, branch=2, comments=1
) -> SessionMetrics:
    return SessionMetrics(
        correct_answers=correct,
        questions_available=available,
        time_spent_ms=time_ms,
        active_time_ms=time_ms // 2,
        optional_interactions=optional,
        branch_paths_seen=branch,
        comments=comments,
    )


def build_group(optionals, corrects, times) -> list[SessionMetrics]:
    return [
        metrics_row(correct=c, optional=o, time_ms=t)
        for o, c, t in zip(optionals, corrects, times)
    ]


class TestExportBundle:
    def test_minimal_session(self, sample_project, clock):
        from vvp.session import start_session

        state = start_session(sample_project, "solo", clock, session_id="solo-1")
        bundle = export_bundle([state.events], sample_project)
        doc = json.loads(bundle)
        assert doc["project_id"] == sample_project.id
        assert len(doc["sessions"]) == 1
        assert all(t["answered"] == 0 for t in doc["question_tallies"])
        assert all(
            o["first_choices"] == 0
            for fork in doc["fork_tallies"]
            for o in fork["options"]
        )

    def test_fork_tally_two_sessions(self, sample_project):
        a = play_through(
            sample_project, StepClock(), session_id="a",
            fork_plan={"f-order": "o-order-app"},
        )
        b = play_through(
            sample_project, StepClock(), session_id="b",
            fork_plan={"f-order": "o-order-button"},
        )
        doc = json.loads(export_bundle([a.events, b.events], sample_project))
        order_fork = next(f for f in doc["fork_tallies"] if f["node"] == "f-order")
        counts = {o["option_id"]: o["first_choices"] for o in order_fork["options"]}
        assert counts == {"o-order-app": 1, "o-order-button": 1, "o-order-sensor": 0}

    def test_bundle_bytes_deterministic(self, sample_project):
        state = demo_session_log(sample_project)
        one = export_bundle([state.events], sample_project)
        two = export_bundle([state.events], sample_project)
        assert one == two
        rebuilt = demo_session_log(sample_project)
        assert export_bundle([rebuilt.events], sample_project) == one

    def test_session_order_does_not_matter(self, sample_project):
        a = play_through(sample_project, StepClock(), session_id="a")
        b = play_through(sample_project, StepClock(), session_id="b")
        assert export_bundle([a.events, b.events], sample_project) == export_bundle(
            [b.events, a.events], sample_project
        )

    def test_question_tallies_first_answer_only(self, sample_project):
        state = demo_session_log(sample_project)
        doc = json.loads(export_bundle([state.events], sample_project))
        intro = next(t for t in doc["question_tallies"] if t["node"] == "q-intro")
        assert intro["answered"] == 1 and intro["correct"] == 1


class TestMetricExtraction:
    def test_ratio(self):
        assert metric_value(metrics_row(correct=3, available=6), "correct_answer_ratio") == 0.5

    def test_zero_questions(self):
        assert metric_value(metrics_row(available=0), "correct_answer_ratio") == 0.0

    def test_all_names_covered(self):
        row = metrics_row()
        for name in METRIC_NAMES:
            metric_value(row, name)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            metric_value(metrics_row(), "nope")


class TestCompareGroups:
    def test_near_normal_chooses_t(self):
        # both groups shaped like [1,2,2,3,3,4]: Shapiro p ~ 0.82
        a = build_group([1, 2, 2, 3, 3, 4], [3] * 6, [600000 + i * 997 for i in range(6)])
        b = build_group([2, 3, 3, 4, 4, 5], [3] * 6, [640000 + i * 1009 for i in range(6)])
        report = compare_groups(a, b, alpha=0.05)
        row = next(r for r in report.metrics if r.metric_name == "optional_interactions")
        assert row.chosen_test is StatTestKind.STUDENT_T
        assert row.normality_a.p_two_tailed > 0.05
        assert row.normality_b.p_two_tailed > 0.05

    def test_skewed_chooses_mann_whitney(self):
        # one heavily skewed group: Shapiro p ~ 0.008
        a = build_group([9, 9, 9, 10, 11, 16], [5] * 6, [600000 + i * 997 for i in range(6)])
        b = build_group([1, 2, 2, 3, 3, 4], [3] * 6, [640000 + i * 1009 for i in range(6)])
        report = compare_groups(a, b, alpha=0.05)
        row = next(r for r in report.metrics if r.metric_name == "optional_interactions")
        assert row.chosen_test is StatTestKind.MANN_WHITNEY_U
        assert row.result.u == 0
        assert row.result.p_two_tailed == pytest.approx(0.005, abs=0.001)
        assert row.significant_at_alpha

    def test_decision_is_pure_function_of_p_and_alpha(self):
        a = build_group([1, 2, 2, 3, 3, 4], [3] * 6, [600000 + i * 997 for i in range(6)])
        b = build_group([2, 3, 3, 4, 4, 5], [3] * 6, [640000 + i * 1009 for i in range(6)])
        for alpha in (0.01, 0.05, 0.2, 0.9):
            report = compare_groups(a, b, alpha=alpha)
            for row in report.metrics:
                both_normal = (
                    row.normality_a.p_two_tailed > alpha
                    and row.normality_b.p_two_tailed > alpha
                )
                assert (row.chosen_test is StatTestKind.STUDENT_T) == both_normal

    def test_constant_metric_routes_to_u_test(self):
        # branch_paths_seen is 2 for everyone: no normality evidence
        a = build_group([1, 2, 2, 3, 3, 4], [3] * 6, [600000 + i * 997 for i in range(6)])
        b = build_group([2, 3, 3, 4, 4, 5], [3] * 6, [640000 + i * 1009 for i in range(6)])
        report = compare_groups(a, b)
        row = next(r for r in report.metrics if r.metric_name == "branch_paths_seen")
        assert row.chosen_test is StatTestKind.MANN_WHITNEY_U
        assert row.result.p_two_tailed == pytest.approx(1.0)
        assert not row.significant_at_alpha

    def test_too_small(self):
        a = [metrics_row(), metrics_row()]
        b = [metrics_row()] * 6
        with pytest.raises(SampleTooSmall):
            compare_groups(a, b)

    def test_bad_alpha(self):
        a = [metrics_row()] * 3
        with pytest.raises(ValueError):
            compare_groups(a, a, alpha=1.5)

    def test_renderings(self):
        a = build_group([9, 9, 9, 10, 11, 16], [5] * 6, [600000 + i * 997 for i in range(6)])
        b = build_group([1, 2, 2, 3, 3, 4], [3] * 6, [640000 + i * 1009 for i in range(6)])
        report = compare_groups(a, b)
        table = render_comparison_table(report)
        assert "optional_interactions" in table
        assert "MannWhitneyU" in table
        # approximation vs exact deviation shows up side by side
        assert "exact" in table
        doc = comparison_to_document(report)
        assert {m["metric"] for m in doc["metrics"]} == set(METRIC_NAMES)
        row = next(m for m in doc["metrics"] if m["metric"] == "optional_interactions")
        assert 0.0 < row["result"]["p_exact"] < row["result"]["p_two_tailed"]
        json.dumps(doc)


class TestForkConsensus:
    def run_sessions(self, project, plans):
        logs = []
        for i, plan in enumerate(plans):
            state = play_through(
                project, StepClock(), session_id=f"c{i}", fork_plan=plan
            )
            logs.append(state.events)
        return logs

    def test_unanimous_choice_zero_controversy(self, sample_project):
        logs = self.run_sessions(
            sample_project, [{"f-delivery": "o-del-drone"}] * 5
        )
        report = fork_consensus(sample_project, logs)
        delivery = next(f for f in report.forks if f.node == "f-delivery")
        counts = {o.option_id: o.first_choices for o in delivery.options}
        assert counts == {"o-del-neighbor": 0, "o-del-drone": 5, "o-del-trunk": 0}
        assert delivery.controversy == 0.0

    def test_even_split_max_controversy(self, sample_project):
        plans = (
            [{"f-delivery": "o-del-neighbor"}] * 2
            + [{"f-delivery": "o-del-drone"}] * 2
            + [{"f-delivery": "o-del-trunk"}] * 2
        )
        report = fork_consensus(sample_project, self.run_sessions(sample_project, plans))
        delivery = next(f for f in report.forks if f.node == "f-delivery")
        assert delivery.controversy == pytest.approx(1.0, abs=1e-12)

    def test_four_one_one_split(self, sample_project):
        plans = (
            [{"f-delivery": "o-del-neighbor"}] * 4
            + [{"f-delivery": "o-del-drone"}]
            + [{"f-delivery": "o-del-trunk"}]
        )
        report = fork_consensus(sample_project, self.run_sessions(sample_project, plans))
        delivery = next(f for f in report.forks if f.node == "f-delivery")
        # hand oracle: -(sum p ln p) / ln 3 for p = (2/3, 1/6, 1/6)
        expected = -(
            (2 / 3) * math.log(2 / 3) + 2 * ((1 / 6) * math.log(1 / 6))
        ) / math.log(3)
        assert delivery.controversy == pytest.approx(expected, abs=1e-12)
        assert round(delivery.controversy, 1) == 0.8

    def test_additional_views_counted(self, sample_project):
        state = demo_session_log(sample_project)
        report = fork_consensus(sample_project, [state.events])
        delivery = next(f for f in report.forks if f.node == "f-delivery")
        by_option = {o.option_id: o for o in delivery.options}
        assert by_option["o-del-drone"].first_choices == 1
        assert by_option["o-del-neighbor"].additional_views == 1
        json.dumps(consensus_to_document(report))


class TestAnnotationDigest:
    def test_empty(self):
        assert annotation_digest([]) == []

    def test_demo_session_entries(self, sample_project):
        state = demo_session_log(sample_project)
        entries = annotation_digest([state.events])
        titles = [e.title for e in entries]
        assert "imagined differently" in titles
        assert "comment" in titles
        comment = next(e for e in entries if e.title == "comment")
        assert comment.body[0][1] == "why not an existing courier service?"
        assert comment.viewer_id == "demo-viewer"

    def test_two_viewers_same_scene_grouped(self, sample_project):
        logs = []
        for name in ("ana", "ben"):
            clock = StepClock()
            from vvp.session import (
                AddAnnotation,
                Progress,
                start_session,
                apply_event,
            )

            state = start_session(sample_project, name, clock, session_id=f"s-{name}")
            state, _ = apply_event(state, Progress(500), clock, sample_project)
            state, _ = apply_event(
                state, AddAnnotation(f"{name} says"), clock, sample_project
            )
            logs.append(state.events)
        entries = annotation_digest(logs)
        assert [e.node for e in entries] == ["s-intro", "s-intro"]
        assert {e.viewer_id for e in entries} == {"ana", "ben"}
