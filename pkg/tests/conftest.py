"""Shared fixtures: deterministic clocks, scripted playthroughs, random walks."""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

from vvp.graph import (
    QuestionNode,
    SceneNode,
    VideoProject,
    navigation_points,
    node_duration_ms,
)
from vvp.sample import build_sample_project
from vvp.session import (
    Acknowledge,
    AddAnnotation,
    AddComment,
    AnnotationExpanded,
    Answer,
    AwaitingFork,
    Choose,
    Collapse,
    CloseOverview,
    Ended,
    Expand,
    IllegalTransition,
    Navigate,
    OpenOverview,
    OverviewOpen,
    Pause,
    PausedByUser,
    PausedQuestion,
    PausedQuestionFeedback,
    Play,
    Playing,
    Progress,
    SceneEnd,
    Seek,
    SessionState,
    ToggleAnnotations,
    annotations_at_playhead,
    apply_event,
    parse_rfc3339,
    start_session,
)


class StepClock:
    """Monotonic fake clock advancing a fixed step per reading."""

    def __init__(self, start: datetime | None = None, step_ms: int = 1000):
        self.t = start or datetime(2026, 8, 10, 12, 0, 0, tzinfo=timezone.utc)
        self.step = timedelta(milliseconds=step_ms)

    def __call__(self) -> datetime:
        self.t += self.step
        return self.t


@pytest.fixture
def sample_project() -> VideoProject:
    return build_sample_project()


@pytest.fixture
def clock() -> StepClock:
    return StepClock()


def drive(project, state, inputs, clock):
    """Apply a list of inputs in order, returning the final state."""
    for item in inputs:
        state, _ = apply_event(state, item, clock, project)
    return state


def play_through(
    project: VideoProject,
    clock,
    *,
    viewer_id: str = "viewer",
    session_id: str | None = None,
    wrong_questions: set[str] = frozenset(),
    comments_at_start: int = 0,
    fork_plan: dict[str, str] | None = None,
) -> SessionState:
    """Straight playthrough: watch every scene, answer every question, pick
    the planned (default: first) option at each fork, run to the end."""
    state = start_session(project, viewer_id, clock, session_id=session_id)
    fork_plan = fork_plan or {}
    for _ in range(10_000):
        mode = state.mode
        if isinstance(mode, Ended):
            return state
        if isinstance(mode, Playing):
            if comments_at_start > 0:
                state, _ = apply_event(state, AddComment(f"note {comments_at_start}"), clock, project)
                comments_at_start -= 1
                continue
            node = project.nodes[state.current_node]
            state, _ = apply_event(state, Progress(node.duration_ms), clock, project)
            state, _ = apply_event(state, SceneEnd(), clock, project)
        elif isinstance(mode, PausedQuestion):
            question = project.nodes[mode.node]
            if mode.node in state.answered:
                state, _ = apply_event(state, Acknowledge(), clock, project)
            else:
                wrong = (question.correct_index + 1) % len(question.choices)
                pick = wrong if mode.node in wrong_questions else question.correct_index
                state, _ = apply_event(state, Answer(pick), clock, project)
        elif isinstance(mode, PausedQuestionFeedback):
            state, _ = apply_event(state, Acknowledge(), clock, project)
        elif isinstance(mode, AwaitingFork):
            fork = project.nodes[mode.node]
            option = fork_plan.get(mode.node, fork.options[0].option_id)
            state, _ = apply_event(state, Choose(option), clock, project)
        else:  # pragma: no cover - straight playthroughs never open overlays
            raise AssertionError(f"unexpected mode {mode}")
    raise AssertionError("playthrough did not terminate")


def demo_session_log(project: VideoProject) -> SessionState:
    """The richer scripted fixture: annotations, overview jump, extra path."""
    clock = StepClock()
    state = start_session(project, "demo-viewer", clock, session_id="demo-session")
    steps = [
        Progress(60000),
        SceneEnd(),            # -> q-intro
        Answer(0),
        Acknowledge(),         # -> f-order
        Choose("o-order-app"),
        Progress(10000),
        ToggleAnnotations(),
        Expand("a-app-flow"),
        Collapse("a-app-flow"),
        Progress(45000),
        SceneEnd(),            # -> q-order-app
        Answer(1),             # wrong on purpose
        Acknowledge(),         # -> s-mid
        AddComment("why not an existing courier service?"),
        Progress(30000),
        SceneEnd(),            # -> q-mid
        Answer(0),
        Acknowledge(),         # -> f-delivery
        Choose("o-del-drone"),
        OpenOverview(),
        Navigate("f-delivery"),
        Choose("o-del-neighbor"),
        Progress(50000),
        SceneEnd(),            # -> q-del-neighbor
        Answer(0),
        Acknowledge(),         # -> s-outro
        AddAnnotation("imagined differently", ()),
        Progress(40000),
        SceneEnd(),            # -> q-outro-1
        Answer(0),
        Acknowledge(),         # -> q-outro-2
        Answer(2),             # wrong on purpose
        Acknowledge(),         # -> end
    ]
    return drive(project, state, steps, clock)


# ---------------------------------------------------------------------------
# Random valid projects, used for round-trip and engine walk properties


def random_project(rng: random.Random) -> VideoProject:
    """A playable project: chained segments with optional questions, forks
    with per-option mini branches, scattered annotations and nav flags."""
    from vvp.graph import (
        AnchorRange,
        Annotation,
        AuthorKind,
        BodyItem,
        BodyType,
        EndNode,
        ForkNode,
        ForkOption,
        MediaDescriptor,
    )

    media: dict = {}
    nodes: dict = {}
    annotations = []
    counter = 0

    def new_media() -> str:
        media_id = f"m{len(media)}"
        media[media_id] = MediaDescriptor(
            media_id,
            f"media/{media_id}.mp4",
            rng.randint(1000, 90000),
            "video/mp4",
        )
        return media_id

    def new_scene(nxt: str) -> str:
        nonlocal counter
        counter += 1
        node_id = f"s{counter}"
        media_id = new_media()
        nodes[node_id] = SceneNode(
            node_id,
            media_id,
            media[media_id].duration_ms,
            f"Scene {counter}",
            nxt,
            is_nav_point=rng.random() < 0.6,
        )
        if rng.random() < 0.4:
            duration = media[media_id].duration_ms
            start = rng.randint(0, duration)
            annotations.append(
                Annotation(
                    f"a{counter}",
                    AuthorKind.CREATOR,
                    AnchorRange(node_id, start, rng.randint(start, duration)),
                    f"Note {counter}",
                    (BodyItem(BodyType.TEXT, "background detail"),),
                )
            )
        return node_id

    def new_question(nxt: str) -> str:
        nonlocal counter
        counter += 1
        node_id = f"q{counter}"
        choices = tuple(f"choice {i}" for i in range(rng.randint(2, 4)))
        nodes[node_id] = QuestionNode(
            node_id,
            f"Question {counter}?",
            choices,
            rng.randrange(len(choices)),
            nxt,
            is_nav_point=rng.random() < 0.2,
        )
        return node_id

    def chain(nxt: str, scenes: int) -> str:
        head = nxt
        for _ in range(scenes):
            if rng.random() < 0.35:
                head = new_question(head)
            head = new_scene(head)
        return head

    nodes["end"] = EndNode("end")
    head = chain("end", rng.randint(1, 2))
    for _ in range(rng.randint(0, 2)):
        nonlocal_counter = counter
        options = []
        for i in range(rng.randint(2, 3)):
            target = chain(head, rng.randint(1, 2))
            options.append(ForkOption(f"o{nonlocal_counter}-{i}", f"variant {i}", target))
        counter += 1
        fork_id = f"f{counter}"
        nodes[fork_id] = ForkNode(
            fork_id, f"Pick {counter}", tuple(options), is_nav_point=rng.random() < 0.7
        )
        head = chain(fork_id, rng.randint(1, 2))
    start = head
    return VideoProject(
        id=f"gen-{rng.randrange(10**6)}",
        title="Generated project",
        start_node=start,
        nodes=nodes,
        annotations=tuple(annotations),
        media_assets=media,
    )


# ---------------------------------------------------------------------------
# Independent metrics oracle: a straight count over raw log records, kept
# deliberately separate from the engine's replay path.


def count_metrics_from_records(records: list[dict], project: VideoProject) -> dict:
    answered_first: dict[str, bool] = {}
    forks_seen: set[str] = set()
    optional = 0
    branch: set[str] = set()
    comments = 0
    for rec in records:
        kind = rec["kind"]
        payload = rec.get("payload", {})
        if kind == "QuestionAnswered":
            node = payload["node"]
            if node not in answered_first:
                answered_first[node] = payload["correct"]
            optional += 0  # answering is mandatory
        elif kind == "ChoosePath":
            fork = payload["node"]
            if fork in forks_seen:
                optional += 1
            forks_seen.add(fork)
            branch.add(payload["option_id"])
        elif kind in ("AnnotationExpanded", "OverviewNavigated", "ViewerAnnotationAdded"):
            optional += 1
        elif kind == "CommentAdded":
            optional += 1
            comments += 1
    first = parse_rfc3339(records[0]["wall_time"])
    last = parse_rfc3339(records[-1]["wall_time"])
    return {
        "correct_answers": sum(1 for v in answered_first.values() if v),
        "questions_available": sum(
            1 for n in project.nodes.values() if isinstance(n, QuestionNode)
        ),
        "time_spent_ms": round((last - first).total_seconds() * 1000),
        "optional_interactions": optional,
        "branch_paths_seen": len(branch),
        "comments": comments,
    }


# ---------------------------------------------------------------------------
# Random legal walks over the state machine


def legal_inputs(project: VideoProject, state: SessionState, rng: random.Random):
    """Candidate inputs that should be accepted in the current state."""
    mode = state.mode
    out = []
    if isinstance(mode, Playing):
        node = project.nodes[state.current_node]
        out.append(SceneEnd())
        out.append(Pause())
        out.append(OpenOverview())
        out.append(AddComment("c"))
        out.append(AddAnnotation("note", ()))
        out.append(Progress(rng.randint(0, node_duration_ms(node))))
        if state.annotations_visible or annotations_at_playhead(project, state):
            out.append(ToggleAnnotations())
        if state.annotations_visible:
            boxes = annotations_at_playhead(project, state)
            if boxes:
                out.append(Expand(rng.choice(boxes).annotation_id))
        visited_scenes = [
            n for n in state.visited if isinstance(project.nodes[n], SceneNode)
        ]
        if visited_scenes:
            target = rng.choice(visited_scenes)
            out.append(Seek(target, rng.randint(0, project.nodes[target].duration_ms)))
    elif isinstance(mode, PausedByUser):
        out.append(Play())
        out.append(OpenOverview())
        out.append(AddComment("paused note"))
    elif isinstance(mode, PausedQuestion):
        question = project.nodes[mode.node]
        out.append(Answer(rng.randrange(len(question.choices))))
        if mode.node in state.answered:
            out.append(Acknowledge())
    elif isinstance(mode, PausedQuestionFeedback):
        out.append(Acknowledge())
    elif isinstance(mode, AwaitingFork):
        fork = project.nodes[mode.node]
        out.append(Choose(rng.choice(fork.options).option_id))
    elif isinstance(mode, OverviewOpen):
        out.append(CloseOverview())
        visited_nav = [
            p.node for p in navigation_points(project) if p.node in state.visited
        ]
        if visited_nav:
            out.append(Navigate(rng.choice(visited_nav)))
    elif isinstance(mode, AnnotationExpanded):
        out.append(Collapse(mode.annotation_id))
    return out


def illegal_inputs(project: VideoProject, state: SessionState):
    """A few inputs that must be rejected in the current state."""
    mode = state.mode
    if isinstance(mode, (PausedQuestion, AwaitingFork)):
        return [Play(), Seek(project.start_node, 0), Pause(), OpenOverview()]
    if isinstance(mode, Playing):
        return [Play(), Acknowledge()]
    if isinstance(mode, PausedByUser):
        return [Pause(), SceneEnd(), Choose("nope")]
    if isinstance(mode, Ended):
        return [Play(), Pause(), SceneEnd()]
    return [SceneEnd()]


def random_walk(project: VideoProject, rng: random.Random, max_steps: int = 40):
    """Random legal session; asserts rejected inputs along the way."""
    clock = StepClock(step_ms=rng.choice([250, 1000, 3777]))
    state = start_session(
        project, f"walker-{rng.randrange(10**6)}", clock,
        session_id=f"walk-{rng.randrange(10**9)}",
    )
    for _ in range(max_steps):
        if isinstance(state.mode, Ended):
            break
        if rng.random() < 0.15:
            for bad in illegal_inputs(project, state):
                try:
                    apply_event(state, bad, clock, project)
                except IllegalTransition:
                    continue
                else:
                    raise AssertionError(
                        f"{type(bad).__name__} accepted in {type(state.mode).__name__}"
                    )
        candidates = legal_inputs(project, state, rng)
        if not candidates:
            break
        choice = rng.choice(candidates)
        state, _ = apply_event(state, choice, clock, project)
    return state
