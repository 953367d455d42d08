"""Playback session state machine and its append-only event log.

The engine is event sourced: viewer inputs are translated into events, and a
single reducer both advances live sessions and replays persisted logs, so any
log the engine produced replays to the identical state. Interaction rules
enforced here: questions and forks pause playback and cannot be skipped,
forks accept nothing but a path choice, expanded annotations pause and
restore the previous mode, and only the first answer per question counts.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Iterable

from .graph import (
    AnchorRange,
    Annotation,
    AuthorKind,
    EndNode,
    ForkNode,
    Node,
    NodeId,
    QuestionNode,
    SceneNode,
    VideoProject,
    node_duration_ms,
    navigation_points,
    validate_graph,
)
from .project_io import ProjectSyntaxError, annotation_from_entry, annotation_to_entry

Clock = Callable[[], datetime]

LOG_FILE_EXTENSION = ".vvlog"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class EngineError(Exception):
    pass


class InvalidProject(EngineError):
    def __init__(self, report):
        self.report = report
        super().__init__(
            "; ".join(f"{i.code.value}: {i.detail}" for i in report.errors)
        )


class IllegalTransition(EngineError):
    def __init__(self, mode: "Mode", what: str, reason: str = ""):
        self.mode = mode
        self.what = what
        self.reason = reason
        detail = f"{what} not allowed in {mode_name(mode)}"
        super().__init__(f"{detail} ({reason})" if reason else detail)


class CorruptLog(EngineError):
    def __init__(self, seq: int | None, reason: str):
        self.seq = seq
        self.reason = reason
        super().__init__(f"seq {seq}: {reason}" if seq is not None else reason)


# ---------------------------------------------------------------------------
# Modes


@dataclass(frozen=True)
class Playing:
    pass


@dataclass(frozen=True)
class PausedByUser:
    pass


@dataclass(frozen=True)
class PausedQuestion:
    node: NodeId


@dataclass(frozen=True)
class PausedQuestionFeedback:
    node: NodeId
    chosen_index: int


@dataclass(frozen=True)
class AwaitingFork:
    node: NodeId


@dataclass(frozen=True)
class OverviewOpen:
    resume: "Mode"


@dataclass(frozen=True)
class AnnotationExpanded:
    annotation_id: str
    resume: "Mode"


@dataclass(frozen=True)
class Ended:
    pass


Mode = (
    Playing
    | PausedByUser
    | PausedQuestion
    | PausedQuestionFeedback
    | AwaitingFork
    | OverviewOpen
    | AnnotationExpanded
    | Ended
)

# every mode that freezes the playhead
_PAUSING_MODES = (
    PausedByUser,
    PausedQuestion,
    PausedQuestionFeedback,
    AwaitingFork,
    OverviewOpen,
    AnnotationExpanded,
)

_SEEKABLE_MODES = (
    Playing,
    PausedByUser,
    PausedQuestionFeedback,
    OverviewOpen,
    AnnotationExpanded,
)


def mode_name(mode: Mode) -> str:
    return type(mode).__name__


# ---------------------------------------------------------------------------
# Events


class EventKind(str, Enum):
    SESSION_STARTED = "SessionStarted"
    PLAYBACK_RESUMED = "PlaybackResumed"
    PLAYBACK_PAUSED = "PlaybackPaused"
    SCENE_ENTERED = "SceneEntered"
    QUESTION_PRESENTED = "QuestionPresented"
    QUESTION_ANSWERED = "QuestionAnswered"
    FORK_PRESENTED = "ForkPresented"
    CHOOSE_PATH = "ChoosePath"
    OVERVIEW_OPENED = "OverviewOpened"
    OVERVIEW_NAVIGATED = "OverviewNavigated"
    OVERVIEW_CLOSED = "OverviewClosed"
    ANNOTATIONS_SHOWN = "AnnotationsShown"
    ANNOTATIONS_HIDDEN = "AnnotationsHidden"
    ANNOTATION_EXPANDED = "AnnotationExpanded"
    ANNOTATION_COLLAPSED = "AnnotationCollapsed"
    VIEWER_ANNOTATION_ADDED = "ViewerAnnotationAdded"
    COMMENT_ADDED = "CommentAdded"
    SEEKED = "Seeked"
    SESSION_ENDED = "SessionEnded"


_ENTRY_KINDS = (
    EventKind.SCENE_ENTERED,
    EventKind.QUESTION_PRESENTED,
    EventKind.FORK_PRESENTED,
    EventKind.SESSION_ENDED,
)


@dataclass(frozen=True)
class SessionEvent:
    """One log record; node/offset_ms is the playhead right after the event."""

    seq: int
    wall_time: datetime
    node: NodeId
    offset_ms: int
    kind: EventKind
    payload: dict[str, Any]

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "wall_time": format_rfc3339(self.wall_time),
            "node": self.node,
            "offset_ms": self.offset_ms,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False)


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace(
        "+00:00", "Z"
    )


def parse_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def _clip_to_ms(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(
        microsecond=(dt.microsecond // 1000) * 1000
    )


def event_from_record(record: dict[str, Any]) -> SessionEvent:
    try:
        kind = EventKind(record["kind"])
        seq = record["seq"]
        # sub-millisecond precision would not survive the log round trip
        wall = _clip_to_ms(parse_rfc3339(record["wall_time"]))
        node = record["node"]
        offset = record["offset_ms"]
        payload = record.get("payload", {})
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptLog(record.get("seq"), f"malformed event record: {exc}") from exc
    if not isinstance(seq, int) or not isinstance(offset, int) or not isinstance(node, str):
        raise CorruptLog(record.get("seq"), "malformed event record: bad field types")
    if not isinstance(payload, dict):
        raise CorruptLog(seq, "payload must be an object")
    return SessionEvent(seq, wall, node, offset, kind, payload)


def log_to_bytes(events: Iterable[SessionEvent]) -> bytes:
    return "".join(e.to_line() + "\n" for e in events).encode("utf-8")


def log_from_bytes(data: bytes) -> list[SessionEvent]:
    events = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(None, f"line {lineno}: invalid JSON: {exc.msg}") from exc
        events.append(event_from_record(record))
    return events


# ---------------------------------------------------------------------------
# Viewer inputs


@dataclass(frozen=True)
class Progress:
    """Playback clock tick from the client; only moves the playhead while Playing."""

    offset_ms: int


@dataclass(frozen=True)
class SceneEnd:
    pass


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Play:
    pass


@dataclass(frozen=True)
class Answer:
    chosen_index: int


@dataclass(frozen=True)
class Acknowledge:
    """Dismiss question feedback and continue behind the question."""


@dataclass(frozen=True)
class Choose:
    option_id: str


@dataclass(frozen=True)
class OpenOverview:
    pass


@dataclass(frozen=True)
class CloseOverview:
    pass


@dataclass(frozen=True)
class Navigate:
    node: NodeId


@dataclass(frozen=True)
class ToggleAnnotations:
    pass


@dataclass(frozen=True)
class Expand:
    annotation_id: str


@dataclass(frozen=True)
class Collapse:
    annotation_id: str


@dataclass(frozen=True)
class AddAnnotation:
    title: str
    body: tuple = ()
    start_ms: int | None = None
    end_ms: int | None = None


@dataclass(frozen=True)
class AddComment:
    text: str


@dataclass(frozen=True)
class Seek:
    node: NodeId
    offset_ms: int


ViewerInput = (
    Progress
    | SceneEnd
    | Pause
    | Play
    | Answer
    | Acknowledge
    | Choose
    | OpenOverview
    | CloseOverview
    | Navigate
    | ToggleAnnotations
    | Expand
    | Collapse
    | AddAnnotation
    | AddComment
    | Seek
)


# ---------------------------------------------------------------------------
# Derived records


@dataclass(frozen=True)
class AnswerRecord:
    question: NodeId
    chosen_index: int
    correct: bool
    seq: int


@dataclass(frozen=True)
class Feedback:
    correct_index: int
    chosen_index: int
    correct: bool
    counts_for_metrics: bool


@dataclass(frozen=True)
class ForkChoice:
    seq: int
    fork: NodeId
    option_id: str


@dataclass(frozen=True)
class CommentRecord:
    seq: int
    node: NodeId
    offset_ms: int
    wall_time: str
    text: str


class InteractionClass(str, Enum):
    MANDATORY = "mandatory"
    OPTIONAL = "optional"
    SYSTEM = "system"


@dataclass(frozen=True)
class SessionMetrics:
    correct_answers: int
    questions_available: int
    time_spent_ms: int
    active_time_ms: int
    optional_interactions: int
    branch_paths_seen: int
    comments: int


# ---------------------------------------------------------------------------
# Session state


@dataclass
class SessionState:
    session_id: str
    project_id: str
    viewer_id: str
    mode: Mode
    current_node: NodeId
    playhead_ms: int
    annotations_visible: bool
    answered: dict[NodeId, AnswerRecord]
    fork_choices: list[ForkChoice]
    branch_paths_seen: set[str]
    viewer_annotations: list[Annotation]
    comments: list[CommentRecord]
    next_seq: int
    visited: set[NodeId]
    pending_entry: NodeId | None
    pending_nav: NodeId | None
    started_at: datetime
    last_wall: datetime
    ended_at: datetime | None
    active_ms: int
    optional_count: int
    events: list[SessionEvent] = field(default_factory=list)

    @property
    def forks_taken(self) -> list[tuple[NodeId, str]]:
        return [(c.fork, c.option_id) for c in self.fork_choices]

    def clone(self) -> "SessionState":
        return replace(
            self,
            answered=dict(self.answered),
            fork_choices=list(self.fork_choices),
            branch_paths_seen=set(self.branch_paths_seen),
            viewer_annotations=list(self.viewer_annotations),
            comments=list(self.comments),
            visited=set(self.visited),
            events=list(self.events),
        )

    def metrics(self, project: VideoProject) -> SessionMetrics:
        end = self.ended_at or self.last_wall
        return SessionMetrics(
            correct_answers=sum(1 for r in self.answered.values() if r.correct),
            questions_available=len(project.question_nodes()),
            time_spent_ms=_ms_between(self.started_at, end),
            active_time_ms=self.active_ms,
            optional_interactions=self.optional_count,
            branch_paths_seen=len(self.branch_paths_seen),
            comments=len(self.comments),
        )


def _ms_between(a: datetime, b: datetime) -> int:
    return round((b - a).total_seconds() * 1000)


def annotations_for_node(
    project: VideoProject, state: SessionState, node: NodeId
) -> list[Annotation]:
    pool = list(project.annotations) + state.viewer_annotations
    return [a for a in pool if a.anchor.node == node]


def annotations_at_playhead(project: VideoProject, state: SessionState) -> list[Annotation]:
    return [
        a
        for a in annotations_for_node(project, state, state.current_node)
        if a.anchor.start_ms <= state.playhead_ms <= a.anchor.end_ms
    ]


def can_toggle_annotations(project: VideoProject, state: SessionState) -> bool:
    """The show/hide control is live only where annotations exist (or to hide)."""
    if state.annotations_visible:
        return True
    return bool(annotations_for_node(project, state, state.current_node))


def classify_interaction(event: SessionEvent, context: SessionState) -> InteractionClass:
    """Mandatory / optional / system class of one event.

    `context` is the session state before the event applies; it decides
    whether a path choice was the fork's first (mandatory) or a revisit
    picking an extra variant (optional).
    """
    kind = event.kind
    if kind in (
        EventKind.ANNOTATION_EXPANDED,
        EventKind.OVERVIEW_NAVIGATED,
        EventKind.VIEWER_ANNOTATION_ADDED,
        EventKind.COMMENT_ADDED,
    ):
        return InteractionClass.OPTIONAL
    if kind is EventKind.QUESTION_ANSWERED:
        return InteractionClass.MANDATORY
    if kind is EventKind.CHOOSE_PATH:
        fork = event.payload.get("node")
        already = any(c.fork == fork for c in context.fork_choices)
        return InteractionClass.OPTIONAL if already else InteractionClass.MANDATORY
    return InteractionClass.SYSTEM


# ---------------------------------------------------------------------------
# Reducer: the single authority on which events are legal in which mode


def _node(project: VideoProject, node_id: NodeId) -> Node:
    node = project.nodes.get(node_id)
    if node is None:
        raise IllegalTransition(Playing(), "event", f"unknown node {node_id!r}")
    return node


def _entry_kind_for(node: Node) -> EventKind:
    if isinstance(node, SceneNode):
        return EventKind.SCENE_ENTERED
    if isinstance(node, QuestionNode):
        return EventKind.QUESTION_PRESENTED
    if isinstance(node, ForkNode):
        return EventKind.FORK_PRESENTED
    return EventKind.SESSION_ENDED


def _check_entry_allowed(state: SessionState, project: VideoProject, target: NodeId) -> None:
    if state.pending_entry is not None:
        if target != state.pending_entry:
            raise IllegalTransition(
                state.mode, "entry", f"expected entry of {state.pending_entry!r}"
            )
        return
    mode = state.mode
    if isinstance(mode, Playing):
        current = project.nodes.get(state.current_node)
        if isinstance(current, SceneNode) and current.next == target:
            return
        raise IllegalTransition(mode, "entry", f"{target!r} does not follow the current scene")
    if isinstance(mode, PausedQuestionFeedback):
        question = _node(project, mode.node)
        if isinstance(question, QuestionNode) and question.next == target:
            return
        raise IllegalTransition(mode, "entry", "target is not behind the question")
    if isinstance(mode, PausedQuestion):
        # continue past an already-answered question without re-answering
        question = _node(project, mode.node)
        if (
            mode.node in state.answered
            and isinstance(question, QuestionNode)
            and question.next == target
        ):
            return
        raise IllegalTransition(mode, "entry", "question must be answered first")
    raise IllegalTransition(mode, "entry", "no path to this node here")


def _apply_entry(state: SessionState, event: SessionEvent, project: VideoProject) -> None:
    target = event.node
    node = _node(project, target)
    if event.kind is not _entry_kind_for(node):
        raise IllegalTransition(state.mode, event.kind.value, "event kind does not match node type")
    _check_entry_allowed(state, project, target)
    state.pending_entry = None
    state.visited.add(target)
    state.current_node = target
    state.playhead_ms = 0
    if isinstance(node, SceneNode):
        state.mode = Playing()
    elif isinstance(node, QuestionNode):
        state.mode = PausedQuestion(target)
    elif isinstance(node, ForkNode):
        state.mode = AwaitingFork(target)
    else:
        state.mode = Ended()
        state.ended_at = event.wall_time


def _reduce(state: SessionState, event: SessionEvent, project: VideoProject) -> None:
    """Apply one event in place; raises IllegalTransition when it cannot happen."""
    if event.seq != state.next_seq:
        raise IllegalTransition(state.mode, event.kind.value, f"seq {event.seq} != {state.next_seq}")
    if event.wall_time < state.last_wall:
        raise IllegalTransition(state.mode, event.kind.value, "wall_time went backwards")
    if isinstance(state.mode, Ended):
        raise IllegalTransition(state.mode, event.kind.value, "session already ended")
    if state.pending_nav is not None and event.kind is not EventKind.SEEKED:
        raise IllegalTransition(state.mode, event.kind.value, "seek must follow navigation")
    if state.pending_entry is not None and event.kind not in _ENTRY_KINDS:
        raise IllegalTransition(state.mode, event.kind.value, "node entry pending")

    kind = event.kind
    mode = state.mode

    if kind in _ENTRY_KINDS:
        if event.offset_ms != 0:
            raise IllegalTransition(mode, kind.value, "entry playhead must be 0")
        _apply_entry(state, event, project)
    elif kind is EventKind.SEEKED:
        _reduce_seek(state, event, project)
    else:
        # stationary events happen at the current node
        if event.node != state.current_node:
            raise IllegalTransition(mode, kind.value, "event is not at the current node")
        duration = node_duration_ms(project.nodes[state.current_node])
        if not 0 <= event.offset_ms <= duration:
            raise IllegalTransition(mode, kind.value, "playhead outside the node")
        if isinstance(mode, _PAUSING_MODES):
            if event.offset_ms != state.playhead_ms:
                raise IllegalTransition(mode, kind.value, "playhead moved while paused")
        else:
            state.playhead_ms = event.offset_ms
        _reduce_stationary(state, event, project)

    # active watching time accrues while the mode before the event was Playing
    if isinstance(mode, Playing):
        state.active_ms += _ms_between(state.last_wall, event.wall_time)
    state.last_wall = event.wall_time
    state.next_seq = event.seq + 1
    state.events.append(event)


def _reduce_seek(state: SessionState, event: SessionEvent, project: VideoProject) -> None:
    payload = event.payload
    try:
        from_node = payload["from"]["node"]
        to_node = payload["to"]["node"]
        to_offset = payload["to"]["offset_ms"]
    except (KeyError, TypeError):
        raise IllegalTransition(state.mode, "Seeked", "malformed seek payload")
    if from_node != state.current_node:
        raise IllegalTransition(state.mode, "Seeked", "seek origin is not the current node")
    if event.node != to_node or event.offset_ms != to_offset:
        raise IllegalTransition(state.mode, "Seeked", "event playhead disagrees with payload")
    if state.pending_nav is not None:
        if to_node != state.pending_nav or to_offset != 0:
            raise IllegalTransition(state.mode, "Seeked", "seek target disagrees with navigation")
        state.pending_nav = None
        state.pending_entry = to_node
        state.current_node = to_node
        state.playhead_ms = 0
        return
    if not isinstance(state.mode, _SEEKABLE_MODES):
        raise IllegalTransition(state.mode, "Seeked", "seeking is blocked here")
    target = project.nodes.get(to_node)
    if not isinstance(target, SceneNode):
        raise IllegalTransition(state.mode, "Seeked", "free seeking targets scenes only")
    if to_node not in state.visited:
        raise IllegalTransition(state.mode, "Seeked", "cannot seek into unvisited content")
    if not 0 <= to_offset <= target.duration_ms:
        raise IllegalTransition(state.mode, "Seeked", "seek offset outside the scene")
    state.current_node = to_node
    state.playhead_ms = to_offset


def _reduce_stationary(state: SessionState, event: SessionEvent, project: VideoProject) -> None:
    kind = event.kind
    mode = state.mode

    if kind is EventKind.PLAYBACK_PAUSED:
        if not isinstance(mode, Playing):
            raise IllegalTransition(mode, kind.value, "nothing is playing")
        state.mode = PausedByUser()

    elif kind is EventKind.PLAYBACK_RESUMED:
        if not isinstance(mode, PausedByUser):
            raise IllegalTransition(mode, kind.value, "can only resume a user pause")
        state.mode = Playing()

    elif kind is EventKind.QUESTION_ANSWERED:
        if not isinstance(mode, PausedQuestion) or event.payload.get("node") != mode.node:
            raise IllegalTransition(mode, kind.value, "no question awaiting an answer")
        question = project.nodes[mode.node]
        chosen = event.payload.get("chosen_index")
        if not isinstance(chosen, int) or not 0 <= chosen < len(question.choices):
            raise IllegalTransition(mode, kind.value, "chosen_index out of range")
        if event.payload.get("correct") != (chosen == question.correct_index):
            raise IllegalTransition(mode, kind.value, "correct flag is inconsistent")
        if mode.node not in state.answered:
            state.answered[mode.node] = AnswerRecord(
                mode.node, chosen, chosen == question.correct_index, event.seq
            )
        state.mode = PausedQuestionFeedback(mode.node, chosen)

    elif kind is EventKind.CHOOSE_PATH:
        if not isinstance(mode, AwaitingFork) or event.payload.get("node") != mode.node:
            raise IllegalTransition(mode, kind.value, "no fork awaiting a choice")
        fork = project.nodes[mode.node]
        option = next(
            (o for o in fork.options if o.option_id == event.payload.get("option_id")), None
        )
        if option is None:
            raise IllegalTransition(mode, kind.value, "unknown option")
        if classify_interaction(event, state) is InteractionClass.OPTIONAL:
            state.optional_count += 1
        state.fork_choices.append(ForkChoice(event.seq, mode.node, option.option_id))
        state.branch_paths_seen.add(option.option_id)
        state.pending_entry = option.target

    elif kind is EventKind.OVERVIEW_OPENED:
        if not isinstance(mode, (Playing, PausedByUser)):
            raise IllegalTransition(mode, kind.value, "overview is blocked here")
        state.mode = OverviewOpen(resume=mode)

    elif kind is EventKind.OVERVIEW_CLOSED:
        if not isinstance(mode, OverviewOpen):
            raise IllegalTransition(mode, kind.value, "overview is not open")
        state.mode = mode.resume

    elif kind is EventKind.OVERVIEW_NAVIGATED:
        if not isinstance(mode, OverviewOpen):
            raise IllegalTransition(mode, kind.value, "overview is not open")
        target = event.payload.get("target")
        nav_nodes = {p.node for p in navigation_points(project)}
        if target not in nav_nodes:
            raise IllegalTransition(mode, kind.value, "target is not a navigation point")
        if target not in state.visited:
            raise IllegalTransition(mode, kind.value, "cannot jump into unvisited content")
        state.optional_count += 1
        state.pending_nav = target

    elif kind is EventKind.ANNOTATIONS_SHOWN:
        if not isinstance(mode, Playing):
            raise IllegalTransition(mode, kind.value, "toggle only while playing")
        if state.annotations_visible:
            raise IllegalTransition(mode, kind.value, "annotations already visible")
        if not annotations_for_node(project, state, state.current_node):
            raise IllegalTransition(mode, kind.value, "no annotations here; control disabled")
        state.annotations_visible = True

    elif kind is EventKind.ANNOTATIONS_HIDDEN:
        if not isinstance(mode, Playing):
            raise IllegalTransition(mode, kind.value, "toggle only while playing")
        if not state.annotations_visible:
            raise IllegalTransition(mode, kind.value, "annotations already hidden")
        state.annotations_visible = False

    elif kind is EventKind.ANNOTATION_EXPANDED:
        if not isinstance(mode, (Playing, PausedByUser)):
            raise IllegalTransition(mode, kind.value, "expanding is blocked here")
        if not state.annotations_visible:
            raise IllegalTransition(mode, kind.value, "annotation boxes are hidden")
        wanted = event.payload.get("annotation_id")
        box = next(
            (a for a in annotations_at_playhead(project, state) if a.annotation_id == wanted),
            None,
        )
        if box is None:
            raise IllegalTransition(mode, kind.value, "annotation is not on screen")
        state.optional_count += 1
        state.mode = AnnotationExpanded(annotation_id=wanted, resume=mode)

    elif kind is EventKind.ANNOTATION_COLLAPSED:
        if (
            not isinstance(mode, AnnotationExpanded)
            or event.payload.get("annotation_id") != mode.annotation_id
        ):
            raise IllegalTransition(mode, kind.value, "this annotation is not expanded")
        state.mode = mode.resume

    elif kind is EventKind.VIEWER_ANNOTATION_ADDED:
        if not isinstance(mode, (Playing, PausedByUser)):
            raise IllegalTransition(mode, kind.value, "composing is blocked here")
        annotation = _annotation_from_payload(event.payload)
        if annotation.author_kind is not AuthorKind.VIEWER:
            raise IllegalTransition(mode, kind.value, "author_kind must be viewer")
        if annotation.anchor.node != state.current_node:
            raise IllegalTransition(mode, kind.value, "annotation must anchor to the current node")
        duration = node_duration_ms(project.nodes[state.current_node])
        anchor = annotation.anchor
        if not 0 <= anchor.start_ms <= anchor.end_ms <= duration:
            raise IllegalTransition(mode, kind.value, "anchor range outside the node")
        taken = {a.annotation_id for a in project.annotations} | {
            a.annotation_id for a in state.viewer_annotations
        }
        if annotation.annotation_id in taken or not annotation.title:
            raise IllegalTransition(mode, kind.value, "bad annotation id or title")
        state.optional_count += 1
        state.viewer_annotations.append(annotation)

    elif kind is EventKind.COMMENT_ADDED:
        if not isinstance(mode, (Playing, PausedByUser)):
            raise IllegalTransition(mode, kind.value, "commenting is blocked here")
        text = event.payload.get("text")
        if not isinstance(text, str) or not text:
            raise IllegalTransition(mode, kind.value, "empty comment")
        state.optional_count += 1
        state.comments.append(
            CommentRecord(
                event.seq,
                event.node,
                event.offset_ms,
                format_rfc3339(event.wall_time),
                text,
            )
        )

    elif kind is EventKind.SESSION_STARTED:
        raise IllegalTransition(mode, kind.value, "session already started")

    else:  # pragma: no cover - enum is closed
        raise IllegalTransition(mode, kind.value, "unhandled event kind")


def _annotation_from_payload(payload: dict[str, Any]) -> Annotation:
    raw = payload.get("annotation")
    if not isinstance(raw, dict):
        raise IllegalTransition(Playing(), "ViewerAnnotationAdded", "missing annotation payload")
    try:
        return annotation_from_entry(raw)
    except ProjectSyntaxError as exc:
        raise IllegalTransition(Playing(), "ViewerAnnotationAdded", f"bad annotation: {exc}")


# ---------------------------------------------------------------------------
# Input handling


def start_session(
    project: VideoProject,
    viewer_id: str,
    clock: Clock,
    session_id: str | None = None,
) -> SessionState:
    """Open a fresh session at the project's start node.

    Emits SessionStarted plus the entry event for the start node; the state's
    `events` list carries everything that must be persisted.
    """
    report = validate_graph(project)
    if not report.ok:
        raise InvalidProject(report)
    if session_id is None:
        session_id = f"s-{uuid.uuid4().hex[:12]}"
    now = _clip_to_ms(clock())
    state = SessionState(
        session_id=session_id,
        project_id=project.id,
        viewer_id=viewer_id,
        mode=Playing(),
        current_node=project.start_node,
        playhead_ms=0,
        annotations_visible=False,
        answered={},
        fork_choices=[],
        branch_paths_seen=set(),
        viewer_annotations=[],
        comments=[],
        next_seq=0,
        visited=set(),
        pending_entry=project.start_node,
        pending_nav=None,
        started_at=now,
        last_wall=now,
        ended_at=None,
        active_ms=0,
        optional_count=0,
        events=[],
    )
    started = SessionEvent(
        seq=0,
        wall_time=now,
        node=project.start_node,
        offset_ms=0,
        kind=EventKind.SESSION_STARTED,
        payload={
            "session_id": session_id,
            "project_id": project.id,
            "viewer_id": viewer_id,
        },
    )
    # SessionStarted is the one event the reducer does not accept mid-log
    state.next_seq = 1
    state.events.append(started)
    entry_node = project.nodes[project.start_node]
    entry = SessionEvent(
        seq=1,
        wall_time=now,
        node=project.start_node,
        offset_ms=0,
        kind=_entry_kind_for(entry_node),
        payload={"node": project.start_node},
    )
    _reduce(state, entry, project)
    return state


def apply_event(
    state: SessionState, input: ViewerInput, clock: Clock, project: VideoProject
) -> tuple[SessionState, list[SessionEvent]]:
    """Translate a viewer input into events and advance a copy of the state.

    The original state is never touched; on IllegalTransition nothing changes.
    """
    if isinstance(state.mode, Ended):
        raise IllegalTransition(state.mode, type(input).__name__, "session has ended")

    new = state.clone()
    now = max(_clip_to_ms(clock()), state.last_wall)
    emitted: list[SessionEvent] = []

    def emit(kind: EventKind, payload: dict[str, Any], node: NodeId, offset: int) -> None:
        event = SessionEvent(new.next_seq, now, node, offset, kind, payload)
        _reduce(new, event, project)
        emitted.append(event)

    def here(kind: EventKind, payload: dict[str, Any]) -> None:
        emit(kind, payload, new.current_node, new.playhead_ms)

    def enter(target: NodeId) -> None:
        node = project.nodes.get(target)
        if node is None:
            raise IllegalTransition(new.mode, "entry", f"unknown node {target!r}")
        emit(_entry_kind_for(node), {"node": target}, target, 0)

    mode = new.mode

    if isinstance(input, Progress):
        if isinstance(mode, Playing):
            duration = node_duration_ms(project.nodes[new.current_node])
            new.playhead_ms = max(0, min(input.offset_ms, duration))
        # paused modes swallow clock ticks: the playhead must not move
        return new, emitted

    if isinstance(input, SceneEnd):
        current = project.nodes.get(new.current_node)
        if not isinstance(mode, Playing) or not isinstance(current, SceneNode):
            raise IllegalTransition(mode, "SceneEnd")
        new.playhead_ms = current.duration_ms
        enter(current.next)

    elif isinstance(input, Pause):
        here(EventKind.PLAYBACK_PAUSED, {})

    elif isinstance(input, Play):
        here(EventKind.PLAYBACK_RESUMED, {})

    elif isinstance(input, Answer):
        if not isinstance(mode, PausedQuestion):
            raise IllegalTransition(mode, "Answer")
        question = project.nodes[mode.node]
        if not 0 <= input.chosen_index < len(question.choices):
            raise IllegalTransition(mode, "Answer", "chosen_index out of range")
        here(
            EventKind.QUESTION_ANSWERED,
            {
                "node": mode.node,
                "chosen_index": input.chosen_index,
                "correct": input.chosen_index == question.correct_index,
            },
        )

    elif isinstance(input, Acknowledge):
        if isinstance(mode, PausedQuestionFeedback):
            enter(project.nodes[mode.node].next)
        elif isinstance(mode, PausedQuestion) and mode.node in new.answered:
            enter(project.nodes[mode.node].next)
        else:
            raise IllegalTransition(mode, "Acknowledge")

    elif isinstance(input, Choose):
        if not isinstance(mode, AwaitingFork):
            raise IllegalTransition(mode, "Choose")
        fork = project.nodes[mode.node]
        option = next((o for o in fork.options if o.option_id == input.option_id), None)
        if option is None:
            raise IllegalTransition(mode, "Choose", f"unknown option {input.option_id!r}")
        here(EventKind.CHOOSE_PATH, {"node": mode.node, "option_id": option.option_id})
        enter(option.target)

    elif isinstance(input, OpenOverview):
        here(EventKind.OVERVIEW_OPENED, {})

    elif isinstance(input, CloseOverview):
        here(EventKind.OVERVIEW_CLOSED, {})

    elif isinstance(input, Navigate):
        here(EventKind.OVERVIEW_NAVIGATED, {"target": input.node})
        emit(
            EventKind.SEEKED,
            {
                "from": {"node": state.current_node, "offset_ms": state.playhead_ms},
                "to": {"node": input.node, "offset_ms": 0},
            },
            input.node,
            0,
        )
        enter(input.node)

    elif isinstance(input, ToggleAnnotations):
        if new.annotations_visible:
            here(EventKind.ANNOTATIONS_HIDDEN, {})
        else:
            here(EventKind.ANNOTATIONS_SHOWN, {})

    elif isinstance(input, Expand):
        here(EventKind.ANNOTATION_EXPANDED, {"annotation_id": input.annotation_id})

    elif isinstance(input, Collapse):
        here(EventKind.ANNOTATION_COLLAPSED, {"annotation_id": input.annotation_id})

    elif isinstance(input, AddAnnotation):
        start = new.playhead_ms if input.start_ms is None else input.start_ms
        end = new.playhead_ms if input.end_ms is None else input.end_ms
        annotation = Annotation(
            annotation_id=f"va-{new.session_id}-{new.next_seq}",
            author_kind=AuthorKind.VIEWER,
            anchor=AnchorRange(new.current_node, start, end),
            title=input.title,
            body=tuple(input.body),
            created_at=format_rfc3339(now),
        )
        here(
            EventKind.VIEWER_ANNOTATION_ADDED,
            {"annotation": annotation_to_entry(annotation)},
        )

    elif isinstance(input, AddComment):
        here(EventKind.COMMENT_ADDED, {"text": input.text})

    elif isinstance(input, Seek):
        emit(
            EventKind.SEEKED,
            {
                "from": {"node": state.current_node, "offset_ms": state.playhead_ms},
                "to": {"node": input.node, "offset_ms": input.offset_ms},
            },
            input.node,
            input.offset_ms,
        )

    else:  # pragma: no cover - union is closed
        raise IllegalTransition(mode, type(input).__name__, "unknown input")

    return new, emitted


def answer_question(
    state: SessionState, chosen_index: int, clock: Clock, project: VideoProject
) -> tuple[SessionState, Feedback]:
    """Answer the pending question; only the first answer per question counts."""
    if not isinstance(state.mode, PausedQuestion):
        raise IllegalTransition(state.mode, "Answer")
    question = project.nodes[state.mode.node]
    first = state.mode.node not in state.answered
    new, _ = apply_event(state, Answer(chosen_index), clock, project)
    return new, Feedback(
        correct_index=question.correct_index,
        chosen_index=chosen_index,
        correct=chosen_index == question.correct_index,
        counts_for_metrics=first,
    )


# ---------------------------------------------------------------------------
# Replay and metrics


def replay(events: list[SessionEvent], project: VideoProject) -> SessionState:
    """Fold a persisted log back into a state; rejects anything the engine
    could not have produced (gaps, backwards clocks, illegal transitions)."""
    if not events:
        raise CorruptLog(None, "empty log")
    head = events[0]
    if head.kind is not EventKind.SESSION_STARTED or head.seq != 0:
        raise CorruptLog(head.seq, "log must begin with SessionStarted at seq 0")
    payload = head.payload
    if payload.get("project_id") != project.id:
        raise CorruptLog(0, f"log belongs to project {payload.get('project_id')!r}")
    if head.node != project.start_node or head.offset_ms != 0:
        raise CorruptLog(0, "start event is not at the start node")
    state = SessionState(
        session_id=str(payload.get("session_id", "")),
        project_id=project.id,
        viewer_id=str(payload.get("viewer_id", "")),
        mode=Playing(),
        current_node=project.start_node,
        playhead_ms=0,
        annotations_visible=False,
        answered={},
        fork_choices=[],
        branch_paths_seen=set(),
        viewer_annotations=[],
        comments=[],
        next_seq=1,
        visited=set(),
        pending_entry=project.start_node,
        pending_nav=None,
        started_at=head.wall_time,
        last_wall=head.wall_time,
        ended_at=None,
        active_ms=0,
        optional_count=0,
        events=[head],
    )
    for event in events[1:]:
        if event.seq != state.next_seq:
            raise CorruptLog(event.seq, f"sequence gap: expected {state.next_seq}")
        try:
            _reduce(state, event, project)
        except IllegalTransition as exc:
            raise CorruptLog(event.seq, str(exc)) from exc
    return state


def session_metrics(events: list[SessionEvent], project: VideoProject) -> SessionMetrics:
    """Per-session dependent variables, computed by replaying the log."""
    return replay(events, project).metrics(project)
