"""HTTP service: projects, media, session lifecycle, event ingestion, exports.

Persistence is plain files under one data directory: projects as .vvp
documents, each session as an append-only .vvlog, media under media/. The
log is the source of truth; every started session is rebuilt by replay on
startup, so a restart followed by replay reproduces identical snapshots.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from . import analytics
from .graph import (
    BodyItem,
    BodyType,
    QuestionNode,
    SceneNode,
    VideoProject,
    navigation_points,
    node_duration_ms,
)
from .project_io import (
    PROJECT_FILE_EXTENSION,
    ProjectSyntaxError,
    UnsupportedVersion,
    parse_project,
    project_to_document,
)
from .session import (
    LOG_FILE_EXTENSION,
    AddAnnotation,
    AnnotationExpanded,
    AwaitingFork,
    CorruptLog,
    Ended,
    EventKind,
    IllegalTransition,
    InvalidProject,
    OverviewOpen,
    PausedQuestion,
    PausedQuestionFeedback,
    SessionState,
    _reduce,
    annotations_at_playhead,
    apply_event,
    can_toggle_annotations,
    event_from_record,
    log_from_bytes,
    mode_name,
    replay,
    start_session,
    utc_now,
)


class StoredSession:
    """One session's in-memory mirror plus its append-only log file."""

    def __init__(self, state: SessionState, path: Path):
        self.state = state
        self.path = path
        self.lock = threading.Lock()

    @property
    def ended(self) -> bool:
        return isinstance(self.state.mode, Ended)

    def append_durably(self, lines: list[str]) -> None:
        with open(self.path, "a", encoding="utf-8") as handle:
            for line in lines:
                handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())


class Store:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.projects: dict[str, VideoProject] = {}
        self.sessions: dict[str, StoredSession] = {}
        self.create_lock = threading.Lock()
        self.load()

    def load(self) -> None:
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        for path in sorted(self.data_dir.glob(f"*{PROJECT_FILE_EXTENSION}")):
            try:
                project = parse_project(path.read_bytes())
            except (ProjectSyntaxError, UnsupportedVersion):
                continue
            self.projects[project.id] = project
        for path in sorted(self.sessions_dir.glob(f"*{LOG_FILE_EXTENSION}")):
            try:
                events = log_from_bytes(path.read_bytes())
                if not events:
                    continue
                project = self.projects.get(events[0].payload.get("project_id", ""))
                if project is None:
                    continue
                state = replay(events, project)
            except CorruptLog:
                continue
            self.sessions[state.session_id] = StoredSession(state, path)

    def project_or_404(self, project_id: str) -> VideoProject:
        project = self.projects.get(project_id)
        if project is None:
            raise HTTPException(status_code=404, detail=f"unknown project {project_id!r}")
        return project

    def session_or_404(self, session_id: str) -> StoredSession:
        stored = self.sessions.get(session_id)
        if stored is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return stored

    def session_logs_for(self, project_id: str):
        return [
            s.state.events
            for s in sorted(self.sessions.values(), key=lambda s: s.state.session_id)
            if s.state.project_id == project_id
        ]


def _redacted_project_document(project: VideoProject) -> dict:
    """Project document for players: question solutions stripped."""
    doc = project_to_document(project)
    for node in doc["nodes"]:
        node.pop("correct_index", None)
    return doc


def _question_payload(project: VideoProject, state: SessionState, node_id: str) -> dict:
    question = project.nodes[node_id]
    payload = {
        "node": node_id,
        "prompt": question.prompt,
        "choices": list(question.choices),
    }
    record = state.answered.get(node_id)
    if record is not None:
        # feedback is only revealed once this session has answered
        payload["answered"] = {
            "chosen_index": record.chosen_index,
            "correct": record.correct,
            "correct_index": question.correct_index,
        }
    return payload


def _fork_payload(project: VideoProject, node_id: str) -> dict:
    fork = project.nodes[node_id]
    return {
        "node": node_id,
        "prompt": fork.prompt,
        "options": [{"option_id": o.option_id, "label": o.label} for o in fork.options],
    }


def snapshot_document(project: VideoProject, state: SessionState) -> dict:
    mode = state.mode
    current = project.nodes[state.current_node]
    snapshot: dict = {
        "session_id": state.session_id,
        "project_id": state.project_id,
        "viewer_id": state.viewer_id,
        "status": "ended" if isinstance(mode, Ended) else "active",
        "head_seq": state.next_seq - 1,
        "mode": mode_name(mode),
        "current_node": state.current_node,
        "playhead_ms": state.playhead_ms,
        "node_duration_ms": node_duration_ms(current),
        "annotations_visible": state.annotations_visible,
        "can_toggle_annotations": can_toggle_annotations(project, state),
        "answered": {
            node_id: {
                "chosen_index": r.chosen_index,
                "correct": r.correct,
                "correct_index": project.nodes[node_id].correct_index,
            }
            for node_id, r in sorted(state.answered.items())
        },
        "fork_choices": [
            {"fork": c.fork, "option_id": c.option_id, "seq": c.seq}
            for c in state.fork_choices
        ],
        "branch_paths_seen": sorted(state.branch_paths_seen),
        "visited": sorted(state.visited),
        "annotations_at_playhead": [
            {"annotation_id": a.annotation_id, "title": a.title, "author_kind": a.author_kind.value}
            for a in annotations_at_playhead(project, state)
        ],
    }
    if isinstance(current, SceneNode):
        snapshot["media"] = {
            "media_id": current.media,
            "duration_ms": current.duration_ms,
            "title": current.title,
        }
    if isinstance(mode, PausedQuestion):
        snapshot["question"] = _question_payload(project, state, mode.node)
    elif isinstance(mode, PausedQuestionFeedback):
        payload = _question_payload(project, state, mode.node)
        payload["feedback"] = {
            "chosen_index": mode.chosen_index,
            "correct": mode.chosen_index == project.nodes[mode.node].correct_index,
            "correct_index": project.nodes[mode.node].correct_index,
        }
        snapshot["question"] = payload
    elif isinstance(mode, AwaitingFork):
        snapshot["fork"] = _fork_payload(project, mode.node)
    elif isinstance(mode, AnnotationExpanded):
        snapshot["expanded_annotation"] = mode.annotation_id
        snapshot["resume_mode"] = mode_name(mode.resume)
    elif isinstance(mode, OverviewOpen):
        snapshot["resume_mode"] = mode_name(mode.resume)
    return snapshot


def _navigation_document(project: VideoProject) -> list[dict]:
    return [
        {
            "node": p.node,
            "timeline_position_ms": p.timeline_position_ms,
            "title": p.title,
            "category": p.category.value,
        }
        for p in navigation_points(project)
    ]


def create_app(data_dir: str | Path) -> FastAPI:
    store = Store(Path(data_dir))
    app = FastAPI(title="vvp server")
    app.state.store = store

    @app.get("/api/projects")
    def list_projects():
        return [
            {"id": p.id, "title": p.title, "questions": len(p.question_nodes())}
            for p in sorted(store.projects.values(), key=lambda p: p.id)
        ]

    @app.get("/api/projects/{project_id}")
    def get_project(project_id: str):
        return _redacted_project_document(store.project_or_404(project_id))

    @app.get("/api/projects/{project_id}/navigation")
    def get_navigation(project_id: str):
        return _navigation_document(store.project_or_404(project_id))

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict):
        project_id = body.get("project_id")
        viewer_id = body.get("viewer_id")
        if not isinstance(project_id, str) or not isinstance(viewer_id, str) or not viewer_id:
            raise HTTPException(status_code=422, detail="project_id and viewer_id required")
        project = store.project_or_404(project_id)
        with store.create_lock:
            try:
                state = start_session(project, viewer_id, utc_now)
            except InvalidProject as exc:
                raise HTTPException(status_code=422, detail=f"project not playable: {exc}")
            stored = StoredSession(state, store.sessions_dir / f"{state.session_id}{LOG_FILE_EXTENSION}")
            stored.append_durably([e.to_line() for e in state.events])
            store.sessions[state.session_id] = stored
        return {"session_id": state.session_id, "head_seq": state.next_seq - 1}

    @app.get("/api/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str):
        stored = store.session_or_404(session_id)
        with stored.lock:
            project = store.project_or_404(stored.state.project_id)
            return snapshot_document(project, stored.state)

    @app.post("/api/sessions/{session_id}/events")
    def ingest_event(session_id: str, body: dict):
        stored = store.session_or_404(session_id)
        project = store.project_or_404(stored.state.project_id)
        with stored.lock:
            state = stored.state
            if isinstance(state.mode, Ended):
                raise HTTPException(status_code=410, detail="session has ended")
            try:
                event = event_from_record(body)
            except CorruptLog as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            if event.kind is EventKind.SESSION_STARTED:
                raise HTTPException(status_code=422, detail="session already started")
            if event.seq != state.next_seq:
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": "SequenceConflict",
                        "head_seq": state.next_seq - 1,
                    },
                )
            # server normalizations: clocks never run backwards, and the
            # solution flag is decided here, not by the client
            if event.wall_time < state.last_wall:
                event = type(event)(
                    event.seq, state.last_wall, event.node, event.offset_ms,
                    event.kind, event.payload,
                )
            feedback = None
            if event.kind is EventKind.QUESTION_ANSWERED:
                node = project.nodes.get(event.payload.get("node", ""))
                chosen = event.payload.get("chosen_index")
                if isinstance(node, QuestionNode) and isinstance(chosen, int):
                    correct = chosen == node.correct_index
                    payload = dict(event.payload)
                    payload["correct"] = correct
                    event = type(event)(
                        event.seq, event.wall_time, event.node, event.offset_ms,
                        event.kind, payload,
                    )
                    feedback = {
                        "chosen_index": chosen,
                        "correct": correct,
                        "correct_index": node.correct_index,
                        "counts_for_metrics": event.payload["node"] not in state.answered,
                    }
            working = state.clone()
            try:
                _reduce(working, event, project)
            except IllegalTransition as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            stored.append_durably([event.to_line()])
            stored.state = working
            ack: dict = {"seq": event.seq}
            if feedback is not None:
                ack["feedback"] = feedback
            return ack

    @app.post("/api/sessions/{session_id}/annotations")
    def add_annotation(session_id: str, body: dict):
        stored = store.session_or_404(session_id)
        project = store.project_or_404(stored.state.project_id)
        title = body.get("title")
        if not isinstance(title, str) or not title:
            raise HTTPException(status_code=422, detail="title required")
        items = []
        for raw in body.get("body", []):
            try:
                items.append(BodyItem(BodyType(raw["type"]), str(raw["value"])))
            except (KeyError, TypeError, ValueError):
                raise HTTPException(status_code=422, detail="malformed body item")
        with stored.lock:
            if isinstance(stored.state.mode, Ended):
                raise HTTPException(status_code=410, detail="session has ended")
            input = AddAnnotation(
                title=title,
                body=tuple(items),
                start_ms=body.get("start_ms"),
                end_ms=body.get("end_ms"),
            )
            try:
                new_state, events = apply_event(stored.state, input, utc_now, project)
            except IllegalTransition as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            stored.append_durably([e.to_line() for e in events])
            stored.state = new_state
            return {
                "seq": events[-1].seq,
                "annotation_id": new_state.viewer_annotations[-1].annotation_id,
            }

    @app.get("/api/sessions/{session_id}/export")
    def export_session(session_id: str):
        stored = store.session_or_404(session_id)
        with stored.lock:
            text = stored.path.read_text(encoding="utf-8")
        return PlainTextResponse(
            text,
            media_type="application/x-ndjson",
            headers={
                "Content-Disposition": f'attachment; filename="{session_id}{LOG_FILE_EXTENSION}"'
            },
        )

    @app.get("/api/projects/{project_id}/export")
    def export_project(project_id: str):
        project = store.project_or_404(project_id)
        logs = store.session_logs_for(project_id)
        try:
            bundle = analytics.export_bundle(logs, project)
        except CorruptLog as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return Response(
            content=bundle,
            media_type="application/json",
            headers={
                "Content-Disposition": f'attachment; filename="{project_id}{analytics.BUNDLE_FILE_EXTENSION}"'
            },
        )

    @app.get("/api/projects/{project_id}/analytics/consensus")
    def consensus(project_id: str):
        project = store.project_or_404(project_id)
        logs = store.session_logs_for(project_id)
        try:
            report = analytics.fork_consensus(project, logs)
        except CorruptLog as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return analytics.consensus_to_document(report)

    @app.get("/media/{media_id}")
    def get_media(media_id: str, request: Request):
        for project in store.projects.values():
            descriptor = project.media_assets.get(media_id)
            if descriptor is None:
                continue
            path = (store.data_dir / descriptor.uri).resolve()
            if not str(path).startswith(str(store.data_dir.resolve())):
                raise HTTPException(status_code=404, detail="media path escapes data dir")
            if not path.is_file():
                raise HTTPException(status_code=404, detail="media file missing")
            data = path.read_bytes()
            mime = descriptor.mime_hint or "application/octet-stream"
            range_header = request.headers.get("range")
            if range_header and range_header.startswith("bytes="):
                spec = range_header[len("bytes=") :].split("-", 1)
                try:
                    start = int(spec[0]) if spec[0] else 0
                    end = int(spec[1]) if len(spec) > 1 and spec[1] else len(data) - 1
                except ValueError:
                    raise HTTPException(status_code=416, detail="bad range")
                end = min(end, len(data) - 1)
                if start > end or start >= len(data):
                    raise HTTPException(status_code=416, detail="range out of bounds")
                chunk = data[start : end + 1]
                return Response(
                    content=chunk,
                    status_code=206,
                    media_type=mime,
                    headers={
                        "Content-Range": f"bytes {start}-{end}/{len(data)}",
                        "Accept-Ranges": "bytes",
                    },
                )
            return Response(
                content=data,
                media_type=mime,
                headers={"Accept-Ranges": "bytes"},
            )
        raise HTTPException(status_code=404, detail=f"unknown media {media_id!r}")

    return app
