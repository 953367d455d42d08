"""Reading and writing .vvp project documents (canonical JSON trees)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any
from urllib.parse import urlparse

from .graph import (
    AnchorRange,
    Annotation,
    AuthorKind,
    BodyItem,
    BodyType,
    EndNode,
    ForkNode,
    ForkOption,
    MediaDescriptor,
    Node,
    QuestionNode,
    SceneNode,
    ValidationIssue,
    ValidationReport,
    IssueCode,
    VideoProject,
    validate_graph,
)

SUPPORTED_FORMAT_VERSION = 1
PROJECT_FILE_EXTENSION = ".vvp"


class ProjectSyntaxError(Exception):
    """Malformed project document: bad bytes, bad JSON, or schema violation."""

    def __init__(self, message: str, position: str = ""):
        self.position = position
        self.message = message
        super().__init__(f"{position}: {message}" if position else message)


class UnsupportedVersion(Exception):
    def __init__(self, version: Any):
        self.version = version
        super().__init__(f"unsupported format_version {version!r}")


class _Schema:
    """Hand-rolled tree walker; strict by default, lenient collects warnings."""

    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.unknown: list[str] = []

    def fail(self, path: str, message: str) -> ProjectSyntaxError:
        return ProjectSyntaxError(message, position=path)

    def obj(self, value: Any, path: str, required: dict, optional: dict | None = None) -> dict:
        optional = optional or {}
        if not isinstance(value, dict):
            raise self.fail(path, "expected an object")
        for key in value:
            if key not in required and key not in optional:
                if self.lenient:
                    self.unknown.append(f"{path}.{key}")
                else:
                    raise self.fail(path, f"unknown field {key!r}")
        out = {}
        for key, kind in required.items():
            if key not in value:
                raise self.fail(path, f"missing field {key!r}")
            out[key] = self.typed(value[key], f"{path}.{key}", kind)
        for key, kind in optional.items():
            if key in value:
                out[key] = self.typed(value[key], f"{path}.{key}", kind)
        return out

    def typed(self, value: Any, path: str, kind: str) -> Any:
        if kind == "str":
            if not isinstance(value, str):
                raise self.fail(path, "expected a string")
        elif kind == "text":
            if not isinstance(value, str) or not value:
                raise self.fail(path, "expected a non-empty string")
        elif kind == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                raise self.fail(path, "expected an integer")
        elif kind == "posint":
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise self.fail(path, "expected a positive integer")
        elif kind == "nonneg":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise self.fail(path, "expected a non-negative integer")
        elif kind == "bool":
            if not isinstance(value, bool):
                raise self.fail(path, "expected a boolean")
        elif kind == "list":
            if not isinstance(value, list):
                raise self.fail(path, "expected a list")
        elif kind == "any":
            pass
        else:  # pragma: no cover - schema table typo guard
            raise AssertionError(kind)
        return value


def _parse_node(schema: _Schema, entry: Any, path: str, media_durations: dict[str, int]) -> Node:
    head = schema.obj(
        entry,
        path,
        required={"node_id": "text", "kind": "text"},
        optional={
            "media": "text",
            "title": "str",
            "nav_point": "bool",
            "next": "text",
            "prompt": "str",
            "options": "list",
            "choices": "list",
            "correct_index": "nonneg",
        },
    )
    kind = head["kind"]
    node_id = head["node_id"]
    if kind == "scene":
        fields = schema.obj(
            entry,
            path,
            required={
                "node_id": "text",
                "kind": "text",
                "media": "text",
                "title": "str",
                "nav_point": "bool",
                "next": "text",
            },
        )
        return SceneNode(
            node_id=node_id,
            media=fields["media"],
            duration_ms=media_durations.get(fields["media"], 0),
            title=fields["title"],
            next=fields["next"],
            is_nav_point=fields["nav_point"],
        )
    if kind == "fork":
        fields = schema.obj(
            entry,
            path,
            required={
                "node_id": "text",
                "kind": "text",
                "prompt": "str",
                "nav_point": "bool",
                "options": "list",
            },
        )
        options = []
        for i, raw in enumerate(fields["options"]):
            opt = schema.obj(
                raw,
                f"{path}.options[{i}]",
                required={"option_id": "text", "label": "str", "target": "text"},
            )
            options.append(ForkOption(opt["option_id"], opt["label"], opt["target"]))
        return ForkNode(
            node_id=node_id,
            prompt=fields["prompt"],
            options=tuple(options),
            is_nav_point=fields["nav_point"],
        )
    if kind == "question":
        fields = schema.obj(
            entry,
            path,
            required={
                "node_id": "text",
                "kind": "text",
                "prompt": "str",
                "choices": "list",
                "correct_index": "nonneg",
                "nav_point": "bool",
                "next": "text",
            },
        )
        choices = []
        for i, choice in enumerate(fields["choices"]):
            choices.append(schema.typed(choice, f"{path}.choices[{i}]", "text"))
        return QuestionNode(
            node_id=node_id,
            prompt=fields["prompt"],
            choices=tuple(choices),
            correct_index=fields["correct_index"],
            next=fields["next"],
            is_nav_point=fields["nav_point"],
        )
    if kind == "end":
        schema.obj(entry, path, required={"node_id": "text", "kind": "text"})
        return EndNode(node_id=node_id)
    raise schema.fail(f"{path}.kind", f"unknown node kind {kind!r}")


def parse_annotation(schema: _Schema, entry: Any, path: str) -> Annotation:
    fields = schema.obj(
        entry,
        path,
        required={
            "annotation_id": "text",
            "author_kind": "text",
            "anchor": "any",
            "title": "str",
            "body": "list",
        },
        optional={"created_at": "text"},
    )
    if fields["author_kind"] not in (AuthorKind.CREATOR.value, AuthorKind.VIEWER.value):
        raise schema.fail(f"{path}.author_kind", f"unknown author_kind {fields['author_kind']!r}")
    anchor = schema.obj(
        fields["anchor"],
        f"{path}.anchor",
        required={"node": "text", "start_ms": "nonneg", "end_ms": "nonneg"},
    )
    body = []
    for i, raw in enumerate(fields["body"]):
        item = schema.obj(
            raw, f"{path}.body[{i}]", required={"type": "text", "value": "str"}
        )
        try:
            body_type = BodyType(item["type"])
        except ValueError:
            raise schema.fail(f"{path}.body[{i}].type", f"unknown body type {item['type']!r}")
        body.append(BodyItem(body_type, item["value"]))
    return Annotation(
        annotation_id=fields["annotation_id"],
        author_kind=AuthorKind(fields["author_kind"]),
        anchor=AnchorRange(anchor["node"], anchor["start_ms"], anchor["end_ms"]),
        title=fields["title"],
        body=tuple(body),
        created_at=fields.get("created_at"),
    )


def parse_project(data: bytes, *, lenient: bool = False) -> VideoProject:
    """Parse a .vvp document into a VideoProject.

    Graph-level problems (dangling targets, bad indices, ...) do not fail the
    parse; they land in the attached validation report. Only malformed bytes,
    malformed JSON, schema violations and unknown format versions raise.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProjectSyntaxError(f"not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProjectSyntaxError(exc.msg, position=f"line {exc.lineno} col {exc.colno}") from exc

    schema = _Schema(lenient=lenient)
    top = schema.obj(
        doc,
        "$",
        required={
            "format_version": "int",
            "id": "text",
            "title": "str",
            "start_node": "text",
            "media": "list",
            "nodes": "list",
            "annotations": "list",
        },
    )
    if top["format_version"] != SUPPORTED_FORMAT_VERSION:
        raise UnsupportedVersion(top["format_version"])

    media_assets: dict[str, MediaDescriptor] = {}
    for i, raw in enumerate(top["media"]):
        fields = schema.obj(
            raw,
            f"$.media[{i}]",
            required={
                "media_id": "text",
                "uri": "text",
                "duration_ms": "posint",
                "mime_hint": "str",
            },
        )
        if fields["media_id"] in media_assets:
            raise schema.fail(f"$.media[{i}]", f"duplicate media_id {fields['media_id']!r}")
        media_assets[fields["media_id"]] = MediaDescriptor(
            media_id=fields["media_id"],
            uri=fields["uri"],
            duration_ms=fields["duration_ms"],
            mime_hint=fields["mime_hint"],
        )

    durations = {m.media_id: m.duration_ms for m in media_assets.values()}
    nodes: dict[str, Node] = {}
    for i, raw in enumerate(top["nodes"]):
        node = _parse_node(schema, raw, f"$.nodes[{i}]", durations)
        if node.node_id in nodes:
            raise schema.fail(f"$.nodes[{i}]", f"duplicate node_id {node.node_id!r}")
        nodes[node.node_id] = node

    annotations = tuple(
        parse_annotation(schema, raw, f"$.annotations[{i}]")
        for i, raw in enumerate(top["annotations"])
    )

    project = VideoProject(
        id=top["id"],
        title=top["title"],
        start_node=top["start_node"],
        nodes=nodes,
        annotations=annotations,
        media_assets=media_assets,
    )
    report = validate_graph(project)
    if schema.unknown:
        extra = tuple(
            ValidationIssue(IssueCode.UNKNOWN_FIELD, None, f"ignored unknown field {p}")
            for p in schema.unknown
        )
        report = ValidationReport(errors=report.errors, warnings=report.warnings + extra)
    project.validation = report
    return project


def annotation_from_entry(entry: dict) -> Annotation:
    """Parse one annotation entry (strict schema); raises ProjectSyntaxError."""
    return parse_annotation(_Schema(lenient=False), entry, "$.annotation")


def annotation_to_entry(ann: Annotation) -> dict:
    entry = {
        "annotation_id": ann.annotation_id,
        "author_kind": ann.author_kind.value,
        "anchor": {
            "node": ann.anchor.node,
            "start_ms": ann.anchor.start_ms,
            "end_ms": ann.anchor.end_ms,
        },
        "title": ann.title,
        "body": [{"type": item.type.value, "value": item.value} for item in ann.body],
    }
    if ann.created_at is not None:
        entry["created_at"] = ann.created_at
    return entry


def _node_to_entry(node: Node) -> dict:
    if isinstance(node, SceneNode):
        return {
            "node_id": node.node_id,
            "kind": "scene",
            "media": node.media,
            "title": node.title,
            "nav_point": node.is_nav_point,
            "next": node.next,
        }
    if isinstance(node, ForkNode):
        return {
            "node_id": node.node_id,
            "kind": "fork",
            "prompt": node.prompt,
            "nav_point": node.is_nav_point,
            "options": [
                {"option_id": o.option_id, "label": o.label, "target": o.target}
                for o in node.options
            ],
        }
    if isinstance(node, QuestionNode):
        return {
            "node_id": node.node_id,
            "kind": "question",
            "prompt": node.prompt,
            "choices": list(node.choices),
            "correct_index": node.correct_index,
            "nav_point": node.is_nav_point,
            "next": node.next,
        }
    return {"node_id": node.node_id, "kind": "end"}


def project_to_document(project: VideoProject) -> dict:
    return {
        "format_version": SUPPORTED_FORMAT_VERSION,
        "id": project.id,
        "title": project.title,
        "start_node": project.start_node,
        "media": [
            {
                "media_id": m.media_id,
                "uri": m.uri,
                "duration_ms": m.duration_ms,
                "mime_hint": m.mime_hint,
            }
            for _, m in sorted(project.media_assets.items())
        ],
        "nodes": [_node_to_entry(node) for _, node in sorted(project.nodes.items())],
        "annotations": [
            annotation_to_entry(a)
            for a in sorted(project.annotations, key=lambda a: a.annotation_id)
        ],
    }


def canonical_json_bytes(doc: Any) -> bytes:
    """Shared canonical form: sorted keys, 2-space indent, UTF-8, one trailing newline."""
    return (json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")


def serialize_project(project: VideoProject) -> bytes:
    """Canonical bytes; parse(serialize(p)) == p and repeated calls are identical."""
    return canonical_json_bytes(project_to_document(project))


@dataclass(frozen=True)
class MissingMedia:
    """Entry describing a media reference that cannot be resolved on disk."""

    media_id: str
    uri: str
    reason: str


def check_media_refs(project: VideoProject, available: set[str]) -> list[MissingMedia]:
    """Flag relative media uris absent from `available`; URLs become warnings."""
    out: list[MissingMedia] = []
    for media_id in sorted(project.media_assets):
        uri = project.media_assets[media_id].uri
        scheme = urlparse(uri).scheme
        if scheme in ("http", "https"):
            out.append(MissingMedia(media_id, uri, "url-not-checked"))
        elif uri not in available:
            out.append(MissingMedia(media_id, uri, "missing"))
    return out
