"""Branching video graph: domain types, structural validation, path inventory."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

NodeId = str
MediaId = str


class GraphError(Exception):
    """Raised when an operation's structural precondition is violated."""


class DanglingTargetError(GraphError):
    def __init__(self, source: NodeId | None, target: NodeId):
        self.source = source
        self.target = target
        super().__init__(f"node {source!r} references missing node {target!r}")


@dataclass(frozen=True)
class MediaDescriptor:
    media_id: MediaId
    uri: str
    duration_ms: int
    mime_hint: str = ""


@dataclass(frozen=True)
class SceneNode:
    """A playable video segment; `next` is followed when the segment ends."""

    node_id: NodeId
    media: MediaId
    duration_ms: int
    title: str
    next: NodeId
    is_nav_point: bool = False


@dataclass(frozen=True)
class ForkOption:
    option_id: str
    label: str
    target: NodeId


@dataclass(frozen=True)
class ForkNode:
    """A decision point; playback halts until the viewer picks an option."""

    node_id: NodeId
    prompt: str
    options: tuple[ForkOption, ...]
    is_nav_point: bool = False


@dataclass(frozen=True)
class QuestionNode:
    """A single-attempt comprehension question shown right after a section."""

    node_id: NodeId
    prompt: str
    choices: tuple[str, ...]
    correct_index: int
    next: NodeId
    is_nav_point: bool = False


@dataclass(frozen=True)
class EndNode:
    node_id: NodeId


Node = SceneNode | ForkNode | QuestionNode | EndNode


class AuthorKind(str, Enum):
    CREATOR = "creator"
    VIEWER = "viewer"


class BodyType(str, Enum):
    TEXT = "text"
    LINK = "link"
    IMAGE = "image"
    FILE = "file"


@dataclass(frozen=True)
class BodyItem:
    type: BodyType
    value: str


@dataclass(frozen=True)
class AnchorRange:
    """Time range inside one node's media, in milliseconds."""

    node: NodeId
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    author_kind: AuthorKind
    anchor: AnchorRange
    title: str
    body: tuple[BodyItem, ...]
    created_at: str | None = None  # RFC 3339, viewer annotations only


class NavCategory(str, Enum):
    SCENE = "scene"
    PATH = "path"
    QUESTION = "question"


@dataclass(frozen=True)
class NavigationPoint:
    node: NodeId
    timeline_position_ms: int
    title: str
    category: NavCategory


class IssueCode(str, Enum):
    DANGLING_TARGET = "DanglingTarget"
    UNREACHABLE_NODE = "UnreachableNode"
    NO_END_NODE = "NoEndNode"
    BAD_CORRECT_INDEX = "BadCorrectIndex"
    EMPTY_FORK = "EmptyFork"
    BAD_ANCHOR = "BadAnchor"
    DUPLICATE_ID = "DuplicateId"
    UNKNOWN_FIELD = "UnknownField"  # warnings only (lenient parsing)


@dataclass(frozen=True)
class ValidationIssue:
    code: IssueCode
    node: NodeId | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class VideoProject:
    id: str
    title: str
    start_node: NodeId
    nodes: dict[NodeId, Node]
    annotations: tuple[Annotation, ...] = ()
    media_assets: dict[MediaId, MediaDescriptor] = field(default_factory=dict)
    # attached by parse_project; never part of equality or serialization
    validation: ValidationReport | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        # canonical annotation order; placement is carried by anchors
        self.annotations = tuple(
            sorted(self.annotations, key=lambda a: a.annotation_id)
        )

    def question_nodes(self) -> list[QuestionNode]:
        return [n for n in self.nodes.values() if isinstance(n, QuestionNode)]

    def fork_nodes(self) -> list[ForkNode]:
        return [n for n in self.nodes.values() if isinstance(n, ForkNode)]


def node_duration_ms(node: Node) -> int:
    """Playable duration of a node; interaction and end nodes take no time."""
    return node.duration_ms if isinstance(node, SceneNode) else 0


def _out_edges(node: Node) -> list[NodeId]:
    if isinstance(node, SceneNode):
        return [node.next]
    if isinstance(node, QuestionNode):
        return [node.next]
    if isinstance(node, ForkNode):
        return [opt.target for opt in node.options]
    return []


def validate_graph(project: VideoProject) -> ValidationReport:
    """Check every structural invariant; violations become report entries.

    Never raises: a report with an empty error list means the project is
    playable. Entries are ordered deterministically by node id then code.
    """
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []

    def err(code: IssueCode, node: NodeId | None, detail: str) -> None:
        errors.append(ValidationIssue(code, node, detail))

    if project.start_node not in project.nodes:
        err(
            IssueCode.DANGLING_TARGET,
            None,
            f"start_node {project.start_node!r} is not defined",
        )

    for node_id in sorted(project.nodes):
        node = project.nodes[node_id]
        if isinstance(node, SceneNode):
            if node.next not in project.nodes:
                err(IssueCode.DANGLING_TARGET, node_id, f"next -> {node.next!r}")
            if node.media not in project.media_assets:
                err(IssueCode.DANGLING_TARGET, node_id, f"media -> {node.media!r}")
            if node.duration_ms <= 0:
                err(IssueCode.BAD_ANCHOR, node_id, "scene duration must be positive")
        elif isinstance(node, ForkNode):
            if len(node.options) < 2:
                err(IssueCode.EMPTY_FORK, node_id, "fork needs at least 2 options")
            seen_ids: set[str] = set()
            seen_targets: set[NodeId] = set()
            for opt in node.options:
                if opt.option_id in seen_ids:
                    err(
                        IssueCode.DUPLICATE_ID,
                        node_id,
                        f"duplicate option_id {opt.option_id!r}",
                    )
                seen_ids.add(opt.option_id)
                if opt.target in seen_targets:
                    err(
                        IssueCode.DUPLICATE_ID,
                        node_id,
                        f"options share target {opt.target!r}",
                    )
                seen_targets.add(opt.target)
                if not opt.label:
                    err(
                        IssueCode.EMPTY_FORK,
                        node_id,
                        f"option {opt.option_id!r} has an empty label",
                    )
                if opt.target not in project.nodes:
                    err(
                        IssueCode.DANGLING_TARGET,
                        node_id,
                        f"option {opt.option_id!r} -> {opt.target!r}",
                    )
        elif isinstance(node, QuestionNode):
            if node.next not in project.nodes:
                err(IssueCode.DANGLING_TARGET, node_id, f"next -> {node.next!r}")
            if len(node.choices) < 2:
                err(
                    IssueCode.BAD_CORRECT_INDEX,
                    node_id,
                    "question needs at least 2 choices",
                )
            elif not 0 <= node.correct_index < len(node.choices):
                err(
                    IssueCode.BAD_CORRECT_INDEX,
                    node_id,
                    f"correct_index {node.correct_index} out of range",
                )

    seen_annotation_ids: set[str] = set()
    for ann in project.annotations:
        if ann.annotation_id in seen_annotation_ids:
            err(
                IssueCode.DUPLICATE_ID,
                ann.anchor.node,
                f"duplicate annotation_id {ann.annotation_id!r}",
            )
        seen_annotation_ids.add(ann.annotation_id)
        if ann.anchor.node not in project.nodes:
            err(
                IssueCode.DANGLING_TARGET,
                None,
                f"annotation {ann.annotation_id!r} anchored to missing node "
                f"{ann.anchor.node!r}",
            )
            continue
        duration = node_duration_ms(project.nodes[ann.anchor.node])
        if not 0 <= ann.anchor.start_ms <= ann.anchor.end_ms <= duration:
            err(
                IssueCode.BAD_ANCHOR,
                ann.anchor.node,
                f"annotation {ann.annotation_id!r} range "
                f"[{ann.anchor.start_ms}, {ann.anchor.end_ms}] outside "
                f"[0, {duration}]",
            )
        if not ann.title:
            err(
                IssueCode.BAD_ANCHOR,
                ann.anchor.node,
                f"annotation {ann.annotation_id!r} has an empty title",
            )

    for media_id in sorted(project.media_assets):
        media = project.media_assets[media_id]
        if media.duration_ms <= 0 or not media.uri:
            warnings.append(
                ValidationIssue(
                    IssueCode.BAD_ANCHOR,
                    None,
                    f"media {media_id!r} has invalid uri or duration",
                )
            )

    # Reachability is only meaningful once every edge resolves.
    if not errors and project.start_node in project.nodes:
        reached = reachable_nodes(project)
        for node_id in sorted(project.nodes):
            if node_id not in reached:
                warnings.append(
                    ValidationIssue(
                        IssueCode.UNREACHABLE_NODE,
                        node_id,
                        "not reachable from the start node",
                    )
                )
        if not any(isinstance(project.nodes[n], EndNode) for n in reached):
            err(IssueCode.NO_END_NODE, None, "no end node reachable from start")

    key = lambda issue: (issue.node or "", issue.code.value, issue.detail)
    return ValidationReport(
        errors=tuple(sorted(errors, key=key)),
        warnings=tuple(sorted(warnings, key=key)),
    )


def reachable_nodes(project: VideoProject) -> set[NodeId]:
    """Breadth-first closure over next/option edges from the start node."""
    if project.start_node not in project.nodes:
        raise DanglingTargetError(None, project.start_node)
    reached: set[NodeId] = set()
    queue: deque[NodeId] = deque([project.start_node])
    while queue:
        node_id = queue.popleft()
        if node_id in reached:
            continue
        reached.add(node_id)
        for target in _out_edges(project.nodes[node_id]):
            if target not in project.nodes:
                raise DanglingTargetError(node_id, target)
            if target not in reached:
                queue.append(target)
    return reached


def _positions_and_visit_order(
    project: VideoProject,
) -> tuple[dict[NodeId, int], dict[NodeId, int]]:
    positions: dict[NodeId, int] = {}
    order: dict[NodeId, int] = {}
    stack: list[tuple[NodeId, int]] = [(project.start_node, 0)]
    while stack:
        node_id, at_ms = stack.pop()
        if node_id in positions or node_id not in project.nodes:
            continue
        positions[node_id] = at_ms
        order[node_id] = len(order)
        node = project.nodes[node_id]
        after = at_ms + node_duration_ms(node)
        # push in reverse so the first option / single successor pops first
        for target in reversed(_out_edges(node)):
            stack.append((target, after))
    return positions, order


def timeline_positions(project: VideoProject) -> dict[NodeId, int]:
    """Deterministic timeline position for every reachable node.

    Positions accumulate scene durations depth-first from the start node,
    exploring fork options in author order. Nodes on the default path (every
    fork resolved to its first option) get their cumulative default-path
    offset; alternative branches start at their fork's position.
    """
    return _positions_and_visit_order(project)[0]


def navigation_points(project: VideoProject) -> list[NavigationPoint]:
    """Overview entries for every nav-flagged node, sorted by timeline position."""
    positions, visit_order = _positions_and_visit_order(project)
    entries: list[NavigationPoint] = []
    for node_id, node in project.nodes.items():
        if isinstance(node, EndNode) or not getattr(node, "is_nav_point", False):
            continue
        if node_id not in positions:
            continue
        if isinstance(node, SceneNode):
            category, title = NavCategory.SCENE, node.title
        elif isinstance(node, ForkNode):
            category, title = NavCategory.PATH, node.prompt
        else:
            category, title = NavCategory.QUESTION, node.prompt
        entries.append(
            NavigationPoint(node_id, positions[node_id], title, category)
        )
    entries.sort(key=lambda e: (e.timeline_position_ms, visit_order[e.node]))
    return entries


@dataclass(frozen=True)
class BranchPath:
    """The chain of nodes behind one fork option, up to the next fork or end."""

    fork: NodeId
    option_id: str
    label: str
    nodes: tuple[NodeId, ...]


@dataclass(frozen=True)
class BranchPathInventory:
    paths: tuple[BranchPath, ...]
    minimum_per_playthrough: int


def _walk_branch(project: VideoProject, start: NodeId) -> tuple[NodeId, ...]:
    chain: list[NodeId] = []
    node_id = start
    while node_id in project.nodes and node_id not in chain:
        node = project.nodes[node_id]
        if isinstance(node, (ForkNode, EndNode)):
            break
        chain.append(node_id)
        node_id = node.next
    return tuple(chain)


def enumerate_branch_paths(project: VideoProject) -> BranchPathInventory:
    """One BranchPath per fork option, plus the fewest choices any playthrough needs.

    The minimum is the smallest number of fork decisions on any route from the
    start node to an end node (0-1 shortest path over choice edges).
    """
    paths = [
        BranchPath(fork.node_id, opt.option_id, opt.label, _walk_branch(project, opt.target))
        for fork in sorted(project.fork_nodes(), key=lambda f: f.node_id)
        for opt in fork.options
    ]

    best: dict[NodeId, int] = {project.start_node: 0}
    queue: deque[NodeId] = deque([project.start_node])
    minimum = 0
    while queue:
        node_id = queue.popleft()
        node = project.nodes.get(node_id)
        if node is None:
            continue
        cost = best[node_id]
        is_fork = isinstance(node, ForkNode)
        for target in _out_edges(node):
            step = cost + (1 if is_fork else 0)
            if step < best.get(target, step + 1):
                best[target] = step
                # 0-1 BFS: zero-cost edges go to the front
                if is_fork:
                    queue.append(target)
                else:
                    queue.appendleft(target)
    end_costs = [
        best[n] for n, node in project.nodes.items()
        if isinstance(node, EndNode) and n in best
    ]
    minimum = min(end_costs) if end_costs else 0
    return BranchPathInventory(paths=tuple(paths), minimum_per_playthrough=minimum)
