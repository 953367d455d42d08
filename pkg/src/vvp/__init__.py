"""Interactive vision video toolkit.

Branching video projects (.vvp), playback sessions with append-only event
logs (.vvlog), group analytics with the accompanying statistical tests, an
HTTP service, and a command line front end.
"""

from .graph import (
    Annotation,
    BranchPathInventory,
    EndNode,
    ForkNode,
    ForkOption,
    MediaDescriptor,
    NavigationPoint,
    QuestionNode,
    SceneNode,
    ValidationReport,
    VideoProject,
    enumerate_branch_paths,
    navigation_points,
    reachable_nodes,
    validate_graph,
)
from .project_io import (
    ProjectSyntaxError,
    UnsupportedVersion,
    check_media_refs,
    parse_project,
    serialize_project,
)
from .sample import build_sample_project
from .session import (
    CorruptLog,
    IllegalTransition,
    InvalidProject,
    SessionEvent,
    SessionMetrics,
    SessionState,
    apply_event,
    answer_question,
    classify_interaction,
    replay,
    session_metrics,
    start_session,
)
from .stats import (
    GroupSummary,
    TestResult,
    aggregate_group,
    mann_whitney_u,
    shapiro_wilk,
    students_t_test,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BranchPathInventory",
    "CorruptLog",
    "EndNode",
    "ForkNode",
    "ForkOption",
    "GroupSummary",
    "IllegalTransition",
    "InvalidProject",
    "MediaDescriptor",
    "NavigationPoint",
    "ProjectSyntaxError",
    "QuestionNode",
    "SceneNode",
    "SessionEvent",
    "SessionMetrics",
    "SessionState",
    "TestResult",
    "UnsupportedVersion",
    "ValidationReport",
    "VideoProject",
    "aggregate_group",
    "answer_question",
    "apply_event",
    "build_sample_project",
    "check_media_refs",
    "classify_interaction",
    "enumerate_branch_paths",
    "mann_whitney_u",
    "navigation_points",
    "parse_project",
    "reachable_nodes",
    "replay",
    "serialize_project",
    "session_metrics",
    "shapiro_wilk",
    "start_session",
    "students_t_test",
    "validate_graph",
]
