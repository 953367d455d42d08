/** Wire types mirroring the server's documents and snapshots. */

export type NodeKind = "scene" | "fork" | "question" | "end";

export interface SceneNodeDoc {
  node_id: string;
  kind: "scene";
  media: string;
  title: string;
  nav_point: boolean;
  next: string;
}

export interface ForkOptionDoc {
  option_id: string;
  label: string;
  target: string;
}

export interface ForkNodeDoc {
  node_id: string;
  kind: "fork";
  prompt: string;
  nav_point: boolean;
  options: ForkOptionDoc[];
}

export interface QuestionNodeDoc {
  node_id: string;
  kind: "question";
  prompt: string;
  choices: string[];
  nav_point: boolean;
  next: string;
  // never present in player-facing documents; solutions stay on the server
  correct_index?: number;
}

export interface EndNodeDoc {
  node_id: string;
  kind: "end";
}

export type NodeDoc = SceneNodeDoc | ForkNodeDoc | QuestionNodeDoc | EndNodeDoc;

export interface MediaDoc {
  media_id: string;
  uri: string;
  duration_ms: number;
  mime_hint: string;
}

export interface AnnotationBodyItem {
  type: "text" | "link" | "image" | "file";
  value: string;
}

export interface AnnotationDoc {
  annotation_id: string;
  author_kind: "creator" | "viewer";
  anchor: { node: string; start_ms: number; end_ms: number };
  title: string;
  body: AnnotationBodyItem[];
  created_at?: string;
}

export interface ProjectDoc {
  format_version: number;
  id: string;
  title: string;
  start_node: string;
  media: MediaDoc[];
  nodes: NodeDoc[];
  annotations: AnnotationDoc[];
}

export interface NavigationEntry {
  node: string;
  timeline_position_ms: number;
  title: string;
  category: "scene" | "path" | "question";
}

export type ModeName =
  | "Playing"
  | "PausedByUser"
  | "PausedQuestion"
  | "PausedQuestionFeedback"
  | "AwaitingFork"
  | "OverviewOpen"
  | "AnnotationExpanded"
  | "Ended";

export interface AnswerFeedback {
  chosen_index: number;
  correct: boolean;
  correct_index: number;
}

export interface QuestionPayload {
  node: string;
  prompt: string;
  choices: string[];
  answered?: AnswerFeedback;
  feedback?: AnswerFeedback;
}

export interface ForkPayload {
  node: string;
  prompt: string;
  options: { option_id: string; label: string }[];
}

export interface AnnotationBox {
  annotation_id: string;
  title: string;
  author_kind: "creator" | "viewer";
}

export interface Snapshot {
  session_id: string;
  project_id: string;
  viewer_id: string;
  status: "active" | "ended";
  head_seq: number;
  mode: ModeName;
  current_node: string;
  playhead_ms: number;
  node_duration_ms: number;
  annotations_visible: boolean;
  can_toggle_annotations: boolean;
  answered: Record<string, AnswerFeedback>;
  fork_choices: { fork: string; option_id: string; seq: number }[];
  branch_paths_seen: string[];
  visited: string[];
  annotations_at_playhead: AnnotationBox[];
  media?: { media_id: string; duration_ms: number; title: string };
  question?: QuestionPayload;
  fork?: ForkPayload;
  expanded_annotation?: string;
  resume_mode?: ModeName;
}

export type EventKind =
  | "SessionStarted"
  | "PlaybackResumed"
  | "PlaybackPaused"
  | "SceneEntered"
  | "QuestionPresented"
  | "QuestionAnswered"
  | "ForkPresented"
  | "ChoosePath"
  | "OverviewOpened"
  | "OverviewNavigated"
  | "OverviewClosed"
  | "AnnotationsShown"
  | "AnnotationsHidden"
  | "AnnotationExpanded"
  | "AnnotationCollapsed"
  | "ViewerAnnotationAdded"
  | "CommentAdded"
  | "Seeked"
  | "SessionEnded";

export interface EventRecord {
  seq: number;
  wall_time: string;
  node: string;
  offset_ms: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface EventAck {
  seq: number;
  feedback?: AnswerFeedback & { counts_for_metrics: boolean };
}

/** The modes in which the playhead must not move and play controls lock. */
export const PAUSING_MODES: ReadonlySet<ModeName> = new Set([
  "PausedByUser",
  "PausedQuestion",
  "PausedQuestionFeedback",
  "AwaitingFork",
  "OverviewOpen",
  "AnnotationExpanded",
]);

/** Modes the viewer cannot leave except through the demanded interaction. */
export const MANDATORY_MODES: ReadonlySet<ModeName> = new Set([
  "PausedQuestion",
  "AwaitingFork",
]);
