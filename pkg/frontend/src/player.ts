/** Session player: wires the video element, overlays and the event queue.
 *
 * The controller never advances its view on its own: every gesture becomes
 * exactly one posted event (chains like choosing a path enqueue the follow-up
 * entry event immediately after), and rendering always happens from the
 * server snapshot fetched after the last ack. A sequence conflict drops the
 * local buffer and resyncs from the snapshot.
 */

import { ApiClient, SequenceConflict } from "./api";
import { EventQueue } from "./events";
import {
  clearOverlay,
  renderAnnotationRegion,
  renderExpandedAnnotation,
  renderFork,
  renderOverview,
  renderQuestion,
} from "./overlays";
import type {
  AnnotationDoc,
  EventKind,
  NavigationEntry,
  NodeDoc,
  ProjectDoc,
  Snapshot,
} from "./types";
import { MANDATORY_MODES, PAUSING_MODES } from "./types";

/** The slice of HTMLVideoElement the player needs; tests stub this. */
export interface VideoSurface {
  src: string;
  currentTime: number;
  readonly paused: boolean;
  play(): void | Promise<void>;
  pause(): void;
  addEventListener(type: "ended" | "timeupdate", listener: () => void): void;
}

export interface PlayerElements {
  overlayLayer: HTMLElement;
  annotationRegion: HTMLElement;
  playPauseButton: HTMLButtonElement;
  overviewButton: HTMLButtonElement;
  seekBar: HTMLInputElement;
  statusLine: HTMLElement;
}

export class PlayerController {
  private snapshot!: Snapshot;
  private queue!: EventQueue;
  private nodesById = new Map<string, NodeDoc>();
  private annotationsById = new Map<string, AnnotationDoc>();
  private navigation: NavigationEntry[] = [];
  private localPlayheadMs = 0;

  constructor(
    private api: ApiClient,
    private project: ProjectDoc,
    private sessionId: string,
    private video: VideoSurface,
    private dom: PlayerElements,
    private clock: () => Date = () => new Date(),
  ) {
    for (const node of project.nodes) this.nodesById.set(node.node_id, node);
    for (const ann of project.annotations) this.annotationsById.set(ann.annotation_id, ann);
    this.video.addEventListener("ended", () => void this.onSegmentEnded());
    this.video.addEventListener("timeupdate", () => {
      if (this.snapshot && this.snapshot.mode === "Playing") {
        this.localPlayheadMs = Math.round(this.video.currentTime * 1000);
      }
    });
    this.dom.playPauseButton.addEventListener("click", () => void this.togglePlayback());
    this.dom.overviewButton.addEventListener("click", () => void this.openOverview());
    this.dom.seekBar.addEventListener("change", () => {
      void this.seekWithinScene(Number(this.dom.seekBar.value));
    });
  }

  static async start(
    api: ApiClient,
    projectId: string,
    viewerId: string,
    video: VideoSurface,
    dom: PlayerElements,
    clock: () => Date = () => new Date(),
  ): Promise<PlayerController> {
    const project = await api.getProject(projectId);
    const created = await api.createSession(projectId, viewerId);
    const controller = new PlayerController(api, project, created.session_id, video, dom, clock);
    controller.navigation = await api.getNavigation(projectId);
    await controller.resync();
    return controller;
  }

  get state(): Snapshot {
    return this.snapshot;
  }

  get playheadMs(): number {
    return this.snapshot.mode === "Playing" ? this.localPlayheadMs : this.snapshot.playhead_ms;
  }

  async resync(): Promise<void> {
    this.snapshot = await this.api.getSnapshot(this.sessionId);
    this.localPlayheadMs = this.snapshot.playhead_ms;
    this.queue = new EventQueue(
      this.api,
      this.sessionId,
      this.snapshot.head_seq,
      () => void this.resync(),
      this.clock,
    );
    this.render();
  }

  private node(nodeId: string): NodeDoc {
    const node = this.nodesById.get(nodeId);
    if (!node) throw new Error(`unknown node ${nodeId}`);
    return node;
  }

  private entryKindFor(node: NodeDoc): EventKind {
    switch (node.kind) {
      case "scene":
        return "SceneEntered";
      case "question":
        return "QuestionPresented";
      case "fork":
        return "ForkPresented";
      case "end":
        return "SessionEnded";
    }
  }

  /** Enqueue one event; resolves false when a conflict forced a resync. */
  private async submit(
    kind: EventKind,
    node: string,
    offsetMs: number,
    payload: Record<string, unknown>,
  ): Promise<boolean> {
    try {
      await this.queue.submit(kind, node, offsetMs, payload);
      return true;
    } catch (error) {
      if (error instanceof SequenceConflict) return false; // resync is underway
      throw error;
    }
  }

  /** Post one event, then re-render from the authoritative snapshot. */
  private async post(
    kind: EventKind,
    node: string,
    offsetMs: number,
    payload: Record<string, unknown>,
  ): Promise<void> {
    if (!(await this.submit(kind, node, offsetMs, payload))) return;
    this.snapshot = await this.api.getSnapshot(this.sessionId);
    this.localPlayheadMs = this.snapshot.playhead_ms;
    this.render();
  }

  private async postEntry(target: string): Promise<void> {
    const node = this.node(target);
    await this.post(this.entryKindFor(node), target, 0, { node: target });
  }

  // ------------------------------------------------------------------
  // Gestures

  async onSegmentEnded(): Promise<void> {
    if (this.snapshot.mode !== "Playing") return;
    const current = this.node(this.snapshot.current_node);
    if (current.kind !== "scene") return;
    this.localPlayheadMs = this.durationOf(current.node_id);
    await this.postEntry(current.next);
  }

  async togglePlayback(): Promise<void> {
    if (this.snapshot.mode === "Playing") {
      await this.post("PlaybackPaused", this.snapshot.current_node, this.playheadMs, {});
    } else if (this.snapshot.mode === "PausedByUser") {
      await this.post("PlaybackResumed", this.snapshot.current_node, this.snapshot.playhead_ms, {});
    }
  }

  async answer(index: number): Promise<void> {
    if (this.snapshot.mode !== "PausedQuestion" || !this.snapshot.question) return;
    await this.post("QuestionAnswered", this.snapshot.question.node, 0, {
      node: this.snapshot.question.node,
      chosen_index: index,
      correct: null, // the server decides and echoes the verdict
    });
  }

  async continueAfterFeedback(): Promise<void> {
    const question = this.snapshot.question;
    if (!question) return;
    const node = this.node(question.node);
    if (node.kind !== "question") return;
    await this.postEntry(node.next);
  }

  async choose(optionId: string): Promise<void> {
    if (this.snapshot.mode !== "AwaitingFork" || !this.snapshot.fork) return;
    const forkNode = this.node(this.snapshot.fork.node);
    if (forkNode.kind !== "fork") return;
    const option = forkNode.options.find((o) => o.option_id === optionId);
    if (!option) return;
    const forkId = forkNode.node_id;
    if (!(await this.submit("ChoosePath", forkId, 0, { node: forkId, option_id: optionId }))) return;
    await this.postEntry(option.target);
  }

  async openOverview(): Promise<void> {
    if (this.snapshot.mode !== "Playing" && this.snapshot.mode !== "PausedByUser") return;
    await this.post("OverviewOpened", this.snapshot.current_node, this.playheadMs, {});
  }

  async closeOverview(): Promise<void> {
    if (this.snapshot.mode !== "OverviewOpen") return;
    await this.post("OverviewClosed", this.snapshot.current_node, this.snapshot.playhead_ms, {});
  }

  async navigateTo(targetNode: string): Promise<void> {
    if (this.snapshot.mode !== "OverviewOpen") return;
    const from = this.snapshot.current_node;
    const fromOffset = this.snapshot.playhead_ms;
    if (!(await this.submit("OverviewNavigated", from, fromOffset, { target: targetNode }))) return;
    const seekPayload = {
      from: { node: from, offset_ms: fromOffset },
      to: { node: targetNode, offset_ms: 0 },
    };
    if (!(await this.submit("Seeked", targetNode, 0, seekPayload))) return;
    await this.postEntry(targetNode);
  }

  async toggleAnnotations(): Promise<void> {
    if (this.snapshot.mode !== "Playing" || !this.snapshot.can_toggle_annotations) return;
    const kind = this.snapshot.annotations_visible ? "AnnotationsHidden" : "AnnotationsShown";
    await this.post(kind, this.snapshot.current_node, this.playheadMs, {});
  }

  async expandAnnotation(annotationId: string): Promise<void> {
    if (this.snapshot.mode !== "Playing" && this.snapshot.mode !== "PausedByUser") return;
    await this.post("AnnotationExpanded", this.snapshot.current_node, this.playheadMs, {
      annotation_id: annotationId,
    });
  }

  async collapseAnnotation(): Promise<void> {
    if (this.snapshot.mode !== "AnnotationExpanded" || !this.snapshot.expanded_annotation) return;
    await this.post("AnnotationCollapsed", this.snapshot.current_node, this.snapshot.playhead_ms, {
      annotation_id: this.snapshot.expanded_annotation,
    });
  }

  async addComment(text: string): Promise<void> {
    if (!text || (this.snapshot.mode !== "Playing" && this.snapshot.mode !== "PausedByUser")) return;
    await this.post("CommentAdded", this.snapshot.current_node, this.playheadMs, { text });
  }

  async addAnnotation(title: string, bodyText: string): Promise<void> {
    if (!title || (this.snapshot.mode !== "Playing" && this.snapshot.mode !== "PausedByUser")) return;
    // convenience endpoint: the server sequences and persists this one
    const body = bodyText ? [{ type: "text", value: bodyText }] : [];
    const created = await this.api.postAnnotation(this.sessionId, {
      title,
      body,
      start_ms: this.playheadMs,
      end_ms: this.playheadMs,
    });
    this.annotationsById.set(created.annotation_id, {
      annotation_id: created.annotation_id,
      author_kind: "viewer",
      anchor: { node: this.snapshot.current_node, start_ms: this.playheadMs, end_ms: this.playheadMs },
      title,
      body: body as AnnotationDoc["body"],
    });
    await this.resync();
  }

  async seekWithinScene(offsetMs: number): Promise<void> {
    const mode = this.snapshot.mode;
    if (mode !== "Playing" && mode !== "PausedByUser") return;
    const node = this.snapshot.current_node;
    const clamped = Math.max(0, Math.min(offsetMs, this.durationOf(node)));
    await this.post("Seeked", node, clamped, {
      from: { node, offset_ms: this.snapshot.playhead_ms },
      to: { node, offset_ms: clamped },
    });
  }

  // ------------------------------------------------------------------
  // Rendering

  private durationOf(nodeId: string): number {
    const node = this.node(nodeId);
    if (node.kind !== "scene") return 0;
    const media = this.project.media.find((m) => m.media_id === node.media);
    return media ? media.duration_ms : 0;
  }

  private syncVideo(): void {
    const mode = this.snapshot.mode;
    const current = this.node(this.snapshot.current_node);
    if (current.kind === "scene") {
      const url = this.api.mediaUrl(current.media);
      if (this.video.src !== url) {
        this.video.src = url;
        this.video.currentTime = this.snapshot.playhead_ms / 1000;
      }
    }
    if (PAUSING_MODES.has(mode) || mode === "Ended") {
      if (!this.video.paused) this.video.pause();
    } else if (mode === "Playing") {
      if (Math.abs(this.video.currentTime * 1000 - this.snapshot.playhead_ms) > 1500) {
        this.video.currentTime = this.snapshot.playhead_ms / 1000;
      }
      if (this.video.paused) void this.video.play();
    }
  }

  render(): void {
    const snap = this.snapshot;
    const { overlayLayer, annotationRegion, playPauseButton, overviewButton, seekBar, statusLine } = this.dom;

    this.syncVideo();

    // play/seek/overview controls lock down during mandatory interactions
    const mandatory = MANDATORY_MODES.has(snap.mode);
    const modal = snap.mode === "OverviewOpen" || snap.mode === "AnnotationExpanded" || snap.mode === "Ended";
    playPauseButton.disabled = mandatory || modal;
    seekBar.disabled = mandatory || modal;
    overviewButton.disabled = mandatory || modal;
    playPauseButton.textContent = snap.mode === "Playing" ? "Pause" : "Play";
    seekBar.max = String(this.durationOf(snap.current_node));
    seekBar.value = String(snap.playhead_ms);
    statusLine.textContent = `${snap.mode} @ ${snap.current_node}`;

    renderAnnotationRegion(
      annotationRegion,
      snap.annotations_at_playhead,
      snap.annotations_visible,
      snap.can_toggle_annotations && snap.mode === "Playing",
      {
        onToggle: () => void this.toggleAnnotations(),
        onExpand: (id) => void this.expandAnnotation(id),
        onCompose: () => {
          const title = window.prompt("Annotation title?") ?? "";
          const body = title ? window.prompt("Details (optional)") ?? "" : "";
          if (title) void this.addAnnotation(title, body);
        },
      },
    );

    switch (snap.mode) {
      case "PausedQuestion": {
        // a re-encountered question shows its stored verdict immediately
        const stored = snap.question?.answered;
        renderQuestion(overlayLayer, snap.question!, stored, {
          onAnswer: (index) => void this.answer(index),
          onContinue: () => void this.continueAfterFeedback(),
        });
        break;
      }
      case "PausedQuestionFeedback":
        renderQuestion(overlayLayer, snap.question!, snap.question!.feedback, {
          onAnswer: () => undefined,
          onContinue: () => void this.continueAfterFeedback(),
        });
        break;
      case "AwaitingFork":
        renderFork(overlayLayer, snap.fork!, {
          onChoose: (optionId) => void this.choose(optionId),
        });
        break;
      case "OverviewOpen":
        renderOverview(overlayLayer, this.navigation, new Set(snap.visited), {
          onNavigate: (node) => void this.navigateTo(node),
          onClose: () => void this.closeOverview(),
        });
        break;
      case "AnnotationExpanded": {
        const known = this.annotationsById.get(snap.expanded_annotation ?? "");
        renderExpandedAnnotation(
          overlayLayer,
          known ?? { annotation_id: snap.expanded_annotation ?? "", title: "Annotation", body: [] },
          { onCollapse: () => void this.collapseAnnotation() },
        );
        break;
      }
      case "Ended": {
        clearOverlay(overlayLayer);
        const done = document.createElement("div");
        done.className = "overlay overlay-ended";
        done.textContent = "The session has ended. Thanks for watching.";
        overlayLayer.appendChild(done);
        break;
      }
      default:
        clearOverlay(overlayLayer);
    }
  }
}
