/** Test doubles: a stub video surface and a miniature in-memory server that
 * follows the real API contract (client-sequenced events, 409 on conflict,
 * server-side answer verdicts, snapshot as the single source of truth). */

import type { VideoSurface, PlayerElements } from "../src/player";
import type {
  AnswerFeedback,
  EventAck,
  EventRecord,
  ModeName,
  NavigationEntry,
  ProjectDoc,
  Snapshot,
} from "../src/types";

export class StubVideo implements VideoSurface {
  src = "";
  currentTime = 0;
  paused = true;
  private listeners: Record<string, (() => void)[]> = { ended: [], timeupdate: [] };

  play(): void {
    this.paused = false;
  }

  pause(): void {
    this.paused = true;
  }

  addEventListener(type: "ended" | "timeupdate", listener: () => void): void {
    this.listeners[type].push(listener);
  }

  fireEnded(): void {
    for (const fn of this.listeners.ended) fn();
  }

  fireTimeUpdate(seconds: number): void {
    this.currentTime = seconds;
    for (const fn of this.listeners.timeupdate) fn();
  }
}

export function makeDom(): PlayerElements {
  const make = (tag: string) => document.createElement(tag);
  return {
    overlayLayer: make("div"),
    annotationRegion: make("div"),
    playPauseButton: make("button") as HTMLButtonElement,
    overviewButton: make("button") as HTMLButtonElement,
    seekBar: make("input") as HTMLInputElement,
    statusLine: make("span"),
  };
}

/** Demo project document as the server would hand it out: no correct_index. */
export function demoProject(): ProjectDoc {
  return {
    format_version: 1,
    id: "demo",
    title: "Demo",
    start_node: "s1",
    media: [
      { media_id: "m1", uri: "media/one.mp4", duration_ms: 30000, mime_hint: "video/mp4" },
      { media_id: "m2", uri: "media/two.mp4", duration_ms: 20000, mime_hint: "video/mp4" },
      { media_id: "m3", uri: "media/three.mp4", duration_ms: 25000, mime_hint: "video/mp4" },
    ],
    nodes: [
      { node_id: "s1", kind: "scene", media: "m1", title: "Opening", nav_point: true, next: "q1" },
      { node_id: "q1", kind: "question", prompt: "What problem is shown?", choices: ["Distance", "Price", "Weather"], nav_point: false, next: "f1" },
      {
        node_id: "f1",
        kind: "fork",
        prompt: "How should it continue?",
        nav_point: true,
        options: [
          { option_id: "left", label: "The careful way", target: "s2" },
          { option_id: "mid", label: "The quick way", target: "s3" },
          { option_id: "right", label: "The odd way", target: "s2" },
        ],
      },
      { node_id: "s2", kind: "scene", media: "m2", title: "Careful path", nav_point: true, next: "end" },
      { node_id: "s3", kind: "scene", media: "m3", title: "Quick path", nav_point: true, next: "end" },
      { node_id: "end", kind: "end" },
    ],
    annotations: [
      {
        annotation_id: "a1",
        author_kind: "creator",
        anchor: { node: "s1", start_ms: 0, end_ms: 30000 },
        title: "Background",
        body: [{ type: "text", value: "Some context." }],
      },
    ],
  };
}

export function demoNavigation(): NavigationEntry[] {
  return [
    { node: "s1", timeline_position_ms: 0, title: "Opening", category: "scene" },
    { node: "f1", timeline_position_ms: 30000, title: "How should it continue?", category: "path" },
    { node: "s2", timeline_position_ms: 30000, title: "Careful path", category: "scene" },
    { node: "s3", timeline_position_ms: 30000, title: "Quick path", category: "scene" },
  ];
}

interface FakeState {
  mode: ModeName;
  currentNode: string;
  playheadMs: number;
  annotationsVisible: boolean;
  visited: Set<string>;
  answered: Map<string, AnswerFeedback>;
  forkChoices: { fork: string; option_id: string; seq: number }[];
  resume: ModeName;
  expanded?: string;
  headSeq: number;
}

/** In-memory stand-in for the HTTP server, honoring the same contract. */
export class FakeServer {
  state: FakeState;
  posted: EventRecord[] = [];
  project = demoProject();
  correct: Record<string, number> = { q1: 0 };
  snapshotFetches = 0;

  constructor() {
    this.state = {
      mode: "Playing",
      currentNode: "s1",
      playheadMs: 0,
      annotationsVisible: false,
      visited: new Set(["s1"]),
      answered: new Map(),
      forkChoices: [],
      resume: "Playing",
      headSeq: 1,
    };
  }

  private nodeDoc(id: string) {
    const node = this.project.nodes.find((n) => n.node_id === id);
    if (!node) throw new Error(`unknown node ${id}`);
    return node;
  }

  snapshot(): Snapshot {
    this.snapshotFetches += 1;
    const s = this.state;
    const current = this.nodeDoc(s.currentNode);
    const snap: Snapshot = {
      session_id: "fake-session",
      project_id: "demo",
      viewer_id: "tester",
      status: s.mode === "Ended" ? "ended" : "active",
      head_seq: s.headSeq,
      mode: s.mode,
      current_node: s.currentNode,
      playhead_ms: s.playheadMs,
      node_duration_ms: current.kind === "scene" ? this.project.media.find((m) => m.media_id === current.media)!.duration_ms : 0,
      annotations_visible: s.annotationsVisible,
      can_toggle_annotations:
        s.annotationsVisible ||
        this.project.annotations.some((a) => a.anchor.node === s.currentNode),
      answered: Object.fromEntries(s.answered),
      fork_choices: [...s.forkChoices],
      branch_paths_seen: [...new Set(s.forkChoices.map((c) => c.option_id))],
      visited: [...s.visited],
      annotations_at_playhead: this.project.annotations
        .filter(
          (a) =>
            a.anchor.node === s.currentNode &&
            a.anchor.start_ms <= s.playheadMs &&
            s.playheadMs <= a.anchor.end_ms,
        )
        .map((a) => ({ annotation_id: a.annotation_id, title: a.title, author_kind: a.author_kind })),
    };
    if (current.kind === "scene") {
      snap.media = {
        media_id: current.media,
        duration_ms: snap.node_duration_ms,
        title: current.title,
      };
    }
    if ((s.mode === "PausedQuestion" || s.mode === "PausedQuestionFeedback") && this.nodeDoc(s.currentNode).kind === "question") {
      const q = this.nodeDoc(s.currentNode) as Extract<ReturnType<FakeServer["nodeDoc"]>, { kind: "question" }>;
      snap.question = { node: q.node_id, prompt: q.prompt, choices: q.choices };
      const stored = s.answered.get(q.node_id);
      if (stored) snap.question.answered = stored;
      if (s.mode === "PausedQuestionFeedback" && stored) snap.question.feedback = stored;
    }
    if (s.mode === "AwaitingFork") {
      const f = this.nodeDoc(s.currentNode);
      if (f.kind === "fork") {
        snap.fork = {
          node: f.node_id,
          prompt: f.prompt,
          options: f.options.map((o) => ({ option_id: o.option_id, label: o.label })),
        };
      }
    }
    if (s.mode === "AnnotationExpanded") {
      snap.expanded_annotation = s.expanded;
      snap.resume_mode = s.resume;
    }
    if (s.mode === "OverviewOpen") snap.resume_mode = s.resume;
    return snap;
  }

  postEvent(record: EventRecord): EventAck | { conflict: number } {
    const s = this.state;
    if (record.seq !== s.headSeq + 1) {
      return { conflict: s.headSeq };
    }
    this.posted.push(record);
    s.headSeq = record.seq;
    let feedback: EventAck["feedback"];
    switch (record.kind) {
      case "SceneEntered":
        s.mode = "Playing";
        s.currentNode = record.node;
        s.playheadMs = 0;
        s.visited.add(record.node);
        break;
      case "QuestionPresented":
        s.mode = "PausedQuestion";
        s.currentNode = record.node;
        s.playheadMs = 0;
        s.visited.add(record.node);
        break;
      case "ForkPresented":
        s.mode = "AwaitingFork";
        s.currentNode = record.node;
        s.playheadMs = 0;
        s.visited.add(record.node);
        break;
      case "SessionEnded":
        s.mode = "Ended";
        s.currentNode = record.node;
        break;
      case "QuestionAnswered": {
        const node = record.payload["node"] as string;
        const chosen = record.payload["chosen_index"] as number;
        const verdict: AnswerFeedback = {
          chosen_index: chosen,
          correct: chosen === this.correct[node],
          correct_index: this.correct[node],
        };
        if (!s.answered.has(node)) s.answered.set(node, verdict);
        s.mode = "PausedQuestionFeedback";
        feedback = { ...verdict, counts_for_metrics: true };
        break;
      }
      case "ChoosePath":
        s.forkChoices.push({
          fork: record.payload["node"] as string,
          option_id: record.payload["option_id"] as string,
          seq: record.seq,
        });
        break;
      case "PlaybackPaused":
        s.mode = "PausedByUser";
        s.playheadMs = record.offset_ms;
        break;
      case "PlaybackResumed":
        s.mode = "Playing";
        break;
      case "OverviewOpened":
        s.resume = s.mode;
        s.mode = "OverviewOpen";
        s.playheadMs = record.offset_ms;
        break;
      case "OverviewClosed":
        s.mode = s.resume;
        break;
      case "OverviewNavigated":
        break;
      case "Seeked": {
        const to = record.payload["to"] as { node: string; offset_ms: number };
        s.currentNode = to.node;
        s.playheadMs = to.offset_ms;
        break;
      }
      case "AnnotationsShown":
        s.annotationsVisible = true;
        break;
      case "AnnotationsHidden":
        s.annotationsVisible = false;
        break;
      case "AnnotationExpanded":
        s.resume = s.mode;
        s.expanded = record.payload["annotation_id"] as string;
        s.mode = "AnnotationExpanded";
        s.playheadMs = record.offset_ms;
        break;
      case "AnnotationCollapsed":
        s.mode = s.resume;
        s.expanded = undefined;
        break;
      default:
        break;
    }
    return { seq: record.seq, feedback };
  }

  /** fetch() replacement wired into ApiClient. */
  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const json = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    if (input === "/api/projects" ) {
      return json(200, [{ id: "demo", title: "Demo", questions: 1 }]);
    }
    if (input === "/api/projects/demo") return json(200, this.project);
    if (input === "/api/projects/demo/navigation") return json(200, demoNavigation());
    if (input === "/api/sessions" && init?.method === "POST") {
      return json(201, { session_id: "fake-session", head_seq: this.state.headSeq });
    }
    if (input === "/api/sessions/fake-session/snapshot") {
      return json(200, this.snapshot());
    }
    if (input === "/api/sessions/fake-session/events" && init?.method === "POST") {
      const record = JSON.parse(String(init.body)) as EventRecord;
      const result = this.postEvent(record);
      if ("conflict" in result) {
        return json(409, { error: "SequenceConflict", head_seq: result.conflict });
      }
      return json(200, result);
    }
    if (input === "/api/sessions/fake-session/annotations" && init?.method === "POST") {
      this.state.headSeq += 1;
      return json(200, { seq: this.state.headSeq, annotation_id: `va-${this.state.headSeq}` });
    }
    return json(404, { detail: `no fake route for ${input}` });
  };
}

export async function flushAsync(): Promise<void> {
  for (let i = 0; i < 20; i += 1) {
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
