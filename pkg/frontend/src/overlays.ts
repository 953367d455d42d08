/** Overlay rendering: question, fork, overview, annotation boxes.
 *
 * Exactly one modal overlay is ever mounted; the caller clears the layer
 * before rendering the next one. Renderers build DOM and wire callbacks but
 * never touch the network or the video element themselves.
 */

import { formatTimestamp } from "./format";
import type {
  AnnotationBox,
  AnswerFeedback,
  ForkPayload,
  NavigationEntry,
  QuestionPayload,
} from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function clearOverlay(layer: HTMLElement): void {
  layer.replaceChildren();
}

/** Question overlay: choices, then colored feedback with a continue control.
 * The intended answer turns green, the others red; there is no retry and no
 * countdown. */
export function renderQuestion(
  layer: HTMLElement,
  question: QuestionPayload,
  feedback: AnswerFeedback | undefined,
  handlers: {
    onAnswer: (index: number) => void;
    onContinue: () => void;
  },
): HTMLElement {
  clearOverlay(layer);
  const overlay = el("div", "overlay overlay-question");
  overlay.setAttribute("role", "dialog");
  overlay.appendChild(el("h2", "overlay-prompt", question.prompt));

  const list = el("div", "question-choices");
  question.choices.forEach((choice, index) => {
    const button = el("button", "choice", choice);
    button.dataset.index = String(index);
    if (feedback === undefined) {
      button.addEventListener("click", () => {
        for (const other of list.querySelectorAll("button")) {
          other.disabled = true;
        }
        handlers.onAnswer(index);
      });
    } else {
      button.disabled = true;
      if (index === feedback.correct_index) {
        button.classList.add("choice-correct");
      } else {
        button.classList.add("choice-wrong");
      }
      if (index === feedback.chosen_index) {
        button.classList.add("choice-chosen");
      }
    }
    list.appendChild(button);
  });
  overlay.appendChild(list);

  if (feedback !== undefined) {
    const verdict = feedback.correct ? "That is the intended answer." : "Not the intended answer.";
    overlay.appendChild(el("p", "question-verdict", verdict));
    const cont = el("button", "continue", "Continue");
    cont.addEventListener("click", handlers.onContinue);
    overlay.appendChild(cont);
  }
  layer.appendChild(overlay);
  return overlay;
}

/** Fork overlay: one button per option, nothing else; no timer. */
export function renderFork(
  layer: HTMLElement,
  fork: ForkPayload,
  handlers: { onChoose: (optionId: string) => void },
): HTMLElement {
  clearOverlay(layer);
  const overlay = el("div", "overlay overlay-fork");
  overlay.setAttribute("role", "dialog");
  overlay.appendChild(el("h2", "overlay-prompt", fork.prompt));
  const list = el("div", "fork-options");
  for (const option of fork.options) {
    const button = el("button", "fork-option", option.label);
    button.dataset.optionId = option.option_id;
    button.addEventListener("click", () => {
      for (const other of list.querySelectorAll("button")) {
        other.disabled = true;
      }
      handlers.onChoose(option.option_id);
    });
    list.appendChild(button);
  }
  overlay.appendChild(list);
  layer.appendChild(overlay);
  return overlay;
}

/** Overview modal: timestamp, title and category badge per entry. */
export function renderOverview(
  layer: HTMLElement,
  entries: NavigationEntry[],
  visited: ReadonlySet<string>,
  handlers: { onNavigate: (node: string) => void; onClose: () => void },
): HTMLElement {
  clearOverlay(layer);
  const overlay = el("div", "overlay overlay-overview");
  overlay.setAttribute("role", "dialog");
  overlay.appendChild(el("h2", "overlay-prompt", "Scene overview"));
  const list = el("ul", "overview-list");
  for (const entry of entries) {
    const item = el("li", "overview-entry");
    item.appendChild(el("span", "overview-time", formatTimestamp(entry.timeline_position_ms)));
    const pick = el("button", "overview-title", entry.title);
    pick.dataset.node = entry.node;
    if (visited.has(entry.node)) {
      pick.addEventListener("click", () => handlers.onNavigate(entry.node));
    } else {
      pick.disabled = true;
      pick.title = "Not seen yet";
    }
    item.appendChild(pick);
    item.appendChild(el("span", `overview-badge badge-${entry.category}`, entry.category));
    list.appendChild(item);
  }
  overlay.appendChild(list);
  const close = el("button", "close", "Close");
  close.addEventListener("click", handlers.onClose);
  overlay.appendChild(close);
  layer.appendChild(overlay);
  return overlay;
}

/** Annotation region: the top-right toggle plus collapsed boxes while
 * playing. The toggle grays out when nothing anchors here; collapsed boxes
 * never pause playback, expanding is the caller's (pausing) action. */
export function renderAnnotationRegion(
  region: HTMLElement,
  boxes: AnnotationBox[],
  visible: boolean,
  canToggle: boolean,
  handlers: {
    onToggle: () => void;
    onExpand: (annotationId: string) => void;
    onCompose: () => void;
  },
): void {
  region.replaceChildren();
  const toggle = el("button", "annotation-toggle", visible ? "Hide annotations" : "Show annotations");
  toggle.disabled = !canToggle;
  if (!canToggle) toggle.classList.add("grayed");
  toggle.addEventListener("click", handlers.onToggle);
  region.appendChild(toggle);

  if (visible) {
    const rail = el("div", "annotation-rail");
    for (const box of boxes) {
      const chip = el("button", `annotation-box author-${box.author_kind}`, box.title);
      chip.dataset.annotationId = box.annotation_id;
      chip.addEventListener("click", () => handlers.onExpand(box.annotation_id));
      rail.appendChild(chip);
    }
    region.appendChild(rail);
  }

  const compose = el("button", "annotation-compose", "Add note");
  compose.addEventListener("click", handlers.onCompose);
  region.appendChild(compose);
}

/** Expanded annotation overlay: full body, pauses handled by the caller. */
export function renderExpandedAnnotation(
  layer: HTMLElement,
  annotation: {
    annotation_id: string;
    title: string;
    body: { type: string; value: string }[];
  },
  handlers: { onCollapse: () => void },
): HTMLElement {
  clearOverlay(layer);
  const overlay = el("div", "overlay overlay-annotation");
  overlay.setAttribute("role", "dialog");
  overlay.appendChild(el("h2", "overlay-prompt", annotation.title));
  const body = el("div", "annotation-body");
  for (const item of annotation.body) {
    if (item.type === "link") {
      const anchor = el("a", "annotation-link", item.value);
      anchor.href = item.value;
      anchor.target = "_blank";
      body.appendChild(anchor);
    } else if (item.type === "image") {
      const img = document.createElement("img");
      img.className = "annotation-image";
      img.src = item.value;
      body.appendChild(img);
    } else {
      body.appendChild(el("p", `annotation-${item.type}`, item.value));
    }
  }
  overlay.appendChild(body);
  const collapse = el("button", "collapse", "Back to the video");
  collapse.addEventListener("click", handlers.onCollapse);
  overlay.appendChild(collapse);
  layer.appendChild(overlay);
  return overlay;
}
