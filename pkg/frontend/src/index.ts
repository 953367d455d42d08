/** Page bootstrap: mount the player against the server on the same origin. */

import { ApiClient } from "./api";
import { PlayerController, PlayerElements } from "./player";

function requireElement<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export async function mountPlayer(): Promise<PlayerController> {
  const api = new ApiClient("");
  const params = new URLSearchParams(window.location.search);
  const projects = await api.listProjects();
  if (projects.length === 0) throw new Error("no projects on the server");
  const projectId = params.get("project") ?? projects[0].id;
  const viewerId = params.get("viewer") ?? `viewer-${Math.random().toString(36).slice(2, 8)}`;

  const video = requireElement<HTMLVideoElement>("player-video");
  const dom: PlayerElements = {
    overlayLayer: requireElement("overlay-layer"),
    annotationRegion: requireElement("annotation-region"),
    playPauseButton: requireElement<HTMLButtonElement>("play-pause"),
    overviewButton: requireElement<HTMLButtonElement>("open-overview"),
    seekBar: requireElement<HTMLInputElement>("seek-bar"),
    statusLine: requireElement("status-line"),
  };
  return PlayerController.start(api, projectId, viewerId, video, dom);
}

if (typeof document !== "undefined" && document.getElementById("player-video")) {
  void mountPlayer();
}
