// DOM wiring for the operator console. Two modes: command (instruct →
// preview → confirm/override) and annotation (describe a highlighted target,
// appended server-side to the instructions file).

import { ApiError, Client, SceneSummary } from "./api.js";
import {
  ConsoleViewState,
  applyConfirm,
  applyInstruct,
  initialState,
  withEpisode,
  withError,
  withScene,
} from "./state.js";

const client = new Client("");
let state: ConsoleViewState = initialState();
let annotationMode = false;
let annotationTarget: number | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function setState(next: ConsoleViewState): void {
  state = next;
  render();
}

function render(): void {
  const banner = $("error-banner");
  banner.textContent = state.error ?? "";
  banner.style.display = state.error ? "block" : "none";

  const img = $("scene-image") as HTMLImageElement;
  if (state.imageUrl) {
    // cache-bust so the refreshed marks are fetched after each grasp
    img.src = `${state.imageUrl}${state.imageUrl.includes("?") ? "&" : "?"}t=${Date.now()}`;
  }
  $("phase").textContent = state.phase;
  $("live-objects").textContent = state.liveObjects.join(", ");

  const pendingBox = $("pending");
  if (state.pending) {
    const d = state.pending.decision;
    pendingBox.style.display = "block";
    $("pending-summary").textContent =
      `mark ${d.mark_id} (${d.class})` + (d.is_target ? " — believed target" : "");
    $("pending-rationale").textContent = d.rationale;
    const diag = state.diagnostics;
    $("diagnostics").textContent = diag
      ? `valid picks: [${diag.validPickSet.join(", ")}] — ` +
        (diag.pickIsValid ? "pick is valid" : "pick is NOT valid")
      : "";
  } else {
    pendingBox.style.display = "none";
  }

  const list = $("timeline");
  list.innerHTML = "";
  for (const entry of state.timeline) {
    const li = document.createElement("li");
    li.textContent =
      `"${entry.instruction}" → mark ${entry.decision.mark_id}` +
      (entry.overridden ? " (overridden)" : "") +
      ` → ${entry.note}`;
    list.appendChild(li);
  }

  ($("instruct-btn") as HTMLButtonElement).disabled =
    state.episodeId === null || state.phase === "done";
  ($("confirm-btn") as HTMLButtonElement).disabled = state.pending === null;
  ($("reject-btn") as HTMLButtonElement).disabled = state.pending === null;
  ($("override-btn") as HTMLButtonElement).disabled = state.pending === null;
}

async function guard<T>(op: () => Promise<T>): Promise<T | null> {
  try {
    return await op();
  } catch (err) {
    if (err instanceof ApiError) {
      setState(withError(state, `${err.code}: ${err.message}`));
      return null;
    }
    throw err;
  }
}

async function selectScene(scene: SceneSummary): Promise<void> {
  setState(withScene(state, scene, client.sceneImageUrl(scene.scene_id, true)));
  const targetSel = $("target-select") as HTMLSelectElement;
  targetSel.innerHTML = "";
  for (const obj of scene.objects) {
    const opt = document.createElement("option");
    opt.value = String(obj.id);
    opt.textContent = `${obj.id}: ${obj.class} (${obj.difficulty})`;
    targetSel.appendChild(opt);
  }
}

async function startEpisode(): Promise<void> {
  if (!state.scene) return;
  const targetSel = $("target-select") as HTMLSelectElement;
  const targetId = targetSel.value ? Number(targetSel.value) : undefined;
  const reply = await guard(() =>
    client.createEpisode(state.scene!.scene_id, targetId),
  );
  if (reply) setState(withEpisode(state, reply.episode_id, targetId ?? null));
}

async function instruct(): Promise<void> {
  if (!state.episodeId) return;
  const text = ($("instruction-input") as HTMLInputElement).value;
  if (annotationMode && state.scene && annotationTarget !== null) {
    const row = await guard(() =>
      client.annotate(state.scene!.scene_id, annotationTarget!, text),
    );
    if (row) {
      $("annotation-status").textContent = `saved: ${row.instructions[0]}`;
      ($("instruction-input") as HTMLInputElement).value = "";
    }
    return;
  }
  const reply = await guard(() => client.instruct(state.episodeId!, text));
  if (reply) setState(applyInstruct(state, text, reply, client.base));
}

async function confirm(accept: boolean, overrideMark?: number): Promise<void> {
  if (!state.episodeId) return;
  const reply = await guard(() =>
    client.confirm(state.episodeId!, accept, overrideMark),
  );
  if (reply) setState(applyConfirm(state, reply));
}

async function boot(): Promise<void> {
  const { scenes } = await client.listScenes();
  const sel = $("scene-select") as HTMLSelectElement;
  for (const scene of scenes) {
    const opt = document.createElement("option");
    opt.value = scene.scene_id;
    opt.textContent = `${scene.scene_id} (${scene.n_objects} objects)`;
    sel.appendChild(opt);
  }
  sel.addEventListener("change", () => {
    const scene = scenes.find((s) => s.scene_id === sel.value);
    if (scene) void selectScene(scene);
  });
  $("start-btn").addEventListener("click", () => void startEpisode());
  $("instruct-btn").addEventListener("click", () => void instruct());
  $("confirm-btn").addEventListener("click", () => void confirm(true));
  $("reject-btn").addEventListener("click", () => void confirm(false));
  $("override-btn").addEventListener("click", () => {
    const mark = Number(($("override-input") as HTMLInputElement).value);
    if (Number.isInteger(mark) && mark >= 1) void confirm(true, mark);
  });
  $("annotation-toggle").addEventListener("change", (ev) => {
    annotationMode = (ev.target as HTMLInputElement).checked;
    const targetSel = $("target-select") as HTMLSelectElement;
    annotationTarget = targetSel.value ? Number(targetSel.value) : null;
    $("annotation-panel").style.display = annotationMode ? "block" : "none";
  });
  if (scenes.length > 0) {
    sel.value = scenes[0].scene_id;
    await selectScene(scenes[0]);
  }
}

window.addEventListener("DOMContentLoaded", () => void boot());
