// Console view state. Pure transition functions fed exclusively by server
// responses — the UI never predicts an outcome ("optimistic" updates would
// desynchronize the marks from the server's registry).

import type {
  ConfirmReply,
  Decision,
  EpisodeState,
  InstructReply,
  SceneSummary,
} from "./api.js";

export interface TimelineEntry {
  instruction: string;
  decision: Decision;
  graspedId: number | null;
  overridden: boolean;
  note: string;
}

export interface ConsoleViewState {
  scene: SceneSummary | null;
  episodeId: string | null;
  targetId: number | null;
  phase: string;
  imageUrl: string | null;
  pending: { decision: Decision; resolvedId: number | null } | null;
  diagnostics: { validPickSet: number[]; pickIsValid: boolean } | null;
  liveObjects: number[];
  timeline: TimelineEntry[];
  lastInstruction: string;
  error: string | null;
}

export function initialState(): ConsoleViewState {
  return {
    scene: null,
    episodeId: null,
    targetId: null,
    phase: "no_episode",
    imageUrl: null,
    pending: null,
    diagnostics: null,
    liveObjects: [],
    timeline: [],
    lastInstruction: "",
    error: null,
  };
}

export function withScene(
  state: ConsoleViewState,
  scene: SceneSummary,
  imageUrl: string,
): ConsoleViewState {
  return {
    ...initialState(),
    scene,
    imageUrl,
    liveObjects: scene.objects.map((o) => o.id),
  };
}

export function withEpisode(
  state: ConsoleViewState,
  episodeId: string,
  targetId: number | null,
): ConsoleViewState {
  return {
    ...state,
    episodeId,
    targetId,
    phase: "awaiting_instruction",
    pending: null,
    timeline: [],
    error: null,
  };
}

export function applyInstruct(
  state: ConsoleViewState,
  instruction: string,
  reply: InstructReply,
  base: string,
): ConsoleViewState {
  return {
    ...state,
    phase: reply.phase,
    pending: { decision: reply.decision, resolvedId: reply.resolved_id },
    diagnostics:
      reply.diagnostics.valid_pick_set !== undefined
        ? {
            validPickSet: reply.diagnostics.valid_pick_set,
            pickIsValid: reply.diagnostics.pick_is_valid ?? false,
          }
        : null,
    imageUrl: base + reply.image_url,
    lastInstruction: instruction,
    error: null,
  };
}

export function applyConfirm(
  state: ConsoleViewState,
  reply: ConfirmReply,
): ConsoleViewState {
  const timeline = state.timeline.slice();
  if (state.pending && reply.grasped_id !== undefined) {
    const done = reply.phase === "done";
    timeline.push({
      instruction: state.lastInstruction,
      decision: state.pending.decision,
      graspedId: reply.grasped_id ?? null,
      overridden: reply.overridden ?? false,
      note: done ? "target grasped" : `removed object ${reply.grasped_id}`,
    });
  }
  return {
    ...state,
    phase: reply.phase,
    pending: null,
    diagnostics: null,
    liveObjects: reply.live_objects,
    timeline,
    error: null,
  };
}

export function applyServerState(
  state: ConsoleViewState,
  server: EpisodeState,
): ConsoleViewState {
  return {
    ...state,
    episodeId: server.episode_id,
    targetId: server.target_id,
    phase: server.phase,
    liveObjects: server.live_objects,
    pending: server.pending
      ? { decision: server.pending.decision, resolvedId: server.pending.resolved_id }
      : null,
  };
}

export function withError(state: ConsoleViewState, message: string): ConsoleViewState {
  // 4xx handling: banner only, no state rollback needed because nothing
  // was changed locally in the first place
  return { ...state, error: message };
}
