// Typed client for the harness HTTP service. Every mutation returns the
// server's echo; callers must render from these responses only.

export interface SceneObject {
  id: number;
  class: string;
  center: [number, number];
  difficulty: string;
}

export interface SceneSummary {
  scene_id: string;
  n_objects: number;
  classes: string[];
  objects: SceneObject[];
}

export interface Decision {
  mark_id: number;
  class: string;
  is_target: boolean;
  rationale: string;
}

export interface InstructReply {
  phase: string;
  decision: Decision;
  resolved_id: number | null;
  image_url: string;
  diagnostics: { valid_pick_set?: number[]; pick_is_valid?: boolean };
}

export interface ConfirmReply {
  phase: string;
  grasped_id?: number | null;
  overridden?: boolean;
  live_objects: number[];
}

export interface EpisodeState {
  episode_id: string;
  scene_id: string;
  target_id: number | null;
  phase: string;
  live_objects: number[];
  pending: { decision: Decision; resolved_id: number | null } | null;
  log: Array<{
    instruction: string;
    decision: Decision;
    grasped_id: number | null;
    overridden: boolean;
    live_after: number[];
  }>;
}

export interface AnnotationRow {
  scene_id: string;
  target_id: number;
  instructions: string[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!resp.ok) {
    let code = "HttpError";
    let message = `HTTP ${resp.status}`;
    try {
      const body = await resp.json();
      if (body && body.detail) {
        code = body.detail.code ?? code;
        message = body.detail.message ?? message;
      }
    } catch {
      // non-JSON error body: keep the generic message
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class Client {
  constructor(public base: string) {}

  listScenes(): Promise<{ scenes: SceneSummary[] }> {
    return request(this.base, "/scenes");
  }

  sceneImageUrl(sceneId: string, marks: boolean): string {
    return `${this.base}/scenes/${sceneId}/image${marks ? "?marks=1" : ""}`;
  }

  createEpisode(sceneId: string, targetId?: number): Promise<{ episode_id: string }> {
    return request(this.base, "/episodes", {
      method: "POST",
      body: JSON.stringify({ scene_id: sceneId, target_id: targetId ?? null }),
    });
  }

  instruct(episodeId: string, text: string): Promise<InstructReply> {
    return request(this.base, `/episodes/${episodeId}/instruct`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  confirm(
    episodeId: string,
    accept: boolean,
    overrideMark?: number,
  ): Promise<ConfirmReply> {
    return request(this.base, `/episodes/${episodeId}/confirm`, {
      method: "POST",
      body: JSON.stringify({ accept, override_mark: overrideMark ?? null }),
    });
  }

  episodeState(episodeId: string): Promise<EpisodeState> {
    return request(this.base, `/episodes/${episodeId}/state`);
  }

  annotate(sceneId: string, targetId: number, text: string): Promise<AnnotationRow> {
    return request(this.base, "/annotations", {
      method: "POST",
      body: JSON.stringify({ scene_id: sceneId, target_id: targetId, text }),
    });
  }
}
