/** Pure reducer from service event frames to the inspector view state.
 *
 * Frames are applied in arrival order; sequence numbers are only used to
 * flag gaps, never to reorder. Stream-only frames (seq null) are ignored
 * for gap accounting.
 */

import type {
  ChatTurn,
  EventFrame,
  NarrativeVersion,
  ReflectionJobView,
  ViewState,
} from './types.js';

export function initialState(): ViewState {
  return {
    turns: [],
    threads: [],
    narratives: [],
    jobs: [],
    queue: null,
    pendingSend: false,
    lastSeq: null,
    gaps: [],
  };
}

function trackSeq(state: ViewState, frame: EventFrame): void {
  if (frame.seq === null || frame.seq === undefined) return;
  if (state.lastSeq !== null && frame.seq > state.lastSeq + 1) {
    for (let missing = state.lastSeq + 1; missing < frame.seq; missing++) {
      state.gaps.push(missing);
    }
  }
  if (state.lastSeq === null || frame.seq > state.lastSeq) {
    state.lastSeq = frame.seq;
  }
}

function upsertJob(state: ViewState, view: ReflectionJobView): void {
  const existing = state.jobs.find((j) => j.turnIndex === view.turnIndex);
  if (existing) {
    existing.status = view.status;
    existing.error = view.error;
  } else {
    state.jobs.push(view);
  }
}

export function reduce(state: ViewState, frame: EventFrame): ViewState {
  trackSeq(state, frame);
  const p = frame.payload ?? {};
  switch (frame.kind) {
    case 'user_message': {
      const turn: ChatTurn = {
        turnIndex: p.turn_index,
        user: p.content,
        assistant: null,
        latencyMs: null,
      };
      state.turns.push(turn);
      state.pendingSend = true;
      break;
    }
    case 'talker_response': {
      const turn = state.turns.find((t) => t.turnIndex === p.turn_index);
      if (turn) {
        turn.assistant = p.content;
        turn.latencyMs = p.latency_ms ?? null;
      }
      state.pendingSend = false;
      break;
    }
    case 'reflection_started':
      upsertJob(state, { turnIndex: p.turn_index, status: 'running', error: null });
      break;
    case 'threads_produced':
      state.threads.push({
        turnIndex: p.turn_index,
        goal: p.goal,
        reasoning: p.reasoning,
        memory: p.memory,
      });
      break;
    case 'narrative_updated': {
      const version: NarrativeVersion = {
        turnIndex: p.turn_index,
        text: p.text,
        stale: Boolean(p.stale),
        producedAtTurn: p.produced_at_turn ?? null,
      };
      state.narratives.push(version);
      if (!version.stale) {
        upsertJob(state, { turnIndex: p.turn_index, status: 'done', error: null });
      }
      break;
    }
    case 'job_failed':
      upsertJob(state, {
        turnIndex: p.turn_index,
        status: 'failed',
        error: p.error ?? 'reflection failed',
      });
      break;
    case 'queue_snapshot':
      state.queue = {
        meanLength: p.mean_length ?? 0,
        maxLength: p.max_length ?? 0,
        activeFraction: p.active_fraction ?? 0,
      };
      break;
    case 'heartbeat':
      break;
    default:
      // Unknown kinds are tolerated so old UIs survive new server events.
      break;
  }
  return state;
}

export function replay(frames: EventFrame[]): ViewState {
  return frames.reduce(reduce, initialState());
}

/** The latest narrative version, if any. */
export function currentNarrative(state: ViewState): NarrativeVersion | null {
  return state.narratives.length > 0
    ? state.narratives[state.narratives.length - 1]
    : null;
}

/** The version to diff the current narrative against: the most recent
 * earlier version, skipping stale repeats of the same bytes. */
export function previousNarrative(state: ViewState): NarrativeVersion | null {
  const current = currentNarrative(state);
  if (!current) return null;
  for (let i = state.narratives.length - 2; i >= 0; i--) {
    if (state.narratives[i].text !== current.text) return state.narratives[i];
  }
  return null;
}
