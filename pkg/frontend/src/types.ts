/** Event frames as emitted by the session service's WebSocket stream. */

export type EventKind =
  | 'user_message'
  | 'talker_response'
  | 'reflection_started'
  | 'threads_produced'
  | 'narrative_updated'
  | 'job_failed'
  | 'queue_snapshot'
  | 'heartbeat';

export interface EventFrame {
  /** Session-relative sequence number; null for stream-only frames
   * (heartbeat, queue_snapshot) that are not part of the event log. */
  seq: number | null;
  kind: EventKind | string;
  payload: Record<string, any>;
  ts: number | null;
}

export interface ChatTurn {
  turnIndex: number;
  user: string;
  assistant: string | null;
  latencyMs: number | null;
}

export interface ThreadTriple {
  turnIndex: number;
  goal: string;
  reasoning: string;
  memory: string;
}

export interface NarrativeVersion {
  turnIndex: number;
  text: string;
  stale: boolean;
  producedAtTurn: number | null;
}

export type JobStatus = 'running' | 'done' | 'failed';

export interface ReflectionJobView {
  turnIndex: number;
  status: JobStatus;
  error: string | null;
}

export interface QueueView {
  meanLength: number;
  maxLength: number;
  activeFraction: number;
}

export interface ViewState {
  turns: ChatTurn[];
  threads: ThreadTriple[];
  narratives: NarrativeVersion[];
  jobs: ReflectionJobView[];
  queue: QueueView | null;
  /** True between a user_message and the matching talker_response:
   * the foreground request is in flight and sends must be blocked. */
  pendingSend: boolean;
  lastSeq: number | null;
  /** Sequence numbers that never arrived, flagged for the UI. */
  gaps: number[];
}
