// Wire types mirroring the planning service's JSON bodies.

export interface EnvironmentData {
  assets: string[];
  asset_states: Record<string, string | string[]>;
  objects: string[];
  object_states: Record<string, string | string[]>;
}

export interface DiffEntityChange {
  name: string;
  added: string[];
  removed: string[];
}

export interface DiffEntityEntry {
  name: string;
  kind: string;
  states: string[];
}

export interface EnvDiffData {
  changed: DiffEntityChange[];
  added_entities: DiffEntityEntry[];
  removed_entities: DiffEntityEntry[];
}

export interface TaskCohesion {
  task_sequence: string[];
  step_instructions: string[];
  object_name: string | string[];
}

export interface PlanData {
  task_cohesion: TaskCohesion;
  environment_before: EnvironmentData;
  environment_after: EnvironmentData;
  instruction_summary: string;
  question: string;
}

export interface FeedbackData {
  source: "auto" | "human";
  text: string;
  trigger: Record<string, unknown> | null;
}

export interface AttemptData {
  response_text: string;
  plan: PlanData | null;
  errors: Record<string, unknown>[];
  feedback: FeedbackData | null;
  warnings: string[];
  env_diff: EnvDiffData | null;
}

export interface ExchangeData {
  index: number;
  instruction: string;
  outcome: string;
  approved_attempt: number | null;
  attempts: AttemptData[];
}

export interface SessionSummary {
  id: string;
  action_set: string;
  prompt_set: string;
  created_at: string;
  updated_at: string;
  initial_environment: EnvironmentData;
  current_environment: EnvironmentData;
  exchanges: ExchangeData[];
}

export interface LoopResultData {
  outcome: string;
  rounds_used: number;
  final_plan: PlanData | null;
  transcript: Omit<AttemptData, "env_diff">[];
}

export interface StatusData {
  running: boolean;
  round: number;
  last_feedback: string | null;
}

export interface AttemptRef {
  exchange: number;
  attempt: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}
