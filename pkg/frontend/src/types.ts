/** Service payload shapes. Mirrors the REST API; the console never invents
 *  or mutates trajectory data client-side. */

export interface RoundManifest {
  round_index: number;
  model_tag_in: string;
  model_tag_out: string | null;
  dataset_ids: string[];
  filter_ids: string[];
  hint_ids: string[];
  counts: Record<string, number>;
}

export interface TaskSummary {
  task_id: string;
  group: string;
  description: string;
}

export interface TrajectorySummary {
  trajectory_id: string;
  task_id: string;
  model_tag: string;
  outcome: string;
  success: boolean | null;
  steps: number;
}

export interface StateRef {
  trajectory_id: string;
  step_index: number;
}

export interface Finding {
  finding_id: string;
  filter_id: string;
  round_index: number;
  state: StateRef;
  verdict_reasoning: string;
}

export interface StepDetail {
  index: number;
  monologue: string;
  code: string;
  observation: string;
  input_tokens: number;
  output_tokens: number;
  finding: Finding | null;
}

export interface TrajectoryDetail {
  trajectory_id: string;
  task_id: string;
  model_tag: string;
  outcome: { kind: string; detail?: string };
  success: boolean | null;
  steps: StepDetail[];
  task: TaskSummary | null;
}

export interface HintRecord {
  hint_id: string;
  text: string;
  kind: string;
  round_introduced: number;
  filter_id: string | null;
  author: string | null;
}

export interface DraftRecord {
  text: string;
  target_filter: string | null;
  author: string;
  previews: number;
}

export interface PreviewSample {
  monologue: string;
  code: string;
  diff: string;
}

export interface PreviewResult {
  original: { monologue: string; code: string };
  samples: PreviewSample[];
}
