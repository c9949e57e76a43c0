/** Wire types mirroring the orchestrator REST records. */

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface LayoutEntry {
  object_ref: number | null;
  instance_index: number;
  caption: string;
  box: Box;
}

export interface Layout {
  canvas: [number, number];
  entries: LayoutEntry[];
}

export type Edit =
  | { op: "add"; caption: string; box: Box }
  | { op: "remove"; index: number }
  | { op: "move"; index: number; x: number; y: number }
  | { op: "resize"; index: number; w: number; h: number };

export interface LayoutDiff {
  edits: Edit[];
}

export interface Violation {
  kind: "out_of_bounds" | "non_positive_size" | "overlap";
  entry_index: number;
  other_index?: number;
  iou?: number;
}

export interface ValidationReport {
  clean: boolean;
  violations: Violation[];
}

export interface AuditEvent {
  seq: number;
  at: string;
  event: string;
  from?: string;
  to?: string;
  detail: Record<string, unknown>;
}

export interface SessionState {
  phase: string;
  edit_round: number;
  plan_cursor: number;
  artifacts: Record<string, string>;
  audit: AuditEvent[];
}

export interface PlanStep {
  kind: string;
  object_indices: number[];
  images_per_concept: number;
  questions: { object_index: number; text: string }[];
  reason: string;
}

export interface SessionView {
  id: string;
  prompt: string;
  mode: string;
  seed: number;
  analysis: {
    raw_prompt: string;
    objects: {
      phrase: string;
      noun: string;
      attributes: { kind: string; value: string }[];
      count: number;
    }[];
    relations: { subject_index: number; object_index: number; kind: string }[];
    category: string;
  } | null;
  layout: Layout | null;
  plan: { steps: PlanStep[]; local_edit_armed: boolean } | null;
  state: SessionState;
  composed_name: string | null;
  revision: number;
  artifact_urls: Record<string, string>;
}

export type Feedback =
  | { layout_diff: LayoutDiff }
  | { plan_override: { steps: Partial<PlanStep>[] } }
  | { verification_override: { passed: boolean } };
