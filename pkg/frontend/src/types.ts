/** Wire shapes from the gateway and the view state the reducer maintains. */

export interface EventEnvelope {
  seq: number;
  kind: string;
  at: string;
  payload: Record<string, any>;
}

export type StepStatus =
  | "pending"
  | "running"
  | "retrying"
  | "success"
  | "failed"
  | "goal-unmet";

export interface PlanStepView {
  step: number;
  toolName: string;
  label: string;
  status: StepStatus;
  attempts: number;
}

export interface ChatMessage {
  who: "user" | "agent";
  text: string;
}

export interface ReferenceView {
  title: string;
  url: string;
}

export interface ReportView {
  text: string;
  sections: string[];
  references: ReferenceView[];
}

export interface ClarificationView {
  question: string;
  preliminaryPlan: string;
}

export interface SessionView {
  phase: string;
  lastSeq: number;
  chat: ChatMessage[];
  plan: PlanStepView[];
  clarification: ClarificationView | null;
  artifacts: Record<number, unknown>;
  report: ReportView | null;
  failure: string | null;
}

export interface SessionHandle {
  session_id: string;
  created_at: string;
  phase: string;
  objective: string;
}

export const TERMINAL_PHASES = new Set(["Done", "Failed"]);
