/** Pure fold from run-record events to the session view. Replaying the same
 * events always rebuilds the identical view; nothing here invents state the
 * stream did not carry. */

import type { EventEnvelope, PlanStepView, SessionView, StepStatus } from "./types.js";

export function initialView(): SessionView {
  return {
    phase: "Objective",
    lastSeq: -1,
    chat: [],
    plan: [],
    clarification: null,
    artifacts: {},
    report: null,
    failure: null,
  };
}

function withStep(
  view: SessionView,
  step: number,
  update: (s: PlanStepView) => PlanStepView,
): SessionView {
  return {
    ...view,
    plan: view.plan.map((s) => (s.step === step ? update(s) : s)),
  };
}

export function reduce(view: SessionView, event: EventEnvelope): SessionView {
  if (event.seq <= view.lastSeq) {
    return view; // replayed duplicate; the stream is gapless otherwise
  }
  const next = applyEvent({ ...view, lastSeq: event.seq }, event);
  return next;
}

function applyEvent(view: SessionView, event: EventEnvelope): SessionView {
  const p = event.payload;
  switch (event.kind) {
    case "phase_change": {
      const out = { ...view, phase: p.to as string };
      if (typeof p.objective === "string") {
        out.chat = [...view.chat, { who: "user", text: p.objective }];
      }
      if (p.to === "Failed") {
        out.failure = (p.reason as string) ?? "failed";
      }
      return out;
    }
    case "response": {
      if (p.parsed?.kind === "plan" && Array.isArray(p.parsed.steps)) {
        const plan: PlanStepView[] = p.parsed.steps.map((s: any) => ({
          step: s.step,
          toolName: s.tool_name,
          label: s.task_description ?? "",
          status: "pending" as StepStatus,
          attempts: 0,
        }));
        return { ...view, plan };
      }
      return view;
    }
    case "cb_instruction": {
      if (p.escalation) {
        return view;
      }
      return withStep(view, p.step, (s) => ({ ...s, status: "running" }));
    }
    case "tool_invocation": {
      return withStep(view, p.step, (s) => ({
        ...s,
        status: "running",
        attempts: s.attempts + 1,
      }));
    }
    case "retry": {
      return withStep(view, p.step, (s) => ({ ...s, status: "retrying" }));
    }
    case "tool_result": {
      if (!p.final) {
        return view;
      }
      const status: StepStatus = !p.success
        ? "failed"
        : p.goal_met === "unmet"
          ? "goal-unmet"
          : "success";
      const updated = withStep(view, p.step, (s) => ({ ...s, status }));
      return {
        ...updated,
        artifacts: { ...view.artifacts, [p.step]: p.artifact },
      };
    }
    case "clarification_request": {
      return {
        ...view,
        clarification: {
          question: p.question ?? "",
          preliminaryPlan: p.preliminary_plan ?? "",
        },
        chat: [...view.chat, { who: "agent", text: p.question ?? "" }],
      };
    }
    case "clarification_answer": {
      return {
        ...view,
        clarification: null,
        chat: [...view.chat, { who: "user", text: p.answer ?? "" }],
      };
    }
    case "report": {
      return {
        ...view,
        report: {
          text: p.text ?? "",
          sections: p.sections ?? [],
          references: (p.references ?? []).map((r: any) => ({
            title: r.title ?? "",
            url: r.url ?? "",
          })),
        },
      };
    }
    default:
      return view; // prompt/audit and future kinds carry no view state
  }
}

export function reduceAll(events: Iterable<EventEnvelope>): SessionView {
  let view = initialView();
  for (const event of events) {
    view = reduce(view, event);
  }
  return view;
}
