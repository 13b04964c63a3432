/**
 * The dosage wizard state machine.
 *
 * Pure reducer: the app layer performs uploads and dose requests, then
 * feeds the outcomes in as events. A step only advances when the step
 * before it holds a non-inconclusive prediction, unless the farmer
 * explicitly overrides (the override is kept on the state and shown with
 * the case). Re-uploading at an earlier step throws away everything
 * downstream of it.
 */

import type { DosePlanResponse, PredictionResponse } from "./api.js";

export type WizardStep =
  | "choose_function"
  | "disease_capture"
  | "disease_result"
  | "mouth_capture"
  | "body_capture"
  | "dose_result";

export type TerminalKind = "weigh_manually" | "consult_veterinarian";

export interface TerminalState {
  kind: TerminalKind;
  message: string;
}

export interface OverrideNote {
  step: WizardStep;
  note: string;
}

export interface WizardState {
  step: WizardStep;
  caseId: string | null;
  disease: PredictionResponse | null;
  mouth: PredictionResponse | null;
  ageBand: string | null;
  body: PredictionResponse | null;
  plan: DosePlanResponse | null;
  terminal: TerminalState | null;
  overrides: OverrideNote[];
}

export type WizardEvent =
  | { type: "start_wizard" }
  | { type: "disease_predicted"; prediction: PredictionResponse }
  | { type: "accept_disease" }
  | { type: "override"; note: string }
  | { type: "mouth_predicted"; prediction: PredictionResponse }
  | { type: "select_age_band"; band: string }
  | { type: "accept_age" }
  | { type: "body_predicted"; prediction: PredictionResponse }
  | { type: "plan_ready"; plan: DosePlanResponse }
  | { type: "dose_failed"; status: number; code: string; message: string }
  | { type: "back" }
  | { type: "reset" };

export function initialWizardState(): WizardState {
  return {
    step: "choose_function",
    caseId: null,
    disease: null,
    mouth: null,
    ageBand: null,
    body: null,
    plan: null,
    terminal: null,
    overrides: [],
  };
}

function overridden(state: WizardState, step: WizardStep): boolean {
  return state.overrides.some((o) => o.step === step);
}

/** True when the wizard may move past the named result step. */
export function canAdvance(state: WizardState, from: WizardStep): boolean {
  switch (from) {
    case "disease_result":
      return state.disease !== null
        && (!state.disease.inconclusive || overridden(state, "disease_result"));
    case "mouth_capture":
      return state.mouth !== null
        && state.ageBand !== null
        && (!state.mouth.inconclusive || overridden(state, "mouth_capture"));
    case "body_capture":
      return state.body !== null
        && (!state.body.inconclusive || overridden(state, "body_capture"));
    default:
      return false;
  }
}

const BACK_TARGET: Partial<Record<WizardStep, WizardStep>> = {
  disease_capture: "choose_function",
  disease_result: "disease_capture",
  mouth_capture: "disease_result",
  body_capture: "mouth_capture",
  dose_result: "body_capture",
};

export function wizardReduce(state: WizardState, event: WizardEvent): WizardState {
  switch (event.type) {
    case "start_wizard":
      return { ...initialWizardState(), step: "disease_capture" };

    case "disease_predicted":
      // A fresh disease upload invalidates every later step.
      return {
        ...state,
        step: "disease_result",
        caseId: event.prediction.case_id,
        disease: event.prediction,
        mouth: null,
        ageBand: null,
        body: null,
        plan: null,
        terminal: null,
        overrides: state.overrides.filter((o) => o.step === "disease_result"),
      };

    case "accept_disease":
      if (state.step !== "disease_result" || !canAdvance(state, "disease_result")) {
        return state;
      }
      return { ...state, step: "mouth_capture" };

    case "override":
      if (
        state.step !== "disease_result"
        && state.step !== "mouth_capture"
        && state.step !== "body_capture"
      ) {
        return state;
      }
      return {
        ...state,
        overrides: [...state.overrides, { step: state.step, note: event.note }],
      };

    case "mouth_predicted":
      if (state.step !== "mouth_capture") return state;
      // Re-uploading the mouth image invalidates the body step and plan.
      return {
        ...state,
        mouth: event.prediction,
        body: null,
        plan: null,
        terminal: null,
      };

    case "select_age_band":
      if (state.step !== "mouth_capture") return state;
      return { ...state, ageBand: event.band };

    case "accept_age":
      if (state.step !== "mouth_capture" || !canAdvance(state, "mouth_capture")) {
        return state;
      }
      return { ...state, step: "body_capture" };

    case "body_predicted":
      if (state.step !== "body_capture") return state;
      return { ...state, body: event.prediction, plan: null, terminal: null };

    case "plan_ready":
      if (state.step !== "body_capture" || !canAdvance(state, "body_capture")) {
        return state;
      }
      return { ...state, step: "dose_result", plan: event.plan, terminal: null };

    case "dose_failed": {
      if (state.step !== "body_capture") return state;
      const terminal: TerminalState =
        event.code === "needs_manual_weighing"
          ? { kind: "weigh_manually", message: event.message }
          : { kind: "consult_veterinarian", message: event.message };
      return { ...state, step: "dose_result", plan: null, terminal };
    }

    case "back": {
      const target = BACK_TARGET[state.step];
      if (!target) return state;
      return { ...state, step: target, terminal: null };
    }

    case "reset":
      return initialWizardState();

    default:
      return state;
  }
}
