import { describe, expect, it } from "vitest";

import type { DosePlanResponse, PredictionResponse } from "../src/api.js";
import {
  canAdvance,
  initialWizardState,
  wizardReduce,
  type WizardEvent,
  type WizardState,
} from "../src/wizard.js";

function prediction(overrides: Partial<PredictionResponse> = {}): PredictionResponse {
  return {
    task: "disease_image",
    label: "Mastitis Disease",
    confidence: 0.93,
    confidence_percent: 93,
    distribution: [0.01, 0.01, 0.02, 0.01, 0.93, 0.01, 0.01],
    inconclusive: false,
    threshold: 0.5,
    case_id: "case-1",
    ...overrides,
  };
}

function plan(): DosePlanResponse {
  return {
    drug: "Sample Drug",
    disease: "Mastitis Disease",
    weight_kg_used: 61.23496995,
    dose_mg: 122.4699399,
    times_per_day: 2,
    duration_days: 5,
    route: "intramammary",
    warnings: [],
    notes: [],
  };
}

function run(events: WizardEvent[], from?: WizardState): WizardState {
  return events.reduce(wizardReduce, from ?? initialWizardState());
}

const HAPPY_TO_BODY: WizardEvent[] = [
  { type: "start_wizard" },
  { type: "disease_predicted", prediction: prediction() },
  { type: "accept_disease" },
  { type: "mouth_predicted", prediction: prediction({ task: "age_group", label: "1 to 5 Years_Mouth" }) },
  { type: "select_age_band", band: "y2" },
  { type: "accept_age" },
  { type: "body_predicted", prediction: prediction({ task: "weight_group", label: "93lbs-177lbs_Body" }) },
];

describe("wizard flow", () => {
  it("starts at choose_function", () => {
    expect(initialWizardState().step).toBe("choose_function");
  });

  it("walks the happy path to a plan", () => {
    const state = run([...HAPPY_TO_BODY, { type: "plan_ready", plan: plan() }]);
    expect(state.step).toBe("dose_result");
    expect(state.plan?.dose_mg).toBeCloseTo(122.47, 2);
    expect(state.terminal).toBeNull();
  });

  it("captures the case id from the first prediction", () => {
    const state = run(HAPPY_TO_BODY.slice(0, 2));
    expect(state.step).toBe("disease_result");
    expect(state.caseId).toBe("case-1");
  });
});

describe("gating", () => {
  it("blocks advancing past an inconclusive disease result", () => {
    const state = run([
      { type: "start_wizard" },
      { type: "disease_predicted", prediction: prediction({ inconclusive: true, confidence: 0.3 }) },
      { type: "accept_disease" },
    ]);
    expect(state.step).toBe("disease_result");
    expect(canAdvance(state, "disease_result")).toBe(false);
  });

  it("advances after an explicit override, and records it", () => {
    const state = run([
      { type: "start_wizard" },
      { type: "disease_predicted", prediction: prediction({ inconclusive: true }) },
      { type: "override", note: "farmer knows the herd history" },
      { type: "accept_disease" },
    ]);
    expect(state.step).toBe("mouth_capture");
    expect(state.overrides).toEqual([
      { step: "disease_result", note: "farmer knows the herd history" },
    ]);
  });

  it("requires an age band before leaving mouth_capture", () => {
    const state = run([
      ...HAPPY_TO_BODY.slice(0, 4),
      { type: "accept_age" },
    ]);
    expect(state.step).toBe("mouth_capture");
    const withBand = run([{ type: "select_age_band", band: "y3" }, { type: "accept_age" }], state);
    expect(withBand.step).toBe("body_capture");
  });

  it("requires a mouth prediction before leaving mouth_capture", () => {
    const state = run([
      { type: "start_wizard" },
      { type: "disease_predicted", prediction: prediction() },
      { type: "accept_disease" },
      { type: "select_age_band", band: "y2" },
      { type: "accept_age" },
    ]);
    expect(state.step).toBe("mouth_capture");
  });

  it("blocks the dose with an inconclusive weight result unless overridden", () => {
    const base = run([
      ...HAPPY_TO_BODY.slice(0, 6),
      {
        type: "body_predicted",
        prediction: prediction({ task: "weight_group", label: "Unknown", inconclusive: true }),
      },
    ]);
    expect(canAdvance(base, "body_capture")).toBe(false);
    const overriddenState = run([{ type: "override", note: "continue anyway" }], base);
    expect(canAdvance(overriddenState, "body_capture")).toBe(true);
  });
});

describe("re-upload invalidation", () => {
  it("a new disease upload clears everything downstream", () => {
    const deep = run(HAPPY_TO_BODY);
    expect(deep.step).toBe("body_capture");
    const reuploaded = wizardReduce(deep, {
      type: "disease_predicted",
      prediction: prediction({ label: "Lumpy Skin Disease", case_id: "case-1" }),
    });
    expect(reuploaded.step).toBe("disease_result");
    expect(reuploaded.mouth).toBeNull();
    expect(reuploaded.ageBand).toBeNull();
    expect(reuploaded.body).toBeNull();
    expect(reuploaded.plan).toBeNull();
  });

  it("a new mouth upload clears the body result and plan", () => {
    const atBody = run(HAPPY_TO_BODY);
    const back = run([{ type: "back" }], atBody);
    expect(back.step).toBe("mouth_capture");
    const remouthed = wizardReduce(back, {
      type: "mouth_predicted",
      prediction: prediction({ task: "age_group", label: "5 to 10 Years_Mouth" }),
    });
    expect(remouthed.body).toBeNull();
    expect(remouthed.mouth?.label).toBe("5 to 10 Years_Mouth");
  });
});

describe("terminal states", () => {
  it("unknown weight maps to the manual-weighing card", () => {
    const state = run([
      ...HAPPY_TO_BODY,
      {
        type: "dose_failed",
        status: 422,
        code: "needs_manual_weighing",
        message: "weigh the animal manually",
      },
    ]);
    expect(state.step).toBe("dose_result");
    expect(state.terminal?.kind).toBe("weigh_manually");
    expect(state.plan).toBeNull();
  });

  it.each([
    [404, "no_rule"],
    [409, "contraindicated"],
  ])("dosage %s/%s maps to consult-veterinarian", (status, code) => {
    const state = run([
      ...HAPPY_TO_BODY,
      { type: "dose_failed", status, code, message: "cannot dose" },
    ]);
    expect(state.terminal?.kind).toBe("consult_veterinarian");
  });
});

describe("navigation", () => {
  it("back walks dose_result -> body -> mouth -> disease_result -> capture -> home", () => {
    let state = run([...HAPPY_TO_BODY, { type: "plan_ready", plan: plan() }]);
    const expected = [
      "body_capture",
      "mouth_capture",
      "disease_result",
      "disease_capture",
      "choose_function",
      "choose_function",
    ];
    for (const step of expected) {
      state = wizardReduce(state, { type: "back" });
      expect(state.step).toBe(step);
    }
  });

  it("reset returns to a clean slate", () => {
    const state = run([...HAPPY_TO_BODY, { type: "reset" }]);
    expect(state).toEqual(initialWizardState());
  });
});
