import { describe, expect, it } from "vitest";

import type { CaseRecordResponse, PredictionResponse } from "../src/api.js";
import { caseView, dosePlanCard, errorCard, predictionCard, terminalCard } from "../src/render.js";

const LABELS = [
  "Ayrshire cattle",
  "Brown Swiss cattle",
  "Holstein Friesian cattle",
  "Jersey cattle",
  "Unknown",
];

function prediction(overrides: Partial<PredictionResponse> = {}): PredictionResponse {
  return {
    task: "breed",
    label: "Ayrshire cattle",
    confidence: 0.955,
    confidence_percent: 96,
    distribution: [0.955, 0.02, 0.015, 0.005, 0.005],
    inconclusive: false,
    threshold: 0.5,
    case_id: "c1",
    ...overrides,
  };
}

describe("predictionCard", () => {
  it("renders the label with the service's integer percent", () => {
    const card = predictionCard(prediction(), LABELS);
    const headline = card.querySelector('[data-testid="prediction-headline"]');
    expect(headline?.textContent).toBe("Ayrshire cattle — 96%");
    expect(card.dataset.inconclusive).toBe("false");
    expect(card.querySelector('[data-testid="inconclusive-warning"]')).toBeNull();
  });

  it("renders one distribution bar per label", () => {
    const card = predictionCard(prediction(), LABELS);
    const rows = card.querySelectorAll(".distribution-row");
    expect(rows.length).toBe(5);
    expect(rows[0].querySelector(".distribution-label")?.textContent).toBe("Ayrshire cattle");
  });

  it("marks inconclusive predictions as a warning card", () => {
    const card = predictionCard(
      prediction({ inconclusive: true, confidence: 0.2, confidence_percent: 20 }),
      LABELS,
    );
    expect(card.className).toContain("card-warning");
    expect(card.querySelector('[data-testid="inconclusive-warning"]')).not.toBeNull();
  });
});

describe("error and terminal cards", () => {
  it("errorCard carries the service code", () => {
    const card = errorCard(503, "no_model", "no model loaded for task breed");
    expect(card.dataset.code).toBe("no_model");
    expect(card.textContent).toContain("503");
    expect(card.textContent).toContain("no model loaded");
  });

  it("terminalCard names the advisory", () => {
    const weigh = terminalCard("weigh_manually", "weight group unknown");
    expect(weigh.textContent).toContain("Weigh the animal manually");
    const vet = terminalCard("consult_veterinarian", "age blocked");
    expect(vet.textContent).toContain("Consult a veterinarian");
  });
});

describe("dosePlanCard", () => {
  it("shows every plan field verbatim", () => {
    const card = dosePlanCard({
      drug: "Sample Drug",
      disease: "Mastitis Disease",
      weight_kg_used: 61.23496995,
      dose_mg: 122.4699399,
      times_per_day: 2,
      duration_days: 5,
      route: "intramammary",
      warnings: ["skipped Other Drug: requires age 2 years old or older"],
      notes: ["alternate: Other Drug at 5 mg/kg (oral)"],
    });
    expect(card.querySelector('[data-field="dose"]')?.textContent).toBe(
      "122.4699399 mg per administration",
    );
    expect(card.querySelector('[data-field="weight-used"]')?.textContent).toBe("61.23496995 kg");
    expect(card.querySelector('[data-field="schedule"]')?.textContent).toBe(
      "2x per day for 5 days",
    );
    expect(card.textContent).toContain("Warning: skipped Other Drug");
    expect(card.textContent).toContain("alternate: Other Drug");
  });
});

describe("caseView", () => {
  it("reconstructs the record field for field", () => {
    const record: CaseRecordResponse = {
      case_id: "deadbeef",
      created_at: "2024-05-01T10:00:00+00:00",
      media: [
        { digest: "a".repeat(64), kind: "image", size: 1234 },
        { digest: "b".repeat(64), kind: "video", size: 9876 },
      ],
      predictions: [
        prediction(),
        prediction({ task: "behavior_video", label: "Healthy", confidence_percent: 88 }),
      ],
      dose_plan: {
        drug: "Sample Drug",
        disease: "Mastitis Disease",
        weight_kg_used: 61.2,
        dose_mg: 122.4,
        times_per_day: 2,
        duration_days: 5,
        route: "oral",
        warnings: [],
        notes: [],
      },
    };
    const view = caseView(record);
    expect(view.dataset.caseId).toBe("deadbeef");
    expect(view.querySelector(".case-created")?.textContent).toBe(record.created_at);

    const media = [...view.querySelectorAll<HTMLElement>(".case-media li")].map((li) => ({
      digest: li.dataset.digest,
      kind: li.dataset.kind,
      size: Number(li.dataset.size),
    }));
    expect(media).toEqual(record.media);

    const predictions = [...view.querySelectorAll<HTMLElement>(".case-predictions li")].map(
      (li) => ({
        task: li.dataset.task,
        label: li.dataset.label,
        percent: Number(li.dataset.percent),
      }),
    );
    expect(predictions).toEqual(
      record.predictions.map((p) => ({
        task: p.task,
        label: p.label,
        percent: p.confidence_percent,
      })),
    );
    expect(view.querySelector('[data-testid="dose-plan-card"]')).not.toBeNull();
  });

  it("omits the plan card when the case has none", () => {
    const view = caseView({
      case_id: "c",
      created_at: "t",
      media: [],
      predictions: [],
      dose_plan: null,
    });
    expect(view.querySelector('[data-testid="dose-plan-card"]')).toBeNull();
  });
});
