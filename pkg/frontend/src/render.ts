/**
 * DOM builders for cards and views. No state, no network: every function
 * takes data from a service response and returns an element.
 */

import type {
  CaseRecordResponse,
  DosePlanResponse,
  PredictionResponse,
} from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** "Ayrshire cattle - 96%" card with a distribution bar per label. */
export function predictionCard(
  prediction: PredictionResponse,
  labels: string[],
): HTMLElement {
  const card = el("div", prediction.inconclusive ? "card card-warning" : "card card-result");
  card.dataset.testid = "prediction-card";
  card.dataset.inconclusive = String(prediction.inconclusive);

  const headline = el("p", "headline", `${prediction.label} — ${prediction.confidence_percent}%`);
  headline.dataset.testid = "prediction-headline";
  card.append(headline);

  if (prediction.inconclusive) {
    const warning = el(
      "p",
      "warning-text",
      "Low confidence: the model is not sure. Retake the photo or override to continue.",
    );
    warning.dataset.testid = "inconclusive-warning";
    card.append(warning);
  }

  const bars = el("ul", "distribution");
  prediction.distribution.forEach((p, i) => {
    const item = el("li", "distribution-row");
    const name = labels[i] ?? `class ${i}`;
    const label = el("span", "distribution-label", name);
    const track = el("span", "bar-track");
    const fill = el("span", "bar-fill");
    fill.style.width = `${Math.round(p * 100)}%`;
    track.append(fill);
    const value = el("span", "distribution-value", `${Math.round(p * 100)}%`);
    item.append(label, track, value);
    bars.append(item);
  });
  card.append(bars);
  return card;
}

export function errorCard(status: number, code: string, message: string): HTMLElement {
  const card = el("div", "card card-error");
  card.dataset.testid = "error-card";
  card.dataset.code = code;
  card.append(el("p", "headline", `Request failed (${status})`));
  card.append(el("p", "error-text", `${message} [${code}]`));
  return card;
}

export function dosePlanCard(plan: DosePlanResponse): HTMLElement {
  const card = el("div", "card card-plan");
  card.dataset.testid = "dose-plan-card";
  card.append(el("p", "headline", `${plan.drug} for ${plan.disease}`));

  const rows: Array<[string, string]> = [
    ["dose", `${plan.dose_mg} mg per administration`],
    ["weight used", `${plan.weight_kg_used} kg`],
    ["schedule", `${plan.times_per_day}x per day for ${plan.duration_days} days`],
    ["route", plan.route],
  ];
  const list = el("dl", "plan-fields");
  for (const [field, value] of rows) {
    list.append(el("dt", undefined, field));
    const dd = el("dd", undefined, value);
    dd.dataset.field = field.replace(" ", "-");
    list.append(dd);
  }
  card.append(list);

  for (const warning of plan.warnings) {
    card.append(el("p", "warning-text", `Warning: ${warning}`));
  }
  for (const note of plan.notes) {
    card.append(el("p", "note-text", note));
  }
  return card;
}

export function terminalCard(kind: string, message: string): HTMLElement {
  const card = el("div", "card card-terminal");
  card.dataset.testid = "terminal-card";
  card.dataset.kind = kind;
  const heading =
    kind === "weigh_manually"
      ? "Weigh the animal manually"
      : "Consult a veterinarian";
  card.append(el("p", "headline", heading));
  card.append(el("p", "note-text", message));
  return card;
}

/** Mirrors one case record, field for field. */
export function caseView(record: CaseRecordResponse): HTMLElement {
  const view = el("div", "case-view");
  view.dataset.testid = "case-view";
  view.dataset.caseId = record.case_id;
  view.append(el("h3", undefined, `Case ${record.case_id}`));
  view.append(el("p", "case-created", record.created_at));

  const media = el("ul", "case-media");
  for (const item of record.media) {
    const li = el("li", undefined, `${item.kind} ${item.digest} (${item.size} bytes)`);
    li.dataset.digest = item.digest;
    li.dataset.kind = item.kind;
    li.dataset.size = String(item.size);
    media.append(li);
  }
  view.append(media);

  const predictions = el("ul", "case-predictions");
  for (const prediction of record.predictions) {
    const li = el(
      "li",
      undefined,
      `${prediction.task}: ${prediction.label} (${prediction.confidence_percent}%)`,
    );
    li.dataset.task = prediction.task;
    li.dataset.label = prediction.label;
    li.dataset.percent = String(prediction.confidence_percent);
    predictions.append(li);
  }
  view.append(predictions);

  if (record.dose_plan) {
    view.append(dosePlanCard(record.dose_plan));
  }
  return view;
}
