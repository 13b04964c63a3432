/**
 * Application controller: function tiles for one-shot predictions plus the
 * gated dosage wizard. All state lives in memory except the current case
 * id, which the service threads via X-Case-Id.
 */

import {
  ApiError,
  PREDICT_SLUGS,
  TaurusApi,
  VIDEO_SLUG,
  type PredictionResponse,
} from "./api.js";
import {
  caseView,
  dosePlanCard,
  errorCard,
  predictionCard,
  terminalCard,
} from "./render.js";
import {
  canAdvance,
  initialWizardState,
  wizardReduce,
  type WizardEvent,
  type WizardState,
} from "./wizard.js";

const TILES: Array<{ slug: string; task: string; title: string; video?: boolean }> = [
  { slug: "breed", task: "breed", title: "Identify breed" },
  { slug: "disease-image", task: "disease_image", title: "Diagnose from a photo" },
  { slug: VIDEO_SLUG, task: "behavior_video", title: "Diagnose from behavior video", video: true },
  { slug: "age", task: "age_group", title: "Estimate age group" },
  { slug: "weight", task: "weight_group", title: "Estimate weight group" },
];

const WIZARD_CAPTURE_SLUGS: Partial<Record<WizardState["step"], string>> = {
  disease_capture: "disease-image",
  disease_result: "disease-image",
  mouth_capture: "age",
  body_capture: "weight",
};

export const AGE_BANDS: Array<{ value: string; display: string }> = [
  { value: "under_2", display: "Less than 2 years old" },
  { value: "y2", display: "2 years old" },
  { value: "y3", display: "3 years old" },
  { value: "y4", display: "4 years old" },
  { value: "y5", display: "5 years old" },
  { value: "over_6", display: "Older than 6 years" },
  { value: "about_12", display: "About 12 years" },
];

export class TaurusApp {
  state: WizardState = initialWizardState();

  private readonly inflight = new Map<string, AbortController>();
  private readonly labelsCache = new Map<string, string[]>();
  private root: HTMLElement | null = null;
  private wizardPanel: HTMLElement | null = null;
  private casePanel: HTMLElement | null = null;
  private loadedTasks: string[] = [];

  constructor(readonly api: TaurusApi = new TaurusApi()) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    root.innerHTML = "";
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "Taurus herd assistant";
    header.append(title);
    root.append(header);

    const tiles = document.createElement("div");
    tiles.className = "tiles";
    tiles.dataset.testid = "tiles";
    for (const tile of TILES) {
      tiles.append(this.buildTile(tile));
    }
    root.append(tiles);

    this.wizardPanel = document.createElement("section");
    this.wizardPanel.className = "wizard";
    this.wizardPanel.dataset.testid = "wizard";
    root.append(this.wizardPanel);

    this.casePanel = document.createElement("section");
    this.casePanel.className = "case-panel";
    this.casePanel.dataset.testid = "case-panel";
    root.append(this.casePanel);

    try {
      const health = await this.api.health();
      this.loadedTasks = health.tasks;
    } catch {
      this.loadedTasks = [];
    }
    this.applyTileAvailability();
    this.renderWizard();
  }

  private buildTile(tile: { slug: string; task: string; title: string; video?: boolean }): HTMLElement {
    const section = document.createElement("section");
    section.className = "tile";
    section.dataset.slug = tile.slug;
    section.dataset.task = tile.task;

    const heading = document.createElement("h3");
    heading.textContent = tile.title;
    section.append(heading);

    const input = document.createElement("input");
    input.type = "file";
    // Camera capture on mobile browsers; the video tile takes a zip of frames.
    input.accept = tile.video ? ".zip,video/*" : "image/*";
    if (!tile.video) input.setAttribute("capture", "environment");
    section.append(input);

    const submit = document.createElement("button");
    submit.className = "submit";
    submit.textContent = "Analyze";
    submit.addEventListener("click", () => {
      const file = input.files?.[0];
      if (file) void this.submitMedia(tile.slug, file);
    });
    section.append(submit);

    const cancel = document.createElement("button");
    cancel.className = "cancel";
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => this.cancelUpload(tile.slug));
    section.append(cancel);

    const result = document.createElement("div");
    result.className = "result";
    section.append(result);
    return section;
  }

  private applyTileAvailability(): void {
    if (!this.root) return;
    for (const section of this.root.querySelectorAll<HTMLElement>(".tile")) {
      const task = section.dataset.task ?? "";
      const available = this.loadedTasks.includes(task);
      const submit = section.querySelector<HTMLButtonElement>("button.submit");
      if (submit) submit.disabled = !available;
      section.classList.toggle("tile-disabled", !available);
      if (!available) {
        section.title = "Model not loaded on the server";
      } else {
        section.removeAttribute("title");
      }
    }
  }

  /** One in-flight upload per tile: a new submit aborts the previous one. */
  cancelUpload(slug: string): void {
    this.inflight.get(slug)?.abort();
    this.inflight.delete(slug);
  }

  private labelsFor(task: string): Promise<string[]> {
    const cached = this.labelsCache.get(task);
    if (cached) return Promise.resolve(cached);
    return this.api.labels(task).then((space) => {
      this.labelsCache.set(task, space.labels);
      return space.labels;
    });
  }

  /**
   * Upload one media file to a function tile's endpoint and render the
   * outcome card into the tile. Returns the prediction (null when the
   * request failed or was superseded).
   */
  async submitMedia(slug: string, file: File): Promise<PredictionResponse | null> {
    this.cancelUpload(slug);
    const controller = new AbortController();
    this.inflight.set(slug, controller);
    const section = this.root?.querySelector<HTMLElement>(`.tile[data-slug="${slug}"]`);
    const resultBox = section?.querySelector<HTMLElement>(".result") ?? null;
    if (resultBox) resultBox.textContent = "Analyzing…";
    try {
      const prediction = await this.api.predict(slug, file, this.state.caseId, controller.signal);
      const task = prediction.task;
      const labels = await this.labelsFor(task);
      if (resultBox) {
        resultBox.innerHTML = "";
        resultBox.append(predictionCard(prediction, labels));
      }
      if (!this.state.caseId) {
        this.state = { ...this.state, caseId: prediction.case_id };
        this.renderCaseLine();
      }
      return prediction;
    } catch (error) {
      if (controller.signal.aborted) {
        if (resultBox) resultBox.textContent = "Canceled.";
        return null;
      }
      if (resultBox) {
        resultBox.innerHTML = "";
        resultBox.append(this.errorNode(error));
      }
      return null;
    } finally {
      if (this.inflight.get(slug) === controller) this.inflight.delete(slug);
    }
  }

  private errorNode(error: unknown): HTMLElement {
    if (error instanceof ApiError) {
      return errorCard(error.status, error.code, error.message);
    }
    return errorCard(0, "network", String(error));
  }

  // ----- wizard ---------------------------------------------------------

  dispatch(event: WizardEvent): void {
    this.state = wizardReduce(this.state, event);
    this.renderWizard();
  }

  /** Upload the capture for the wizard's current step and fold it in. */
  async wizardCapture(file: File): Promise<void> {
    const slug = WIZARD_CAPTURE_SLUGS[this.state.step];
    if (!slug) return;
    const controller = new AbortController();
    this.cancelUpload(`wizard-${slug}`);
    this.inflight.set(`wizard-${slug}`, controller);
    try {
      const prediction = await this.api.predict(slug, file, this.state.caseId, controller.signal);
      if (slug === "disease-image") {
        this.dispatch({ type: "disease_predicted", prediction });
      } else if (slug === "age") {
        this.dispatch({ type: "mouth_predicted", prediction });
      } else {
        this.dispatch({ type: "body_predicted", prediction });
      }
    } catch (error) {
      this.renderWizardError(error);
    } finally {
      this.inflight.delete(`wizard-${slug}`);
    }
  }

  /** POST /dosage from the wizard's accumulated answers. */
  async submitDoseRequest(): Promise<void> {
    const { disease, ageBand, body, caseId } = this.state;
    if (!disease || !ageBand || !body || !canAdvance(this.state, "body_capture")) return;
    try {
      const plan = await this.api.requestDose({
        disease: disease.label,
        age_band: ageBand,
        weight_group: body.label,
        ...(caseId ? { case_id: caseId } : {}),
      });
      this.dispatch({ type: "plan_ready", plan });
    } catch (error) {
      if (error instanceof ApiError) {
        this.dispatch({
          type: "dose_failed",
          status: error.status,
          code: error.code,
          message: error.message,
        });
      } else {
        this.renderWizardError(error);
      }
    }
  }

  async showCase(): Promise<void> {
    if (!this.casePanel || !this.state.caseId) return;
    try {
      const record = await this.api.fetchCase(this.state.caseId);
      this.casePanel.innerHTML = "";
      this.casePanel.append(caseView(record));
    } catch (error) {
      this.casePanel.innerHTML = "";
      this.casePanel.append(this.errorNode(error));
    }
  }

  // ----- wizard rendering -------------------------------------------------

  private renderCaseLine(): void {
    this.renderWizard();
  }

  private renderWizardError(error: unknown): void {
    const holder = this.wizardPanel?.querySelector<HTMLElement>(".wizard-error");
    if (holder) {
      holder.innerHTML = "";
      holder.append(this.errorNode(error));
    }
  }

  private button(label: string, testid: string, onClick: () => void, disabled = false): HTMLButtonElement {
    const node = document.createElement("button");
    node.textContent = label;
    node.dataset.testid = testid;
    node.disabled = disabled;
    node.addEventListener("click", onClick);
    return node;
  }

  private captureInput(): HTMLElement {
    const wrap = document.createElement("div");
    const input = document.createElement("input");
    input.type = "file";
    input.accept = "image/*";
    input.setAttribute("capture", "environment");
    input.dataset.testid = "wizard-file";
    wrap.append(input);
    wrap.append(
      this.button("Upload", "wizard-upload", () => {
        const file = input.files?.[0];
        if (file) void this.wizardCapture(file);
      }),
    );
    return wrap;
  }

  private renderWizard(): void {
    const panel = this.wizardPanel;
    if (!panel) return;
    panel.innerHTML = "";
    panel.dataset.step = this.state.step;

    const heading = document.createElement("h2");
    heading.textContent = "Dosage wizard";
    panel.append(heading);

    if (this.state.caseId) {
      const caseLine = document.createElement("p");
      caseLine.className = "case-line";
      caseLine.dataset.testid = "case-line";
      caseLine.textContent = `Case ${this.state.caseId}`;
      panel.append(caseLine);
      panel.append(this.button("View case", "view-case", () => void this.showCase()));
    }

    const body = document.createElement("div");
    body.className = "wizard-body";
    panel.append(body);

    const errorHolder = document.createElement("div");
    errorHolder.className = "wizard-error";
    panel.append(errorHolder);

    switch (this.state.step) {
      case "choose_function": {
        body.append(
          this.button("Start diagnosis and dosing", "start-wizard", () =>
            this.dispatch({ type: "start_wizard" }),
          ),
        );
        break;
      }
      case "disease_capture": {
        body.append(this.stepTitle("Step 1: photograph the affected area"));
        body.append(this.captureInput());
        break;
      }
      case "disease_result": {
        body.append(this.stepTitle("Disease result"));
        if (this.state.disease) {
          void this.labelsFor("disease_image").then((labels) => {
            body.prepend(predictionCard(this.state.disease!, labels));
          });
          body.append(
            this.button(
              "Continue",
              "wizard-continue",
              () => this.dispatch({ type: "accept_disease" }),
              !canAdvance(this.state, "disease_result"),
            ),
          );
          if (this.state.disease.inconclusive && !canAdvance(this.state, "disease_result")) {
            body.append(
              this.button("Override and continue anyway", "wizard-override", () =>
                this.dispatch({ type: "override", note: "farmer overrode inconclusive disease result" }),
              ),
            );
          }
          body.append(this.stepTitle("Or retake the photo:"));
          body.append(this.captureInput());
        }
        break;
      }
      case "mouth_capture": {
        body.append(this.stepTitle("Step 2: photograph the mouth, then confirm the age band"));
        body.append(this.captureInput());
        const select = document.createElement("select");
        select.dataset.testid = "age-band-select";
        const placeholder = document.createElement("option");
        placeholder.value = "";
        placeholder.textContent = "Select dentition age band…";
        select.append(placeholder);
        for (const band of AGE_BANDS) {
          const option = document.createElement("option");
          option.value = band.value;
          option.textContent = band.display;
          if (this.state.ageBand === band.value) option.selected = true;
          select.append(option);
        }
        select.addEventListener("change", () => {
          if (select.value) this.dispatch({ type: "select_age_band", band: select.value });
        });
        body.append(select);
        body.append(
          this.button(
            "Continue",
            "wizard-continue",
            () => this.dispatch({ type: "accept_age" }),
            !canAdvance(this.state, "mouth_capture"),
          ),
        );
        if (this.state.mouth?.inconclusive) {
          body.append(
            this.button("Override and continue anyway", "wizard-override", () =>
              this.dispatch({ type: "override", note: "farmer overrode inconclusive age result" }),
            ),
          );
        }
        break;
      }
      case "body_capture": {
        body.append(this.stepTitle("Step 3: photograph the whole body"));
        body.append(this.captureInput());
        body.append(
          this.button(
            "Get dosage",
            "wizard-dose",
            () => void this.submitDoseRequest(),
            !canAdvance(this.state, "body_capture"),
          ),
        );
        if (this.state.body?.inconclusive) {
          body.append(
            this.button("Override and continue anyway", "wizard-override", () =>
              this.dispatch({ type: "override", note: "farmer overrode inconclusive weight result" }),
            ),
          );
        }
        break;
      }
      case "dose_result": {
        body.append(this.stepTitle("Recommendation"));
        if (this.state.plan) body.append(dosePlanCard(this.state.plan));
        if (this.state.terminal) {
          body.append(terminalCard(this.state.terminal.kind, this.state.terminal.message));
        }
        body.append(this.button("Start over", "wizard-reset", () => this.dispatch({ type: "reset" })));
        break;
      }
    }

    if (this.state.step !== "choose_function") {
      panel.append(this.button("Back", "wizard-back", () => this.dispatch({ type: "back" })));
    }
    if (this.state.overrides.length > 0) {
      const notes = document.createElement("ul");
      notes.className = "override-notes";
      notes.dataset.testid = "override-notes";
      for (const override of this.state.overrides) {
        const li = document.createElement("li");
        li.textContent = `${override.step}: ${override.note}`;
        notes.append(li);
      }
      panel.append(notes);
    }
  }

  private stepTitle(text: string): HTMLElement {
    const node = document.createElement("p");
    node.className = "step-title";
    node.textContent = text;
    return node;
  }
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (root) {
    const app = new TaurusApp();
    void app.mount(root);
  }
}

export { PREDICT_SLUGS };
