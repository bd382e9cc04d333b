/**
 * Turns server prompt payloads into chat affordances and user actions into
 * API calls.
 *
 * Rules the tests pin down:
 *  - every button label, default value, probability, and AUC string comes
 *    from a server payload verbatim; this module invents UI copy only
 *  - at most one API request is in flight per session (user actions are
 *    ignored while one is pending)
 *  - an oversize file is rejected locally, before any request is made
 *  - a running job is polled at a fixed interval until terminal, then the
 *    poll loop stops
 *  - errors become error bubbles with a retry affordance; an expired
 *    session offers a restart instead
 */

import {
  ApiError,
  Client,
  FileTooLarge,
  JobSnapshot,
  Prompt,
  SessionView,
} from "./api.js";
import { Message, Transcript } from "./transcript.js";

export interface DriverOptions {
  pollIntervalMs?: number;
}

const NUMERIC = /^-?\d+(\.\d+)?([eE][+-]?\d+)?$/;

function parseCandidates(raw: string): unknown[] {
  return raw
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map((part) => (NUMERIC.test(part) ? Number(part) : part));
}

export class FlowDriver {
  private sessionId: string | null = null;
  private flow: "prediction" | "training" | null = null;
  private busy = false;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private client: Client,
    private transcript: Transcript,
    private options: DriverOptions = {},
  ) {}

  private get pollInterval(): number {
    return this.options.pollIntervalMs ?? 1000;
  }

  async startFlow(flow: "prediction" | "training"): Promise<void> {
    this.flow = flow;
    this.stopPolling();
    await this.perform(null, () => this.client.openSession(flow));
  }

  /**
   * Run one API call with the single-in-flight guard: append the optimistic
   * user bubble, then either render the response or an error bubble with a
   * retry affordance.
   */
  private async perform(
    userLabel: string | null,
    call: () => Promise<SessionView>,
  ): Promise<void> {
    if (this.busy) {
      return;
    }
    this.busy = true;
    if (userLabel !== null) {
      this.transcript.append("user", "text", userLabel);
    }
    try {
      const view = await call();
      this.busy = false;
      // the action the user just took is settled; whatever affordance
      // produced it must not accept further input
      this.transcript.retireActive();
      this.handleView(view);
    } catch (error) {
      this.busy = false;
      this.showError(error, () => void this.perform(null, call));
    }
  }

  private handleView(view: SessionView): void {
    this.sessionId = view.session_id;
    if (view.prediction) {
      const bubble = this.transcript.append(
        "agent", "prediction",
        `Predicted probability: ${view.prediction.probability}`);
      const note = document.createElement("p");
      note.className = "disclaimer";
      note.textContent = view.prediction.disclaimer;
      bubble.element.appendChild(note);
    }
    if (view.summary) {
      const s = view.summary;
      const balance = Object.entries(s.class_balance)
        .map(([value, count]) => `${value}: ${count}`)
        .join(", ");
      const columns = s.columns
        .map((c) => `${c.name} (${c.role}, ${c.categories} values)`)
        .join("; ");
      this.transcript.append(
        "agent", "text",
        `Received ${s.rows} rows. Label column: ${s.label_column} ` +
        `(${balance}). Columns: ${columns}.`);
    }
    if (view.message) {
      this.transcript.append("agent", "text", view.message);
    }
    this.renderPrompt(view.prompt);
  }

  private renderPrompt(prompt: Prompt): void {
    switch (prompt.kind) {
      case "choices":
        return this.renderChoices(prompt);
      case "confirm":
        return this.renderConfirm(prompt);
      case "survey":
        return this.renderSurvey(prompt);
      case "upload":
        return this.renderUpload(prompt);
      case "grid_form":
        return this.renderGridForm(prompt);
      case "progress":
        return this.renderProgress(prompt);
      case "results":
        return this.renderResults(prompt);
      case "text":
        this.transcript.append("agent", "text", prompt.text);
        return;
      default:
        this.transcript.append(
          "agent", "error",
          `The agent sent a message this page cannot display ` +
          `(kind "${prompt.kind}").`);
    }
  }

  // -- interactive prompt renderers ---------------------------------------

  private renderChoices(prompt: Prompt): void {
    const bubble = this.transcript.append("agent", "choices", prompt.text);
    if (typeof prompt.name === "string") {
      bubble.element.dataset.name = prompt.name;
    }
    const controls = document.createElement("div");
    for (const option of prompt.options as string[]) {
      const button = document.createElement("button");
      button.textContent = option;
      button.dataset.value = option;
      button.onclick = () => void this.perform(
        option, () => this.client.answer(this.sessionId!, option));
      controls.appendChild(button);
    }
    this.transcript.activate(bubble, controls);
  }

  private renderConfirm(prompt: Prompt): void {
    const bubble = this.transcript.append("agent", "choices", prompt.text);
    const controls = document.createElement("div");
    for (const option of prompt.options as string[]) {
      const button = document.createElement("button");
      button.textContent = option;
      button.dataset.value = option;
      button.onclick = () => void this.perform(
        option, () => this.client.confirmDataset(this.sessionId!));
      controls.appendChild(button);
    }
    this.transcript.activate(bubble, controls);
  }

  private renderSurvey(prompt: Prompt): void {
    const bubble = this.transcript.append("agent", "choices", prompt.text);
    bubble.element.dataset.name = "survey";
    const controls = document.createElement("div");
    const comment = document.createElement("input");
    comment.type = "text";
    comment.placeholder = "optional comment";
    comment.className = "comment";
    for (const option of prompt.options as string[]) {
      const button = document.createElement("button");
      button.textContent = option;
      button.dataset.value = option;
      button.onclick = () => void this.perform(
        option,
        () => this.client.submitSurvey(
          this.sessionId!, Number(option), comment.value || undefined));
      controls.appendChild(button);
    }
    controls.appendChild(comment);
    this.transcript.activate(bubble, controls);
  }

  private renderUpload(prompt: Prompt): void {
    const limit = prompt.limit_bytes as number;
    const bubble = this.transcript.append("agent", "upload", prompt.text);
    const controls = document.createElement("div");
    const picker = document.createElement("input");
    picker.type = "file";
    picker.accept = ".csv,text/csv";
    const send = document.createElement("button");
    send.textContent = "Send file";
    send.onclick = () => {
      const file = picker.files?.[0];
      if (!file) {
        this.transcript.append("agent", "error", "Choose a file first.");
        return;
      }
      if (file.size > limit) {
        // local rejection: the affordance stays active and nothing is sent
        this.transcript.append(
          "agent", "error",
          `That file is ${file.size} bytes; the limit is ${limit} bytes. ` +
          `Pick a smaller dataset.`);
        return;
      }
      void this.perform(
        file.name,
        () => this.client.uploadDataset(this.sessionId!, file, limit));
    };
    controls.appendChild(picker);
    controls.appendChild(send);
    this.transcript.activate(bubble, controls);
  }

  private renderGridForm(prompt: Prompt): void {
    const defaults = prompt.defaults as Record<string, unknown[]>;
    const bubble = this.transcript.append("agent", "form", prompt.text);
    const controls = document.createElement("div");
    const fields = new Map<string, HTMLInputElement>();
    for (const [name, values] of Object.entries(defaults)) {
      const row = document.createElement("label");
      row.className = "grid-row";
      const caption = document.createElement("span");
      caption.textContent = name;
      const input = document.createElement("input");
      input.type = "text";
      input.name = name;
      input.value = values.join(", ");
      row.appendChild(caption);
      row.appendChild(input);
      controls.appendChild(row);
      fields.set(name, input);
    }
    const useDefaults = document.createElement("button");
    useDefaults.textContent = "Use defaults";
    useDefaults.dataset.action = "defaults";
    useDefaults.onclick = () => void this.perform(
      "Use defaults", () => this.client.startTraining(this.sessionId!, {}));
    const submit = document.createElement("button");
    submit.textContent = "Start training";
    submit.dataset.action = "submit";
    submit.onclick = () => {
      const grid: Record<string, unknown[]> = {};
      for (const [name, input] of fields) {
        grid[name] = parseCandidates(input.value);
      }
      void this.perform(
        "Start training", () => this.client.startTraining(this.sessionId!, grid));
    };
    controls.appendChild(useDefaults);
    controls.appendChild(submit);
    this.transcript.activate(bubble, controls);
  }

  // -- job progress and results --------------------------------------------

  private renderProgress(prompt: Prompt): void {
    const bubble = this.transcript.append("agent", "progress", prompt.text);
    this.pollJob(prompt.job_id as string, bubble);
  }

  private pollJob(jobId: string, bubble: Message): void {
    const tick = async () => {
      let snap: JobSnapshot;
      try {
        snap = await this.client.jobStatus(jobId);
      } catch (error) {
        this.showError(error, () => this.pollJob(jobId, bubble));
        return;
      }
      if (snap.status === "running" && snap.progress) {
        bubble.body.textContent =
          `Training in progress: setting ${snap.progress.settings_done} ` +
          `of ${snap.progress.settings_total} evaluated.`;
      }
      if (snap.status === "succeeded" || snap.status === "failed") {
        this.stopPolling();
        bubble.body.textContent = "Training finished.";
        await this.perform(null, () => this.client.getSession(this.sessionId!));
        return;
      }
      this.pollTimer = setTimeout(() => void tick(), this.pollInterval);
    };
    this.pollTimer = setTimeout(() => void tick(), this.pollInterval);
  }

  private stopPolling(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private renderResults(prompt: Prompt): void {
    const job = prompt.job as JobSnapshot;
    if (job.status === "succeeded") {
      this.transcript.append(
        "agent", "text",
        `${prompt.text} Validation AUC ${job.validation_auc}. ` +
        `Cross-validation AUC of the winning setting: ${job.best_cv_auc}.`);
      const plot = this.transcript.append("agent", "roc_plot");
      plot.body.insertAdjacentHTML("beforeend", job.roc_svg as string);
      const links = document.createElement("p");
      const model = document.createElement("a");
      model.href = job.model_download as string;
      model.textContent = "Download the trained model";
      const roc = document.createElement("a");
      roc.href = job.roc_download as string;
      roc.textContent = "Download the ROC plot";
      links.appendChild(model);
      links.appendChild(document.createTextNode(" | "));
      links.appendChild(roc);
      plot.element.appendChild(links);
    } else {
      const detail = job.error
        ? `${job.error.message} [${job.error.code}]`
        : "the job did not finish";
      this.transcript.append("agent", "error", `Training failed: ${detail}`);
    }
    if (prompt.survey) {
      this.renderPrompt(prompt.survey as Prompt);
      if (job.status === "failed" && this.flow) {
        // failed run: the survey affordance also offers starting over
        const restart = document.createElement("button");
        restart.textContent = "Start over";
        restart.dataset.action = "restart";
        restart.onclick = () => void this.startFlow(this.flow!);
        this.transcript.appendToActive(restart);
      }
    }
  }

  // -- failure handling ------------------------------------------------------

  private showError(error: unknown, retry: () => void): void {
    let text: string;
    let expired = false;
    if (error instanceof ApiError) {
      text = `${error.message} [${error.code}]`;
      expired = error.code === "unknown_session";
    } else if (error instanceof FileTooLarge) {
      text = error.message;
    } else {
      text = `Could not reach the server: ${String(error)}`;
    }
    const bubble = this.transcript.append("agent", "error", text);
    const controls = document.createElement("div");
    const button = document.createElement("button");
    if (expired && this.flow) {
      button.textContent = "Start over";
      button.dataset.action = "restart";
      button.onclick = () => void this.startFlow(this.flow!);
    } else {
      button.textContent = "Retry";
      button.dataset.action = "retry";
      button.onclick = () => {
        button.setAttribute("disabled", "");
        retry();
      };
    }
    controls.appendChild(button);
    this.transcript.activate(bubble, controls);
  }
}
