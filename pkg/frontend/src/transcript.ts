/**
 * Append-only chat transcript.
 *
 * Messages render in arrival order and are never removed or reordered; a
 * progress bubble may update its own text in place, which preserves order.
 * Interactive bubbles register their control container with the transcript
 * so that exactly one affordance is active at a time: activating a new one
 * disables every control of the previous one.
 */

export type Author = "agent" | "user";

export type MessageKind =
  | "text"
  | "choices"
  | "upload"
  | "progress"
  | "roc_plot"
  | "prediction"
  | "form"
  | "error";

export interface Message {
  author: Author;
  kind: MessageKind;
  element: HTMLElement;
  body: HTMLElement;
}

export class Transcript {
  readonly messages: Message[] = [];
  private activeControls: HTMLElement | null = null;

  constructor(private container: HTMLElement) {}

  append(author: Author, kind: MessageKind, text?: string): Message {
    const element = document.createElement("div");
    element.className = `bubble ${author} ${kind}`;
    element.dataset.kind = kind;
    element.dataset.author = author;
    const body = document.createElement("div");
    body.className = "body";
    if (text !== undefined) {
      body.textContent = text;
    }
    element.appendChild(body);
    this.container.appendChild(element);
    const message: Message = { author, kind, element, body };
    this.messages.push(message);
    element.scrollIntoView?.({ block: "end" });
    return message;
  }

  /**
   * Attach a control block to a message and make it the single active
   * affordance, retiring whichever one was active before.
   */
  activate(message: Message, controls: HTMLElement): void {
    controls.className = "controls";
    message.element.appendChild(controls);
    this.retireActive();
    this.activeControls = controls;
  }

  retireActive(): void {
    if (this.activeControls) {
      const widgets = this.activeControls.querySelectorAll<HTMLElement>(
        "button, input, select, textarea");
      widgets.forEach((w) => w.setAttribute("disabled", ""));
      this.activeControls.classList.add("retired");
      this.activeControls = null;
    }
  }

  /** Add one more widget to the currently active affordance, if any. */
  appendToActive(widget: HTMLElement): void {
    this.activeControls?.appendChild(widget);
  }

  hasActiveAffordance(): boolean {
    return this.activeControls !== null;
  }
}
