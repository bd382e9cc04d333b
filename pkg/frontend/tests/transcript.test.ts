import { describe, expect, it } from "vitest";
import { Transcript } from "../dist/transcript.js";

function fresh() {
  document.body.innerHTML = "";
  const log = document.createElement("main");
  document.body.appendChild(log);
  return { log, transcript: new Transcript(log) };
}

describe("transcript ordering", () => {
  it("renders messages in arrival order and never moves earlier ones", () => {
    const { log, transcript } = fresh();
    transcript.append("agent", "text", "one");
    transcript.append("user", "text", "two");
    transcript.append("agent", "error", "three");
    const texts = Array.from(log.children)
      .map((el) => el.querySelector(".body")!.textContent);
    expect(texts).toEqual(["one", "two", "three"]);

    // appending more leaves the existing nodes in place, untouched
    const firstNode = log.children[0];
    transcript.append("agent", "text", "four");
    expect(log.children).toHaveLength(4);
    expect(log.children[0]).toBe(firstNode);
    expect(firstNode!.querySelector(".body")!.textContent).toBe("one");
  });

  it("tags every bubble with its author and kind", () => {
    const { log, transcript } = fresh();
    const message = transcript.append("user", "choices", "hi");
    expect(message.element.className).toBe("bubble user choices");
    expect(message.element.dataset.author).toBe("user");
    expect(message.element.dataset.kind).toBe("choices");
    expect(log.contains(message.element)).toBe(true);
  });
});

describe("single active affordance", () => {
  function withButton(transcript: Transcript, label: string) {
    const message = transcript.append("agent", "choices", label);
    const controls = document.createElement("div");
    const button = document.createElement("button");
    button.textContent = label;
    controls.appendChild(button);
    transcript.activate(message, controls);
    return { message, controls, button };
  }

  it("disables the previous affordance when a new one activates", () => {
    const { transcript } = fresh();
    const first = withButton(transcript, "first");
    expect(first.button.hasAttribute("disabled")).toBe(false);

    const second = withButton(transcript, "second");
    expect(first.button.hasAttribute("disabled")).toBe(true);
    expect(first.controls.classList.contains("retired")).toBe(true);
    expect(second.button.hasAttribute("disabled")).toBe(false);
    expect(transcript.hasActiveAffordance()).toBe(true);
  });

  it("retireActive disables every widget type and clears the slot", () => {
    const { transcript } = fresh();
    const message = transcript.append("agent", "form", "form");
    const controls = document.createElement("div");
    const widgets = [
      document.createElement("button"),
      document.createElement("input"),
      document.createElement("select"),
      document.createElement("textarea"),
    ];
    widgets.forEach((w) => controls.appendChild(w));
    transcript.activate(message, controls);

    transcript.retireActive();
    widgets.forEach((w) => expect(w.hasAttribute("disabled")).toBe(true));
    expect(transcript.hasActiveAffordance()).toBe(false);
    // retiring twice is harmless
    transcript.retireActive();
  });

  it("appendToActive reaches only the live affordance", () => {
    const { transcript } = fresh();
    const holder = withButton(transcript, "a");
    const extra = document.createElement("button");
    transcript.appendToActive(extra);
    expect(holder.controls.contains(extra)).toBe(true);

    transcript.retireActive();
    const orphan = document.createElement("button");
    transcript.appendToActive(orphan);
    expect(orphan.parentElement).toBeNull();
  });
});
