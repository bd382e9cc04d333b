/** Page bootstrap: builds the chat shell and wires the flow driver. */

import { Client } from "./api.js";
import { DriverOptions, FlowDriver } from "./flows.js";
import { Transcript } from "./transcript.js";

export interface BootHandles {
  transcript: Transcript;
  driver: FlowDriver;
}

export function boot(
  root: HTMLElement,
  client: Client = new Client(""),
  options: DriverOptions = {},
): BootHandles {
  root.innerHTML = "";

  const header = document.createElement("header");
  const title = document.createElement("h1");
  title.textContent = "Risk model assistant";
  const picker = document.createElement("nav");
  header.appendChild(title);
  header.appendChild(picker);

  const log = document.createElement("main");
  log.className = "transcript";

  root.appendChild(header);
  root.appendChild(log);

  const transcript = new Transcript(log);
  const driver = new FlowDriver(client, transcript, options);

  transcript.append(
    "agent", "text",
    "Hello. I can walk you through a risk prediction with one of the " +
    "bundled models, or train a new model on a CSV dataset you upload. " +
    "Pick a conversation to begin.");

  const flows: ["prediction" | "training", string][] = [
    ["prediction", "Start a prediction"],
    ["training", "Train a model"],
  ];
  for (const [flow, label] of flows) {
    const button = document.createElement("button");
    button.textContent = label;
    button.dataset.flow = flow;
    button.onclick = () => void driver.startFlow(flow);
    picker.appendChild(button);
  }

  return { transcript, driver };
}

// boot automatically when served as the site page
const app = typeof document !== "undefined"
  ? document.getElementById("app")
  : null;
if (app) {
  boot(app);
}
