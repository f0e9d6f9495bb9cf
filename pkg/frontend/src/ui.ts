// DOM wiring for the console. All state decisions live in session.ts;
// this file only renders SessionView state and forwards events.

import { ConsoleSession, type Policy } from "./session.js";
import { TEMPLATES } from "./templates.js";

let session: ConsoleSession | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setText(id: string, text: string) {
  el(id).textContent = text;
}

function renderAttestation() {
  if (!session) return;
  const status = session.attestation;
  const box = el("attest-status");
  box.className = `status ${status.state}`;
  if (status.state === "unverified") {
    box.textContent = "Not attested yet.";
  } else if (status.state === "verified") {
    box.textContent =
      `VERIFIED — measurement ${status.measurement.slice(0, 16)}…, ` +
      `initial budget <${status.initialEps}, ${status.initialDelta}>`;
  } else {
    box.textContent = `ATTESTATION FAILED (${status.reason}). ${status.remediation}`;
  }
  const gated = !session.canSubmit;
  el<HTMLButtonElement>("submit-row").disabled = gated;
  el<HTMLButtonElement>("run-query").disabled = gated;
  el<HTMLInputElement>("row-input").disabled = gated;
  setText("schema-display",
          session.schemaText ? `schema: ${session.schemaText}` : "");
}

function renderBudget() {
  if (!session) return;
  const box = el("budget-display");
  const budget = session.budget;
  box.className = `budget ${budget.state}`;
  if (budget.state === "unknown") {
    box.textContent = "Remaining budget: unknown";
  } else if (budget.state === "verified") {
    box.textContent =
      `Remaining budget (signature verified, serial ${budget.serial}): ` +
      `epsilon ${budget.eps}, delta ${budget.delta}`;
  } else {
    box.textContent = `BUDGET VERIFICATION FAILED — ${budget.detail}`;
  }
}

function renderHistory() {
  if (!session) return;
  const list = el("history");
  list.innerHTML = "";
  for (const entry of [...session.history].reverse()) {
    const item = document.createElement("li");
    if (entry.outcome.kind === "result") {
      item.className = "ok";
      item.textContent =
        `value ${entry.outcome.value} — cost <${entry.outcome.costEps}, ` +
        `${entry.outcome.costDelta}>`;
    } else {
      item.className = "err";
      item.textContent =
        `${entry.outcome.errorKind}: ${entry.outcome.detail}`;
    }
    const pre = document.createElement("pre");
    pre.textContent = entry.program.trim();
    item.appendChild(pre);
    list.appendChild(item);
  }
}

function renderAll() {
  renderAttestation();
  renderBudget();
  renderHistory();
}

function policyFromForm(): Policy {
  return {
    maxEpsilon: el<HTMLInputElement>("policy-eps").value.trim(),
    maxDelta: el<HTMLInputElement>("policy-delta").value.trim(),
    expectedMeasurement: el<HTMLInputElement>("policy-measurement").value.trim(),
    rootPubkeyPem: el<HTMLTextAreaElement>("policy-rootkey").value,
    schemaText: el<HTMLInputElement>("policy-schema").value.trim(),
  };
}

async function onAttest() {
  session = new ConsoleSession(el<HTMLInputElement>("server-url").value.trim());
  await session.attest(policyFromForm());
  renderAll();
}

async function onSubmitRow() {
  if (!session) return;
  const raw = el<HTMLInputElement>("row-input").value;
  const values = raw.split(",").map((v) => v.trim());
  try {
    const count = await session.submitRow(values);
    setText("owner-result", `Record accepted; the server now holds ${count} records.`);
  } catch (exc) {
    setText("owner-result", `Submission failed: ${String(exc)}`);
  }
  renderAll();
}

async function onRunQuery() {
  if (!session) return;
  await session.runQuery(el<HTMLTextAreaElement>("query-editor").value);
  renderAll();
}

function onTemplateChange() {
  const idx = Number(el<HTMLSelectElement>("template-select").value);
  el<HTMLTextAreaElement>("query-editor").value = TEMPLATES[idx].program;
}

export function boot() {
  const select = el<HTMLSelectElement>("template-select");
  TEMPLATES.forEach((tpl, i) => {
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = tpl.name;
    select.appendChild(option);
  });
  el<HTMLTextAreaElement>("query-editor").value = TEMPLATES[0].program;
  el("attest-button").addEventListener("click", () => void onAttest());
  el("submit-row").addEventListener("click", () => void onSubmitRow());
  el("run-query").addEventListener("click", () => void onRunQuery());
  select.addEventListener("change", onTemplateChange);
  renderAll();
}

if (typeof document !== "undefined" && document.getElementById("attest-button")) {
  boot();
}
