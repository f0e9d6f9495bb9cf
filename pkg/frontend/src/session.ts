// Console session state. Trust rules, in one place:
//  * nothing is submittable until a fresh-nonce quote verifies against
//    the pasted root key and expected measurement, and the advertised
//    budget fits the owner's policy;
//  * rows are encrypted only to the quote-embedded enclave key;
//  * the budget on display is always the last *signature-verified*
//    signed budget; a budget that fails verification switches the
//    display into a prominent failure state instead of showing numbers.

import { ServerApi, type ApiError, type FetchLike, type SignedBudgetWire } from "./api.js";
import {
  budgetSigningBytes,
  b64decode,
  compareDecimal,
  hexEncode,
  isDecimal,
  quoteSigningBytes,
  randomNonce16,
} from "./codec.js";
import { sealRow, verifySignature } from "./crypto.js";

export interface Policy {
  maxEpsilon: string;
  maxDelta: string;
  expectedMeasurement: string;
  rootPubkeyPem: string;
  schemaText: string;
}

export type AttestationStatus =
  | { state: "unverified" }
  | {
      state: "verified";
      measurement: string;
      enclavePubkeyPem: string;
      initialEps: string;
      initialDelta: string;
    }
  | { state: "failed"; reason: string; remediation: string };

export type BudgetDisplay =
  | { state: "unknown" }
  | { state: "verified"; eps: string; delta: string; serial: number }
  | { state: "verification-failed"; detail: string };

export interface HistoryEntry {
  program: string;
  outcome:
    | { kind: "result"; value: string; costEps: string; costDelta: string }
    | { kind: "error"; errorKind: string; detail: string };
}

const REMEDIATION: Record<string, string> = {
  BadSignature:
    "The quote is not signed by the root key you trust. Do not submit; " +
    "confirm the root public key with the operator over a separate channel.",
  WrongMeasurement:
    "The server is running different code or configuration than you " +
    "expected. Do not submit; re-check the published measurement.",
  NonceMismatch:
    "The quote does not answer this session's challenge (possible replay). " +
    "Do not submit; retry over a trusted network path.",
  BudgetTooLarge:
    "The server's total privacy budget exceeds what your policy allows. " +
    "Do not submit; ask the operator for a smaller budget or raise your policy.",
  Transport:
    "Could not reach the server. Check the URL and your connection.",
};

export function remediationFor(reason: string): string {
  return REMEDIATION[reason] ?? "Do not submit. Inspect the failure and retry.";
}

export class ConsoleSession {
  readonly api: ServerApi;
  attestation: AttestationStatus = { state: "unverified" };
  budget: BudgetDisplay = { state: "unknown" };
  budgetTrail: string[] = []; // every verified display update, oldest first
  history: HistoryEntry[] = [];
  recordCount: number | null = null;
  schemaText = "";

  constructor(serverUrl: string, fetchFn?: FetchLike) {
    this.api = new ServerApi(serverUrl, fetchFn);
  }

  get canSubmit(): boolean {
    return this.attestation.state === "verified";
  }

  get schemaColumns(): number {
    return this.schemaText
      ? this.schemaText.split("::").length - 1
      : 0;
  }

  async attest(policy: Policy): Promise<AttestationStatus> {
    this.schemaText = policy.schemaText;
    const nonce = randomNonce16();
    let quote;
    try {
      quote = await this.api.attest(hexEncode(nonce));
    } catch (exc) {
      const err = exc as ApiError;
      this.attestation = {
        state: "failed",
        reason: err.error_kind ?? "Transport",
        remediation: remediationFor("Transport"),
      };
      return this.attestation;
    }
    const ok =
      quote &&
      typeof quote.sig === "string" &&
      (await verifySignature(
        policy.rootPubkeyPem,
        b64decode(quote.sig),
        quoteSigningBytes(
          quote.measurement,
          quote.enclave_pubkey,
          quote.initial_budget.eps,
          quote.initial_budget.delta,
          quote.nonce,
        ),
      ));
    if (!ok) {
      this.attestation = {
        state: "failed",
        reason: "BadSignature",
        remediation: remediationFor("BadSignature"),
      };
      return this.attestation;
    }
    if (quote.measurement !== policy.expectedMeasurement) {
      this.attestation = {
        state: "failed",
        reason: "WrongMeasurement",
        remediation: remediationFor("WrongMeasurement"),
      };
      return this.attestation;
    }
    if (quote.nonce !== hexEncode(nonce)) {
      this.attestation = {
        state: "failed",
        reason: "NonceMismatch",
        remediation: remediationFor("NonceMismatch"),
      };
      return this.attestation;
    }
    if (
      compareDecimal(quote.initial_budget.eps, policy.maxEpsilon) > 0 ||
      compareDecimal(quote.initial_budget.delta, policy.maxDelta) > 0
    ) {
      this.attestation = {
        state: "failed",
        reason: "BudgetTooLarge",
        remediation: remediationFor("BudgetTooLarge"),
      };
      return this.attestation;
    }
    this.attestation = {
      state: "verified",
      measurement: quote.measurement,
      enclavePubkeyPem: quote.enclave_pubkey,
      initialEps: quote.initial_budget.eps,
      initialDelta: quote.initial_budget.delta,
    };
    await this.refreshBudget();
    return this.attestation;
  }

  private async acceptBudget(wire: SignedBudgetWire): Promise<boolean> {
    if (this.attestation.state !== "verified") return false;
    const ok = await verifySignature(
      this.attestation.enclavePubkeyPem,
      b64decode(wire.sig),
      budgetSigningBytes(wire.eps, wire.delta, wire.serial),
    );
    if (!ok) {
      this.budget = {
        state: "verification-failed",
        detail:
          "The server returned a remaining budget whose signature does not " +
          "verify under the attested enclave key. The number cannot be trusted.",
      };
      return false;
    }
    this.budget = {
      state: "verified",
      eps: wire.eps,
      delta: wire.delta,
      serial: wire.serial,
    };
    this.budgetTrail.push(`<${wire.eps}, ${wire.delta}>`);
    return true;
  }

  // Combine /epsilon and /delta (same serial, same signature over both).
  async refreshBudget(): Promise<BudgetDisplay> {
    for (let attempt = 0; attempt < 3; attempt++) {
      const [eps, delta] = await Promise.all([
        this.api.epsilon(),
        this.api.delta(),
      ]);
      if (eps.serial !== delta.serial) continue; // raced with a charge
      await this.acceptBudget({
        eps: eps.eps,
        delta: delta.delta,
        serial: eps.serial,
        sig: eps.sig,
      });
      return this.budget;
    }
    return this.budget;
  }

  validateRow(values: string[]): string | null {
    if (this.schemaColumns && values.length !== this.schemaColumns) {
      return `the schema has ${this.schemaColumns} columns, got ${values.length}`;
    }
    for (const v of values) {
      if (!isDecimal(v)) return `not a decimal value: ${JSON.stringify(v)}`;
    }
    return null;
  }

  // Owner flow: encrypt in the browser, submit ciphertext only.
  async submitRow(values: string[]): Promise<number> {
    if (this.attestation.state !== "verified") {
      throw new Error("submit blocked: attestation has not been verified");
    }
    const problem = this.validateRow(values);
    if (problem) throw new Error(problem);
    const envelope = await sealRow(values, this.attestation.enclavePubkeyPem);
    const resp = await this.api.insert(envelope);
    this.recordCount = resp.count;
    return resp.count;
  }

  // Analyst flow: run a program, verify the returned budget, keep history.
  async runQuery(program: string): Promise<HistoryEntry> {
    let entry: HistoryEntry;
    try {
      const resp = await this.api.query(program);
      entry = {
        program,
        outcome: {
          kind: "result",
          value: resp.value,
          costEps: resp.cost.eps,
          costDelta: resp.cost.delta,
        },
      };
      await this.acceptBudget(resp.remaining);
    } catch (exc) {
      const err = exc as ApiError;
      entry = {
        program,
        outcome: {
          kind: "error",
          errorKind: err.error_kind ?? "Unknown",
          detail: err.detail ?? String(exc),
        },
      };
    }
    this.history.push(entry);
    return entry;
  }
}
