// Byte/string helpers and the canonical signing byte layout shared with
// the server: each field as UTF-8, prefixed with a 4-byte big-endian
// length, concatenated in declared field order.

export function utf8(text: string): Uint8Array {
  return new TextEncoder().encode(text);
}

export function b64encode(data: Uint8Array): string {
  let binary = "";
  for (const byte of data) binary += String.fromCharCode(byte);
  return btoa(binary);
}

export function b64decode(text: string): Uint8Array {
  const binary = atob(text);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

export function hexEncode(data: Uint8Array): string {
  return [...data].map((b) => b.toString(16).padStart(2, "0")).join("");
}

export function randomNonce16(): Uint8Array {
  const nonce = new Uint8Array(16);
  crypto.getRandomValues(nonce);
  return nonce;
}

export function concatBytes(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

function lengthPrefixed(text: string): Uint8Array {
  const body = utf8(text);
  const out = new Uint8Array(4 + body.length);
  new DataView(out.buffer).setUint32(0, body.length, false);
  out.set(body, 4);
  return out;
}

export function quoteSigningBytes(
  measurement: string,
  pubkeyPem: string,
  eps: string,
  delta: string,
  nonceHex: string,
): Uint8Array {
  return concatBytes([
    lengthPrefixed(measurement),
    lengthPrefixed(pubkeyPem),
    lengthPrefixed(eps),
    lengthPrefixed(delta),
    lengthPrefixed(nonceHex),
  ]);
}

export function budgetSigningBytes(
  eps: string,
  delta: string,
  serial: number,
): Uint8Array {
  return concatBytes([
    lengthPrefixed(eps),
    lengthPrefixed(delta),
    lengthPrefixed(String(serial)),
  ]);
}

// Exact decimal comparison on strings; budget numbers never touch floats.
const DECIMAL_RE = /^-?(0|[0-9]+)(\.[0-9]+)?$/;

export function isDecimal(text: string): boolean {
  return DECIMAL_RE.test(text.trim());
}

export function compareDecimal(a: string, b: string): number {
  const pa = parts(a.trim());
  const pb = parts(b.trim());
  if (pa.sign !== pb.sign) return pa.sign < pb.sign ? -1 : 1;
  const fracLen = Math.max(pa.frac.length, pb.frac.length);
  const scaledA = BigInt(pa.int + pa.frac.padEnd(fracLen, "0"));
  const scaledB = BigInt(pb.int + pb.frac.padEnd(fracLen, "0"));
  const cmp = scaledA < scaledB ? -1 : scaledA > scaledB ? 1 : 0;
  return pa.sign < 0 ? -cmp : cmp;
}

function parts(text: string): { sign: number; int: string; frac: string } {
  if (!DECIMAL_RE.test(text)) throw new Error(`not a decimal: ${text}`);
  const sign = text.startsWith("-") ? -1 : 1;
  const unsigned = text.replace(/^-/, "");
  const [int, frac = ""] = unsigned.split(".");
  return { sign, int, frac };
}
