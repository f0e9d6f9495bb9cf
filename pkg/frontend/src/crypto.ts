// WebCrypto operations matching the server byte-for-byte:
// RSA-PSS/SHA-256 (salt 32) signature verification, and envelope
// encryption as RSA-OAEP/SHA-256 key wrap + AES-256-GCM payload.

import { b64encode, utf8 } from "./codec.js";

function pemBody(pem: string): Uint8Array {
  const body = pem
    .replace(/-----BEGIN [A-Z ]+-----/, "")
    .replace(/-----END [A-Z ]+-----/, "")
    .replace(/\s+/g, "");
  const binary = atob(body);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

export async function importVerifyKey(pem: string): Promise<CryptoKey> {
  return crypto.subtle.importKey(
    "spki",
    pemBody(pem).slice().buffer,
    { name: "RSA-PSS", hash: "SHA-256" },
    false,
    ["verify"],
  );
}

export async function importWrapKey(pem: string): Promise<CryptoKey> {
  return crypto.subtle.importKey(
    "spki",
    pemBody(pem).slice().buffer,
    { name: "RSA-OAEP", hash: "SHA-256" },
    false,
    ["encrypt"],
  );
}

export async function verifySignature(
  pem: string,
  signature: Uint8Array,
  data: Uint8Array,
): Promise<boolean> {
  try {
    const key = await importVerifyKey(pem);
    return await crypto.subtle.verify(
      { name: "RSA-PSS", saltLength: 32 },
      key,
      signature.slice().buffer,
      data.slice().buffer,
    );
  } catch {
    return false;
  }
}

export interface EnvelopeWire {
  wrapped_key: string;
  nonce: string;
  ciphertext: string;
}

// Fresh AES-256 key per record; only the enclave private key can unwrap.
export async function sealRow(
  values: string[],
  enclavePubkeyPem: string,
): Promise<EnvelopeWire> {
  const payload = utf8(values.join(","));
  const dataKey = await crypto.subtle.generateKey(
    { name: "AES-GCM", length: 256 },
    true,
    ["encrypt"],
  );
  const nonce = new Uint8Array(12);
  crypto.getRandomValues(nonce);
  const ciphertext = new Uint8Array(
    await crypto.subtle.encrypt({ name: "AES-GCM", iv: nonce }, dataKey, payload.slice().buffer),
  );
  const rawKey = new Uint8Array(await crypto.subtle.exportKey("raw", dataKey));
  const wrapKey = await importWrapKey(enclavePubkeyPem);
  const wrapped = new Uint8Array(
    await crypto.subtle.encrypt({ name: "RSA-OAEP" }, wrapKey, rawKey.slice().buffer),
  );
  return {
    wrapped_key: b64encode(wrapped),
    nonce: b64encode(nonce),
    ciphertext: b64encode(ciphertext),
  };
}
