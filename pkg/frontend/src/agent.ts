// Local wallet-agent signer. The console process keeps no protocol
// secrets of its own: views receive envelopes and public values only,
// and the private scalar stays inside this class.

import { createHash } from 'node:crypto';

import {
  bigIntFromBytes,
  bigIntToBytes,
  bytesToHex,
  concatBytes,
  modPow,
} from './bytes.js';
import { canonicalRequestBytes, Envelope, JsonObject } from './protocol.js';

const DOMAIN_NONCE = new TextEncoder().encode('FutureAB-nonce-v1');
const DOMAIN_CHALLENGE = new TextEncoder().encode('FutureAB-challenge-v1');

export interface GroupParams {
  profile: string;
  p: bigint;
  q: bigint;
  g: bigint;
  h: bigint;
  elementSize: number;
  scalarSize: number;
}

export interface GroupParamsWire {
  profile: string;
  p: string;
  q: string;
  g: string;
  h: string;
  element_size: number;
  scalar_size: number;
}

export function groupFromWire(wire: GroupParamsWire): GroupParams {
  return {
    profile: wire.profile,
    p: BigInt(wire.p),
    q: BigInt(wire.q),
    g: BigInt(wire.g),
    h: BigInt(wire.h),
    elementSize: wire.element_size,
    scalarSize: wire.scalar_size,
  };
}

function sha512(...parts: Uint8Array[]): Uint8Array {
  const hash = createHash('sha512');
  for (const part of parts) {
    hash.update(part);
  }
  return new Uint8Array(hash.digest());
}

export class WalletAgent {
  readonly params: GroupParams;
  readonly companyId: string;
  readonly publicKey: bigint;
  private readonly privateKey: bigint;

  constructor(params: GroupParams, companyId: string, privateKey: bigint | string) {
    const scalar = typeof privateKey === 'string' ? BigInt(privateKey) : privateKey;
    if (scalar <= 0n || scalar >= params.q) {
      throw new Error('private key must be a non-zero scalar below the group order');
    }
    this.params = params;
    this.companyId = companyId;
    this.privateKey = scalar;
    this.publicKey = modPow(params.g, scalar, params.p);
  }

  publicKeyHex(): string {
    return bytesToHex(bigIntToBytes(this.publicKey, this.params.elementSize));
  }

  // Deterministic Schnorr signature: the nonce is derived from the key
  // and the message, so signing never needs an entropy source.
  sign(message: Uint8Array): string {
    const { q, g, p, scalarSize, elementSize } = this.params;
    const privateBytes = bigIntToBytes(this.privateKey, scalarSize);
    let k = 0n;
    for (let counter = 0; ; counter++) {
      const counterBytes = new Uint8Array(4);
      new DataView(counterBytes.buffer).setUint32(0, counter, false);
      k = bigIntFromBytes(sha512(DOMAIN_NONCE, privateBytes, counterBytes, message)) % q;
      if (k !== 0n) {
        break;
      }
    }
    const noncePoint = modPow(g, k, p);
    const challenge =
      bigIntFromBytes(
        sha512(
          DOMAIN_CHALLENGE,
          bigIntToBytes(noncePoint, elementSize),
          bigIntToBytes(this.publicKey, elementSize),
          message
        )
      ) % q;
    const response = (k + challenge * this.privateKey) % q;
    return bytesToHex(
      concatBytes(bigIntToBytes(challenge, scalarSize), bigIntToBytes(response, scalarSize))
    );
  }

  signRequest(endpoint: string, params: JsonObject): Envelope {
    const canonical = canonicalRequestBytes(endpoint, this.companyId, params);
    return {
      endpoint,
      company_id: this.companyId,
      params,
      signature: this.sign(canonical),
    };
  }
}
