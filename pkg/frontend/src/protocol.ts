// Wire contract shared with the node service: request envelopes, response
// shapes, and the canonical byte string every request signature covers.

export const REQUEST_TAG = 'FutureAB-request-v1';

export type Json = string | number | boolean | null | Json[] | { [key: string]: Json };
export type JsonObject = { [key: string]: Json };

export interface Envelope {
  endpoint: string;
  company_id: string;
  params: JsonObject;
  signature: string;
}

export interface ApiError {
  code: string;
  message: string;
}

export type ApiResponse<T> =
  | { ok: true; seq: number; result: T }
  | { ok: false; seq: number; error: ApiError };

export type PairStateName =
  | 'pending'
  | 'verified'
  | 'risk'
  | 'risk_resolved_verified'
  | 'risk_confirmed_mismatch';

export interface PairKeyWire {
  sender_address: string;
  receiver_address: string;
  date: string;
}

export interface PostedMessageWire {
  sender_address: string;
  receiver_address: string;
  amount_commitment: string;
  detail_commitment: string;
  date: string;
  flag: number;
  signature: string;
}

export interface OpeningPackageWire {
  message_id: string;
  amount: number;
  amount_randomness: string;
  details: string[];
  detail_randomness: string;
}

export interface OpeningRequestWire {
  request_id: string;
  key: PairKeyWire;
  auditor_id: string;
  target_address: string;
  target_flag: number;
  status: string;
  note: string;
  // Present only in auditor-role responses; companies never receive
  // revealed openings back from the node.
  package?: OpeningPackageWire | null;
}

export interface PairRecordWire {
  key: PairKeyWire;
  state: PairStateName;
  message_flag0: PostedMessageWire | null;
  message_flag1: PostedMessageWire | null;
  state_history: [string, number][];
  opening_request_ids: string[];
  opening_requests: OpeningRequestWire[];
  stale: boolean;
  ledgered: boolean;
  annotation: string;
  first_seen: string;
}

export interface ListPairsResult {
  state: PairStateName;
  page: number;
  page_size: number;
  total: number;
  records: PairRecordWire[];
}

export interface CheckWire {
  ok: boolean;
  first_bad_height: number | null;
}

export interface VerifyChainResult {
  chain: CheckWire;
  tip_registry: CheckWire;
  height: number;
}

export interface LedgerRecordWire {
  key: PairKeyWire;
  amount_commitment_0: string;
  amount_commitment_1: string;
  detail_commitment_0: string;
  detail_commitment_1: string;
  annotation: string;
  verified_at: number;
}

export interface GetRecordResult {
  record: LedgerRecordWire;
  proof: { block_height: number; index: number };
}

export interface HealthStatus {
  ok: boolean;
  height: number;
}

// Key order must match byte-wise what the node signs against. The node
// sorts by code point, so compare code points rather than UTF-16 units.
function compareCodePoints(a: string, b: string): number {
  const as = [...a];
  const bs = [...b];
  const n = Math.min(as.length, bs.length);
  for (let i = 0; i < n; i++) {
    const diff = (as[i].codePointAt(0) as number) - (bs[i].codePointAt(0) as number);
    if (diff !== 0) {
      return diff;
    }
  }
  return as.length - bs.length;
}

export function canonicalJson(value: Json): string {
  if (value === null || typeof value !== 'object') {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(',')}]`;
  }
  const keys = Object.keys(value).sort(compareCodePoints);
  const fields = keys.map((key) => `${JSON.stringify(key)}:${canonicalJson(value[key])}`);
  return `{${fields.join(',')}}`;
}

export function canonicalRequestBytes(
  endpoint: string,
  companyId: string,
  params: JsonObject
): Uint8Array {
  const body = canonicalJson({ endpoint, company_id: companyId, params });
  return new TextEncoder().encode(REQUEST_TAG + body);
}
