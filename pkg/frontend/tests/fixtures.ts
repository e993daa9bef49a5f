// Recorded node responses and wallet snapshots the suite replays.
// Regenerate with scripts/record_fixtures.py against a live checkout.

import { readFileSync } from 'node:fs';

import {
  ApiResponse,
  GetRecordResult,
  HealthStatus,
  JsonObject,
  ListPairsResult,
  OpeningRequestWire,
  PairRecordWire,
  VerifyChainResult,
} from '../src/protocol.js';
import { GroupParamsWire } from '../src/agent.js';
import { ValueSetSummary } from '../src/views/valuesets.js';

export function loadFixture<T>(name: string): T {
  const url = new URL(`../fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, 'utf-8')) as T;
}

export function loadFixtureText(name: string): string {
  const url = new URL(`../fixtures/${name}`, import.meta.url);
  return readFileSync(url, 'utf-8');
}

export interface SigningFixture {
  group: GroupParamsWire;
  agent: { private_key: string; public_key: string };
  requests: {
    endpoint: string;
    company_id: string;
    params: JsonObject;
    canonical: string;
    signature: string;
    envelope: {
      endpoint: string;
      company_id: string;
      params: JsonObject;
      signature: string;
    };
  }[];
}

export interface StatusCycle {
  responses: Record<'verified' | 'risk' | 'pending', ApiResponse<ListPairsResult>>;
  counts: Record<'verified' | 'risk' | 'pending', number>;
}

export interface StatusFixture {
  cycles: [StatusCycle, StatusCycle];
}

export interface OpeningFlow {
  requests: ApiResponse<OpeningRequestWire>[];
  submits?: ApiResponse<PairRecordWire>[];
  error_response?: ApiResponse<PairRecordWire>;
  prompt: ApiResponse<ListPairsResult>;
  outcome?: string;
}

export interface WorkbenchFixture {
  risk_snapshot: ApiResponse<ListPairsResult>;
  resolved: OpeningFlow;
  confirmed: OpeningFlow;
  invalid_opening: OpeningFlow;
  auditor_resolved: ApiResponse<ListPairsResult>;
  auditor_confirmed: ApiResponse<ListPairsResult>;
  company_a_address: string;
}

export interface ValueSetsFixture {
  company_id: string;
  snapshots: {
    initial: ValueSetSummary[];
    after_rotate: ValueSetSummary[];
    after_confirm: ValueSetSummary[];
  };
}

export interface BulkExpectedFixture {
  accepted: number;
  rejected: { line: number; reason: string }[];
}

export interface LedgerFixture {
  verify_chain: ApiResponse<VerifyChainResult>;
  get_record: ApiResponse<GetRecordResult>;
  health: HealthStatus;
}
