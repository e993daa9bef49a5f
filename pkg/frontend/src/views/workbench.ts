// Risk workbench: the auditor's queue of mismatched pairs, their
// opening requests, revealed amounts, and terminal resolutions. All of
// it is echoed from node responses; acceptance of an opening is the
// node's verdict, never recomputed here.

import {
  ApiResponse,
  ListPairsResult,
  OpeningRequestWire,
  PairKeyWire,
  PairRecordWire,
} from '../protocol.js';
import { pairKeyId } from './status.js';

export interface RevealedOpening {
  requestId: string;
  targetFlag: number;
  targetAddress: string;
  amount: number;
  details: string[];
  // True exactly when the node stored the package: it only keeps
  // openings that passed commitment verification.
  commitmentVerified: true;
}

export interface CaseFile {
  id: string;
  key: PairKeyWire;
  state: string;
  annotation: string;
  requests: OpeningRequestWire[];
  revealed: RevealedOpening[];
  resolution: 'risk_resolved_verified' | 'risk_confirmed_mismatch' | null;
  tamperWarnings: string[];
}

export type SubmissionOutcome =
  | { accepted: true; state: string }
  | { accepted: false; tamperWarning: string | null; message: string };

export class RiskWorkbench {
  private readonly cases = new Map<string, CaseFile>();
  private riskTotal = 0;

  get queueSize(): number {
    return this.riskTotal;
  }

  loadQueue(response: ApiResponse<ListPairsResult>): void {
    if (!response.ok) {
      return;
    }
    this.riskTotal = response.result.total;
    for (const record of response.result.records) {
      this.absorbRecord(record);
    }
  }

  // Applies any later listing (resolved or confirmed pages included) so
  // fulfilled openings and terminal states reach the case files.
  absorbListing(response: ApiResponse<ListPairsResult>): void {
    if (!response.ok) {
      return;
    }
    for (const record of response.result.records) {
      this.absorbRecord(record);
    }
  }

  recordRequest(response: ApiResponse<OpeningRequestWire>): OpeningRequestWire | null {
    if (!response.ok) {
      return null;
    }
    const request = response.result;
    const file = this.fileFor(request.key);
    const existing = file.requests.findIndex((r) => r.request_id === request.request_id);
    if (existing >= 0) {
      file.requests[existing] = request;
    } else {
      file.requests.push(request);
    }
    return request;
  }

  recordSubmission(response: ApiResponse<PairRecordWire>): SubmissionOutcome {
    if (!response.ok) {
      const tampered = response.error.code === 'invalid_opening';
      return {
        accepted: false,
        tamperWarning: tampered ? response.error.message : null,
        message: response.error.message,
      };
    }
    this.absorbRecord(response.result);
    return { accepted: true, state: response.result.state };
  }

  // An invalid opening never changes the pair; surface the warning on
  // the case it was filed against.
  flagTamper(key: PairKeyWire, message: string): void {
    this.fileFor(key).tamperWarnings.push(message);
  }

  caseFor(key: PairKeyWire): CaseFile | undefined {
    return this.cases.get(pairKeyId(key));
  }

  openCases(): CaseFile[] {
    return [...this.cases.values()].filter((file) => file.resolution === null);
  }

  private fileFor(key: PairKeyWire): CaseFile {
    const id = pairKeyId(key);
    let file = this.cases.get(id);
    if (!file) {
      file = {
        id,
        key,
        state: 'risk',
        annotation: '',
        requests: [],
        revealed: [],
        resolution: null,
        tamperWarnings: [],
      };
      this.cases.set(id, file);
    }
    return file;
  }

  private absorbRecord(record: PairRecordWire): void {
    const file = this.fileFor(record.key);
    file.state = record.state;
    file.annotation = record.annotation;
    if (record.opening_requests.length > 0) {
      file.requests = record.opening_requests;
    }
    file.revealed = record.opening_requests
      .filter((request) => request.status === 'fulfilled' && request.package)
      .map((request) => ({
        requestId: request.request_id,
        targetFlag: request.target_flag,
        targetAddress: request.target_address,
        amount: request.package!.amount,
        details: [...request.package!.details],
        commitmentVerified: true,
      }));
    file.resolution =
      record.state === 'risk_resolved_verified' || record.state === 'risk_confirmed_mismatch'
        ? record.state
        : null;
  }
}

export interface FulfillmentPrompt {
  requestId: string;
  key: PairKeyWire;
  targetAddress: string;
  note: string;
}

// Company-side counterpart: opening requests aimed at one of our own
// addresses and not yet answered become action prompts.
export function fulfillmentPrompts(
  response: ApiResponse<ListPairsResult>,
  ownAddresses: readonly string[]
): FulfillmentPrompt[] {
  if (!response.ok) {
    return [];
  }
  const mine = new Set(ownAddresses);
  const prompts: FulfillmentPrompt[] = [];
  for (const record of response.result.records) {
    for (const request of record.opening_requests) {
      if (request.status === 'requested' && mine.has(request.target_address)) {
        prompts.push({
          requestId: request.request_id,
          key: record.key,
          targetAddress: request.target_address,
          note: request.note,
        });
      }
    }
  }
  return prompts;
}
