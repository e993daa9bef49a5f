// Transaction status view: pair rows with Pending/Verified/Risk badges.
// Every displayed value is lifted from a list-pairs response; the view
// never recomputes matcher state on its own.

import { ApiResponse, ListPairsResult, PairKeyWire, PairRecordWire } from '../protocol.js';

export function pairKeyId(key: PairKeyWire): string {
  return `${key.sender_address}|${key.receiver_address}|${key.date}`;
}

export interface StatusRow {
  id: string;
  key: PairKeyWire;
  state: string;
  annotation: string;
  ledgered: boolean;
  firstSeen: string;
}

export class TransactionStatusView {
  private readonly rowsById = new Map<string, StatusRow>();
  private readonly badgeCounts = new Map<string, number>();
  private readonly seqByState = new Map<string, number>();
  private lastSeq = 0;

  // Applies one poll page. Returns false without touching the table
  // when the response is an error or a stale replay: each state's
  // sequence cursor only moves forward, so a delayed or repeated page
  // can never roll the table back or reorder rows.
  applyPage(response: ApiResponse<ListPairsResult>): boolean {
    if (!response.ok) {
      return false;
    }
    const result = response.result;
    const cursor = this.seqByState.get(result.state) ?? 0;
    if (response.seq <= cursor) {
      return false;
    }
    this.seqByState.set(result.state, response.seq);
    this.lastSeq = Math.max(this.lastSeq, response.seq);
    this.badgeCounts.set(result.state, result.total);
    for (const record of result.records) {
      this.upsert(record);
    }
    return true;
  }

  private upsert(record: PairRecordWire): void {
    const id = pairKeyId(record.key);
    const existing = this.rowsById.get(id);
    if (existing) {
      // Known pairs update in place; their position in the table is
      // fixed at first sight.
      existing.state = record.state;
      existing.annotation = record.annotation;
      existing.ledgered = record.ledgered;
      return;
    }
    this.rowsById.set(id, {
      id,
      key: record.key,
      state: record.state,
      annotation: record.annotation,
      ledgered: record.ledgered,
      firstSeen: record.first_seen,
    });
  }

  get seqCursor(): number {
    return this.lastSeq;
  }

  badge(state: string): number {
    return this.badgeCounts.get(state) ?? 0;
  }

  rows(): StatusRow[] {
    return [...this.rowsById.values()];
  }

  filterByState(state: string): StatusRow[] {
    return this.rows().filter((row) => row.state === state);
  }
}
