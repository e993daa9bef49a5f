// Value-set management table: one row per counterparty relationship.
// Rows are built from wallet-agent summaries that already exclude key
// material; the console displays addresses and masks everything else.

import { ConsoleSession } from '../session.js';

export interface ValueSetSummary {
  counterparty_id: string;
  own_address: string;
  counterparty_address: string | null;
  status: string;
  created_at: string;
}

export interface ValueSetRow {
  counterpartyId: string;
  servingAddress: string;
  counterpartyAddress: string | null;
  status: 'active' | 'awaiting_counterparty';
  // Address of the freshly rotated set while the counterparty has yet
  // to confirm it; null when no rotation is in flight.
  pendingAddress: string | null;
  secret: typeof MASKED;
}

export const MASKED = '••••••';

export const CONTEXT_MENU = [
  'generate new value set',
  'request new address',
  'view history',
] as const;

export class ValueSetView {
  offline = false;
  private table: ValueSetRow[] = [];
  private readonly session: ConsoleSession;

  constructor(session: ConsoleSession) {
    this.session = session;
  }

  get visible(): boolean {
    return this.session.canSee('value-sets');
  }

  applySnapshot(summaries: ValueSetSummary[]): void {
    if (!this.visible) {
      return;
    }
    const byCounterparty = new Map<string, { active?: ValueSetSummary; awaiting?: ValueSetSummary }>();
    for (const summary of summaries) {
      let slot = byCounterparty.get(summary.counterparty_id);
      if (!slot) {
        slot = {};
        byCounterparty.set(summary.counterparty_id, slot);
      }
      if (summary.status === 'active') {
        slot.active = summary;
      } else if (summary.status === 'awaiting_counterparty') {
        slot.awaiting = summary;
      }
    }
    const table: ValueSetRow[] = [];
    for (const [counterpartyId, slot] of byCounterparty) {
      const serving = slot.active ?? slot.awaiting;
      if (!serving) {
        continue;
      }
      table.push({
        counterpartyId,
        servingAddress: serving.own_address,
        counterpartyAddress: serving.counterparty_address,
        status: slot.awaiting ? 'awaiting_counterparty' : 'active',
        pendingAddress: slot.active && slot.awaiting ? slot.awaiting.own_address : null,
        secret: MASKED,
      });
    }
    this.table = table;
    this.offline = false;
  }

  // Connectivity loss only raises the banner; the last good table
  // stays on screen.
  markOffline(): void {
    this.offline = true;
  }

  rows(): ValueSetRow[] {
    return this.visible ? [...this.table] : [];
  }

  contextMenu(): readonly string[] {
    return CONTEXT_MENU;
  }
}
