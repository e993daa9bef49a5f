// Console session: who is signed in, what they may see, and how far
// the server's response sequence has advanced for this tab.

import { WalletAgent } from './agent.js';

export type Role = 'company' | 'auditor' | 'committee' | 'operator';

export type ViewName =
  | 'value-sets'
  | 'transactions'
  | 'workbench'
  | 'access-requests'
  | 'ledger';

const VIEW_ROLES: Record<ViewName, readonly Role[]> = {
  'value-sets': ['company'],
  transactions: ['company', 'auditor'],
  workbench: ['auditor'],
  'access-requests': ['committee'],
  ledger: ['company', 'auditor', 'committee', 'operator'],
};

const ALL_VIEWS = Object.keys(VIEW_ROLES) as ViewName[];

export class ConsoleSession {
  readonly participantId: string;
  readonly role: Role;
  readonly token: string;
  seqCursor = 0;

  constructor(participantId: string, role: Role, token: string) {
    this.participantId = participantId;
    this.role = role;
    this.token = token;
  }

  // The token is the wallet's signature over a session statement, so
  // holding it proves key access without the key entering the console.
  static open(agent: WalletAgent, role: Role): ConsoleSession {
    const statement = new TextEncoder().encode(
      `FutureAB-console-session:${agent.companyId}:${role}`
    );
    return new ConsoleSession(agent.companyId, role, agent.sign(statement));
  }

  canSee(view: ViewName): boolean {
    return VIEW_ROLES[view].includes(this.role);
  }

  visibleViews(): ViewName[] {
    return ALL_VIEWS.filter((view) => this.canSee(view));
  }

  // Cursor only moves forward; replays of older responses never wind
  // the session's notion of server time backwards.
  observeSeq(seq: number): void {
    if (seq > this.seqCursor) {
      this.seqCursor = seq;
    }
  }
}
