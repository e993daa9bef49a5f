// Role gating and session tokens.

import { describe, expect, it } from 'vitest';

import { groupFromWire, WalletAgent } from '../src/agent.js';
import { ConsoleSession, Role, ViewName } from '../src/session.js';
import { loadFixture, SigningFixture } from './fixtures.js';

const fixture = loadFixture<SigningFixture>('signing.json');
const params = groupFromWire(fixture.group);

const GATES: [ViewName, Role[]][] = [
  ['value-sets', ['company']],
  ['transactions', ['company', 'auditor']],
  ['workbench', ['auditor']],
  ['access-requests', ['committee']],
  ['ledger', ['company', 'auditor', 'committee', 'operator']],
];

describe('console session', () => {
  it('gates every view by role', () => {
    for (const [view, allowed] of GATES) {
      for (const role of ['company', 'auditor', 'committee', 'operator'] as Role[]) {
        const session = new ConsoleSession('p-1', role, 'tok');
        expect(session.canSee(view)).toBe(allowed.includes(role));
      }
    }
  });

  it('lists only the views the role may open', () => {
    expect(new ConsoleSession('c', 'company', 't').visibleViews()).toEqual([
      'value-sets',
      'transactions',
      'ledger',
    ]);
    expect(new ConsoleSession('a', 'auditor', 't').visibleViews()).toEqual([
      'transactions',
      'workbench',
      'ledger',
    ]);
    expect(new ConsoleSession('k', 'committee', 't').visibleViews()).toEqual([
      'access-requests',
      'ledger',
    ]);
  });

  it('opens with a wallet-signed token sized like a signature', () => {
    const agent = new WalletAgent(params, 'comp-a', fixture.agent.private_key);
    const session = ConsoleSession.open(agent, 'company');
    expect(session.participantId).toBe('comp-a');
    expect(session.token).toMatch(/^[0-9a-f]+$/);
    expect(session.token.length).toBe(2 * 2 * params.scalarSize);
    // Deterministic signing: reopening yields the same token.
    expect(ConsoleSession.open(agent, 'company').token).toBe(session.token);
    expect(ConsoleSession.open(agent, 'auditor').token).not.toBe(session.token);
  });

  it('keeps the sequence cursor monotone', () => {
    const session = new ConsoleSession('c', 'company', 't');
    session.observeSeq(4);
    session.observeSeq(2);
    expect(session.seqCursor).toBe(4);
  });
});
