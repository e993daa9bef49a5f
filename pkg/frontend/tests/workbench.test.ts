// The workbench must show exactly the resolutions the node reported:
// revealed amounts from fulfilled openings, terminal states on both
// investigated pairs, and a tamper warning for the rejected opening.

import { describe, expect, it } from 'vitest';

import {
  fulfillmentPrompts,
  RiskWorkbench,
} from '../src/views/workbench.js';
import { loadFixture, OpeningFlow, WorkbenchFixture } from './fixtures.js';

const fixture = loadFixture<WorkbenchFixture>('workbench.json');

function keyOf(flow: OpeningFlow) {
  const first = flow.requests[0];
  if (!first.ok) {
    throw new Error('fixture request not ok');
  }
  return first.result.key;
}

function driveFlow(bench: RiskWorkbench, flow: OpeningFlow): void {
  for (const request of flow.requests) {
    bench.recordRequest(request);
  }
  for (const submit of flow.submits ?? []) {
    const outcome = bench.recordSubmission(submit);
    expect(outcome.accepted).toBe(true);
  }
}

describe('risk workbench', () => {
  it('queues exactly the risk pairs the node listed', () => {
    const bench = new RiskWorkbench();
    bench.loadQueue(fixture.risk_snapshot);
    expect(fixture.risk_snapshot.ok).toBe(true);
    expect(bench.queueSize).toBe(2);
    expect(bench.openCases().length).toBe(2);
  });

  it('renders the detail-mismatch resolution identical to the fixture', () => {
    const bench = new RiskWorkbench();
    bench.loadQueue(fixture.risk_snapshot);
    driveFlow(bench, fixture.resolved);
    bench.absorbListing(fixture.auditor_resolved);

    const file = bench.caseFor(keyOf(fixture.resolved));
    expect(file?.resolution).toBe(fixture.resolved.outcome);
    expect(file?.resolution).toBe('risk_resolved_verified');
    expect(file?.annotation).toBe('risk-resolved');

    // Both parties revealed the same amount; details differ, which is
    // exactly what the auditor listing reported.
    expect(file?.revealed.map((r) => r.amount)).toEqual([4200, 4200]);
    expect(file?.revealed.every((r) => r.commitmentVerified)).toBe(true);
    const listed = fixture.auditor_resolved;
    if (!listed.ok) {
      throw new Error('fixture response not ok');
    }
    expect(file?.revealed.map((r) => r.amount)).toEqual(
      listed.result.records[0].opening_requests.map((r) => r.package!.amount)
    );
  });

  it('renders the amount-mismatch resolution identical to the fixture', () => {
    const bench = new RiskWorkbench();
    bench.loadQueue(fixture.risk_snapshot);
    driveFlow(bench, fixture.confirmed);
    bench.absorbListing(fixture.auditor_confirmed);

    const file = bench.caseFor(keyOf(fixture.confirmed));
    expect(file?.resolution).toBe(fixture.confirmed.outcome);
    expect(file?.resolution).toBe('risk_confirmed_mismatch');
    expect(file?.revealed.map((r) => r.amount)).toEqual([100, 250]);
    expect(file?.revealed.every((r) => r.commitmentVerified)).toBe(true);
  });

  it('keeps terminal submission states equal to the recorded responses', () => {
    for (const flow of [fixture.resolved, fixture.confirmed]) {
      const bench = new RiskWorkbench();
      const submits = flow.submits ?? [];
      const last = submits[submits.length - 1];
      const outcome = bench.recordSubmission(last);
      expect(outcome).toEqual({ accepted: true, state: flow.outcome });
    }
  });

  it('surfaces a tamper warning for the rejected opening', () => {
    const bench = new RiskWorkbench();
    bench.loadQueue(fixture.risk_snapshot);
    for (const request of fixture.invalid_opening.requests) {
      bench.recordRequest(request);
    }
    const failed = fixture.invalid_opening.error_response!;
    const outcome = bench.recordSubmission(failed);
    expect(outcome.accepted).toBe(false);
    if (outcome.accepted) {
      throw new Error('unreachable');
    }
    expect(outcome.tamperWarning).toBe('amount opening does not match the commitment');
    if (!failed.ok) {
      expect(outcome.tamperWarning).toBe(failed.error.message);
    }

    const key = keyOf(fixture.invalid_opening);
    bench.flagTamper(key, outcome.tamperWarning!);
    expect(bench.caseFor(key)?.tamperWarnings).toEqual([
      'amount opening does not match the commitment',
    ]);
    // The pair itself is untouched by the failed opening.
    expect(bench.caseFor(key)?.resolution).toBeNull();
  });

  it('prompts the targeted company to fulfill its opening request', () => {
    const prompts = fulfillmentPrompts(fixture.resolved.prompt, [
      fixture.company_a_address,
    ]);
    expect(prompts.length).toBe(1);
    expect(prompts[0].targetAddress).toBe(fixture.company_a_address);
    expect(prompts[0].requestId).toBe('opr-000001');

    // Without a matching address nothing is prompted.
    expect(fulfillmentPrompts(fixture.resolved.prompt, [])).toEqual([]);
  });
});
