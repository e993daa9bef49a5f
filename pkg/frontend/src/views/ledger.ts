// Ledger inspection panel: chain verification status, record lookups,
// and the node health banner, all direct echoes of node responses.

import {
  ApiResponse,
  GetRecordResult,
  HealthStatus,
  PairKeyWire,
  VerifyChainResult,
} from '../protocol.js';

export interface ChainStatusPanel {
  chainOk: boolean;
  firstBadHeight: number | null;
  registryOk: boolean;
  height: number;
}

export function chainStatusPanel(
  response: ApiResponse<VerifyChainResult>
): ChainStatusPanel | null {
  if (!response.ok) {
    return null;
  }
  const result = response.result;
  return {
    chainOk: result.chain.ok,
    firstBadHeight: result.chain.first_bad_height,
    registryOk: result.tip_registry.ok,
    height: result.height,
  };
}

export interface RecordCard {
  key: PairKeyWire;
  annotation: string;
  amountCommitments: [string, string];
  detailCommitments: [string, string];
  verifiedAt: number;
  blockHeight: number;
  indexInBlock: number;
}

export function recordCard(response: ApiResponse<GetRecordResult>): RecordCard | null {
  if (!response.ok) {
    return null;
  }
  const { record, proof } = response.result;
  return {
    key: record.key,
    annotation: record.annotation,
    amountCommitments: [record.amount_commitment_0, record.amount_commitment_1],
    detailCommitments: [record.detail_commitment_0, record.detail_commitment_1],
    verifiedAt: record.verified_at,
    blockHeight: proof.block_height,
    indexInBlock: proof.index,
  };
}

export interface HealthBanner {
  online: boolean;
  height: number;
}

export function healthBanner(health: HealthStatus): HealthBanner {
  return { online: health.ok, height: health.height };
}
