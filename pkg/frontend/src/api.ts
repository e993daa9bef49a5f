// Typed client for the node's single-route RPC transport. Every call is
// signed by the wallet agent and waits for the server's acknowledgment;
// nothing is rendered optimistically.

import { WalletAgent } from './agent.js';
import {
  ApiResponse,
  Envelope,
  GetRecordResult,
  HealthStatus,
  JsonObject,
  ListPairsResult,
  OpeningPackageWire,
  OpeningRequestWire,
  PairKeyWire,
  PairRecordWire,
  VerifyChainResult,
} from './protocol.js';
import { ConsoleSession } from './session.js';

export class OfflineError extends Error {
  constructor(cause: string) {
    super(`node unreachable: ${cause}`);
    this.name = 'OfflineError';
  }
}

export interface Transport {
  rpc(envelope: Envelope): Promise<unknown>;
  health(): Promise<unknown>;
}

export function httpTransport(
  baseUrl: string,
  fetchFn: typeof fetch = fetch
): Transport {
  const root = baseUrl.replace(/\/$/, '');
  async function request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await fetchFn(`${root}${path}`, init);
    } catch (error) {
      throw new OfflineError(String(error));
    }
    return response.json();
  }
  return {
    rpc(envelope: Envelope): Promise<unknown> {
      return request('/rpc', {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(envelope),
      });
    },
    health(): Promise<unknown> {
      return request('/healthz');
    },
  };
}

export class NodeClient {
  private readonly transport: Transport;
  private readonly agent: WalletAgent;
  private readonly session: ConsoleSession;

  constructor(transport: Transport, agent: WalletAgent, session: ConsoleSession) {
    this.transport = transport;
    this.agent = agent;
    this.session = session;
  }

  async call<T>(endpoint: string, params: JsonObject): Promise<ApiResponse<T>> {
    const envelope = this.agent.signRequest(endpoint, params);
    let raw: unknown;
    try {
      raw = await this.transport.rpc(envelope);
    } catch (error) {
      if (error instanceof OfflineError) {
        throw error;
      }
      throw new OfflineError(String(error));
    }
    const response = raw as ApiResponse<T>;
    this.session.observeSeq(response.seq);
    return response;
  }

  listPairs(
    state: string,
    page = 0,
    pageSize = 50
  ): Promise<ApiResponse<ListPairsResult>> {
    return this.call('list-pairs', { state, page, page_size: pageSize });
  }

  requestOpening(
    key: PairKeyWire,
    targetAddress: string
  ): Promise<ApiResponse<OpeningRequestWire>> {
    return this.call('request-opening', {
      key: { ...key },
      target_address: targetAddress,
    });
  }

  submitOpening(
    requestId: string,
    pkg: OpeningPackageWire
  ): Promise<ApiResponse<PairRecordWire>> {
    return this.call('submit-opening', {
      request_id: requestId,
      package: { ...pkg, details: [...pkg.details] },
    });
  }

  verifyChain(): Promise<ApiResponse<VerifyChainResult>> {
    return this.call('verify-chain', {});
  }

  getRecord(key: PairKeyWire): Promise<ApiResponse<GetRecordResult>> {
    return this.call('get-record', { key: { ...key } });
  }

  async health(): Promise<HealthStatus> {
    let raw: unknown;
    try {
      raw = await this.transport.health();
    } catch (error) {
      if (error instanceof OfflineError) {
        throw error;
      }
      throw new OfflineError(String(error));
    }
    return raw as HealthStatus;
  }
}
