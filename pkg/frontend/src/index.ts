export * from './protocol.js';
export * from './bytes.js';
export * from './agent.js';
export * from './session.js';
export * from './api.js';
export * from './csv.js';
export * from './views/status.js';
export * from './views/workbench.js';
export * from './views/valuesets.js';
export * from './views/ledger.js';
