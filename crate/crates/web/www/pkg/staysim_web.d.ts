/* tslint:disable */
/* eslint-disable */
/**
 * Runs the whole pipeline and keeps the result for [`agent_timeline`].
 */
export function simulate(n_agents: number, seed: number, agent_prevalence: number, staypoint_prevalence: number): string;
/**
 * Visit-rate score for one (agent, POI) pair before smoothing.
 */
export function visit_rate(train_count: number, test_count: number): number;
/**
 * Train and test staypoints of one agent, with counts and scores per test row.
 */
export function agent_timeline(agent_id: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
  readonly memory: WebAssembly.Memory;
  readonly agent_timeline: (a: number) => [number, number];
  readonly simulate: (a: number, b: number, c: number, d: number) => [number, number];
  readonly visit_rate: (a: number, b: number) => number;
  readonly __wbindgen_export_0: WebAssembly.Table;
  readonly __wbindgen_free: (a: number, b: number, c: number) => void;
  readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;
/**
* Instantiates the given `module`, which can either be bytes or
* a precompiled `WebAssembly.Module`.
*
* @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
*
* @returns {InitOutput}
*/
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
* If `module_or_path` is {RequestInfo} or {URL}, makes a request and
* for everything else, calls `WebAssembly.instantiate` directly.
*
* @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
*
* @returns {Promise<InitOutput>}
*/
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
