/* tslint:disable */
/* eslint-disable */

/**
 * `privacy` is `"perfect"` or `"weak"`.
 */
export function check_capacity(topology_json: string, privacy: string): string;

/**
 * The four-user example as a topology document, to seed the page.
 */
export function example_topology(): string;

/**
 * Encodes one column of messages (`[W_1.., W_2.., ...]`) with keys drawn
 * from `seed`, then lets every user decode from its own access set.
 */
export function roundtrip(scheme_json: string, messages_json: string, seed: number): string;

/**
 * Synthesizes at the default field size and runs both verifiers.
 */
export function synthesize_and_verify(topology_json: string, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly check_capacity: (a: number, b: number, c: number, d: number) => [number, number];
    readonly example_topology: () => [number, number];
    readonly roundtrip: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly synthesize_and_verify: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
