/* tslint:disable */
/* eslint-disable */

export function best_response_curves(coeffs: Float64Array, q1: number, samples: number): Float64Array;

export function solve_equilibrium(coeffs: Float64Array, q1: number): Float64Array;

export function sweep_bifurcating(coeffs: Float64Array, lo: number, hi: number, step: number): Float64Array;

export function uniqueness_margins(coeffs: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly best_response_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly solve_equilibrium: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sweep_bifurcating: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly uniqueness_margins: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
