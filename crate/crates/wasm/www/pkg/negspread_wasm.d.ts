/* tslint:disable */
/* eslint-disable */

export class SliceResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly cold_negative_fraction: number;
    readonly cold_radius: number;
    readonly cold_rmse_after: number;
    readonly cold_rmse_before: number;
    readonly noisy: Float64Array;
    readonly processed: Float64Array;
    readonly profile_after: Float64Array;
    readonly profile_before: Float64Array;
    readonly profile_radius: Float64Array;
    readonly size: number;
}

export class SolveResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly alpha: Float64Array;
    readonly converged: boolean;
    readonly objective: number;
    readonly outer_iterations: number;
    readonly site_updates: number;
    readonly y: Float64Array;
}

/**
 * Noisy phantom slice and its processed counterpart.
 */
export function phantom_slice(size: number, sigma: number, seed: bigint): SliceResult;

/**
 * Solves a line (`height == 1`) or an image with a preset mask.
 */
export function solve_grid(values: Float64Array, width: number, height: number, mask: string): SolveResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sliceresult_free: (a: number, b: number) => void;
    readonly __wbg_solveresult_free: (a: number, b: number) => void;
    readonly phantom_slice: (a: number, b: number, c: bigint) => [number, number, number];
    readonly sliceresult_cold_negative_fraction: (a: number) => number;
    readonly sliceresult_cold_radius: (a: number) => number;
    readonly sliceresult_cold_rmse_after: (a: number) => number;
    readonly sliceresult_cold_rmse_before: (a: number) => number;
    readonly sliceresult_noisy: (a: number) => [number, number];
    readonly sliceresult_processed: (a: number) => [number, number];
    readonly sliceresult_profile_after: (a: number) => [number, number];
    readonly sliceresult_profile_before: (a: number) => [number, number];
    readonly sliceresult_profile_radius: (a: number) => [number, number];
    readonly sliceresult_size: (a: number) => number;
    readonly solve_grid: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly solveresult_alpha: (a: number) => [number, number];
    readonly solveresult_converged: (a: number) => number;
    readonly solveresult_objective: (a: number) => number;
    readonly solveresult_outer_iterations: (a: number) => number;
    readonly solveresult_site_updates: (a: number) => number;
    readonly solveresult_y: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
