/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sliceresult_free: (a: number, b: number) => void;
export const __wbg_solveresult_free: (a: number, b: number) => void;
export const phantom_slice: (a: number, b: number, c: bigint) => [number, number, number];
export const sliceresult_cold_negative_fraction: (a: number) => number;
export const sliceresult_cold_radius: (a: number) => number;
export const sliceresult_cold_rmse_after: (a: number) => number;
export const sliceresult_cold_rmse_before: (a: number) => number;
export const sliceresult_noisy: (a: number) => [number, number];
export const sliceresult_processed: (a: number) => [number, number];
export const sliceresult_profile_after: (a: number) => [number, number];
export const sliceresult_profile_before: (a: number) => [number, number];
export const sliceresult_profile_radius: (a: number) => [number, number];
export const sliceresult_size: (a: number) => number;
export const solve_grid: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const solveresult_alpha: (a: number) => [number, number];
export const solveresult_converged: (a: number) => number;
export const solveresult_objective: (a: number) => number;
export const solveresult_outer_iterations: (a: number) => number;
export const solveresult_site_updates: (a: number) => number;
export const solveresult_y: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
