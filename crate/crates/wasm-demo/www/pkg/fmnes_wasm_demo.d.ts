/* tslint:disable */
/* eslint-disable */

/**
 * A two-dimensional run that the page advances a few generations per frame.
 */
export class DemoRun {
    free(): void;
    [Symbol.dispose](): void;
    constructor(strategy: string, problem: string, lambda: number, seed: bigint);
    snapshot(): string;
    /**
     * Advances up to `generations` generations and returns the snapshot JSON.
     * Stops early once the best value drops below 1e-10 or the state degenerates.
     */
    step(generations: number): string;
}

/**
 * Runs FM-NES and DX-NES-IC with the same seed and returns both best-value
 * curves as JSON.
 */
export function compare(problem: string, dim: number, lambda_fm: number, lambda_dx: number, budget: bigint, seed: bigint): string;

/**
 * Objective value at (x, y) of a 2-D benchmark; NaN outside the feasible set.
 */
export function objective(problem: string, x: number, y: number): number;

/**
 * Rank and distance weights for `lambda` random samples in `dim` dimensions,
 * of which the first `n_feasible` ranks are feasible.
 */
export function weights(lambda: number, dim: number, n_feasible: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demorun_free: (a: number, b: number) => void;
    readonly compare: (a: number, b: number, c: number, d: number, e: number, f: bigint, g: bigint) => [number, number, number, number];
    readonly demorun_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly demorun_snapshot: (a: number) => [number, number];
    readonly demorun_step: (a: number, b: number) => [number, number];
    readonly objective: (a: number, b: number, c: number, d: number) => number;
    readonly weights: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
