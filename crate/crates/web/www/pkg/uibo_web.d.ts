/* tslint:disable */
/* eslint-disable */

/**
 * Result of one simulated exploration run.
 */
export class Exploration {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly distance: number;
    /**
     * Believed positions after each step, same layout as `path`.
     */
    readonly estimates: Float64Array;
    readonly meanVibration: number;
    /**
     * True positions `[x0, y0, x1, y1, ...]`, starting with the start point.
     */
    readonly path: Float64Array;
}

export function explore(seed: number, length_scale: number, planner: string, entropy: boolean, budget: number, noise_sd: number, kappa: number, gamma: number): Exploration;

export function posterior1d(xs: Float64Array, zs: Float64Array, input_var: number, length_scale: number, n: number): Float64Array;

export function terrainGrid(seed: number, length_scale: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_exploration_free: (a: number, b: number) => void;
    readonly exploration_distance: (a: number) => number;
    readonly exploration_estimates: (a: number) => [number, number];
    readonly exploration_meanVibration: (a: number) => number;
    readonly exploration_path: (a: number) => [number, number];
    readonly explore: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly posterior1d: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly terrainGrid: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
