/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_exploration_free: (a: number, b: number) => void;
export const exploration_distance: (a: number) => number;
export const exploration_estimates: (a: number) => [number, number];
export const exploration_meanVibration: (a: number) => number;
export const exploration_path: (a: number) => [number, number];
export const explore: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const posterior1d: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const terrainGrid: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
