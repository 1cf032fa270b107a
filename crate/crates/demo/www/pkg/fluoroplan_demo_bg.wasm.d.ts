/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_wasmdemo_free: (a: number, b: number) => void;
export const wasmdemo_hover: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const wasmdemo_initAll: (a: number) => [number, number];
export const wasmdemo_initScrew: (a: number, b: number, c: number, d: number, e: number) => [bigint, number, number];
export const wasmdemo_new: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number];
export const wasmdemo_pointerDown: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const wasmdemo_pointerMove: (a: number, b: number, c: number) => number;
export const wasmdemo_pointerUp: (a: number) => void;
export const wasmdemo_state: (a: number) => [number, number, number, number];
export const wasmdemo_wheel: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
