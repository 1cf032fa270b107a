/* tslint:disable */
/* eslint-disable */

/**
 * JavaScript handle on a [`Demo`].
 */
export class WasmDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Region under the pointer without starting a drag, for cursor feedback.
     */
    hover(view: string, u: number, v: number): string;
    initAll(): void;
    initScrew(label: string, side: string): bigint;
    constructor(levels: number, seed: bigint, lp_gain: number, lp_offset_mm: number, correct: boolean);
    pointerDown(view: string, u: number, v: number): string;
    pointerMove(u: number, v: number): boolean;
    pointerUp(): void;
    state(): string;
    wheel(view: string, u: number, v: number, step_mm: number): boolean;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_wasmdemo_free: (a: number, b: number) => void;
    readonly wasmdemo_hover: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly wasmdemo_initAll: (a: number) => [number, number];
    readonly wasmdemo_initScrew: (a: number, b: number, c: number, d: number, e: number) => [bigint, number, number];
    readonly wasmdemo_new: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number];
    readonly wasmdemo_pointerDown: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly wasmdemo_pointerMove: (a: number, b: number, c: number) => number;
    readonly wasmdemo_pointerUp: (a: number) => void;
    readonly wasmdemo_state: (a: number) => [number, number, number, number];
    readonly wasmdemo_wheel: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
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
