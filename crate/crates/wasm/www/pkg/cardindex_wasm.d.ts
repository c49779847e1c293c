/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * JSON of the hybrid estimate for `[x0, x1] x [y0, y1]` at refinement `depth`.
     */
    estimate(x0: number, y0: number, x1: number, y1: number, depth: number, seed: bigint): string;
    /**
     * Generates a table of `rows` points and trains the index model on it.
     */
    constructor(kind: string, rows: number, seed: bigint, epochs: number);
    /**
     * All points as a flat `[x0, y0, x1, y1, ...]` array.
     */
    points(): Uint32Array;
    /**
     * JSON trace of a range scan over `[x0, x1] x [y0, y1]`.
     */
    range_scan(x0: number, y0: number, x1: number, y1: number): string;
    readonly final_loss: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_estimate: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly demo_final_loss: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number];
    readonly demo_points: (a: number) => [number, number];
    readonly demo_range_scan: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
