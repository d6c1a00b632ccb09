/* tslint:disable */
/* eslint-disable */

export class DemoScene {
    free(): void;
    [Symbol.dispose](): void;
    blur_rgba(selected: Uint32Array, tau_black: number, tau_avg: number, radius: number): Uint8Array;
    heatmap_rgba(selected: Uint32Array): Uint8Array;
    image_rgba(): Uint8Array;
    mask_rgba(selected: Uint32Array, tau: number): Uint8Array;
    constructor(seed: number);
    size(): number;
    /**
     * Caption tokens as a JSON array.
     */
    tokens(): string;
}

/**
 * Hate spans and the generation prompt, as JSON.
 */
export function prompt_json(hateful: string, normalized: string, budget: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demoscene_free: (a: number, b: number) => void;
    readonly demoscene_blur_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly demoscene_heatmap_rgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demoscene_image_rgba: (a: number) => [number, number];
    readonly demoscene_mask_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demoscene_new: (a: number) => number;
    readonly demoscene_size: (a: number) => number;
    readonly demoscene_tokens: (a: number) => [number, number];
    readonly prompt_json: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
