/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demoscene_free: (a: number, b: number) => void;
export const demoscene_blur_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const demoscene_heatmap_rgba: (a: number, b: number, c: number) => [number, number, number, number];
export const demoscene_image_rgba: (a: number) => [number, number];
export const demoscene_mask_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demoscene_new: (a: number) => number;
export const demoscene_size: (a: number) => number;
export const demoscene_tokens: (a: number) => [number, number];
export const prompt_json: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
