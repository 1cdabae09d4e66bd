/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_crossingdemo_free: (a: number, b: number) => void;
export const crossingdemo_frames: (a: number) => number;
export const crossingdemo_height: (a: number) => number;
export const crossingdemo_new: (a: number, b: number, c: number) => [number, number, number];
export const crossingdemo_render: (a: number, b: number) => [number, number];
export const crossingdemo_summary: (a: number) => [number, number];
export const crossingdemo_tags: (a: number, b: number) => [number, number];
export const crossingdemo_width: (a: number) => number;
export const lk_shift: (a: number, b: number, c: number) => [number, number, number, number];
export const weights: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
