/* tslint:disable */
/* eslint-disable */

/**
 * Two objects crossing, tracked once up front and replayed frame by frame.
 */
export class CrossingDemo {
    free(): void;
    [Symbol.dispose](): void;
    frames(): number;
    height(): number;
    constructor(seed: number, same_color: boolean, jitter: number);
    /**
     * RGBA pixels of frame `f` with raw detections in gray and tracks in color.
     */
    render(f: number): Uint8Array;
    summary(): string;
    /**
     * Which tracker extended each trajectory at frame `f`: `id:A`, `id:K` or `id:new`.
     */
    tags(f: number): string;
    width(): number;
}

/**
 * Shifts a textured 160x120 frame by `(dx, dy)` and tracks corners across it.
 * Returns `[features, recovered within 0.5 px, mean dx, mean dy]`.
 */
export function lk_shift(dx: number, dy: number, seed: number): Float64Array;

/**
 * Descriptor weights from flattened per-neighbor similarities (five per
 * neighbor), followed by the global similarity of `pair_sims` when both
 * objects carry those weights.
 */
export function weights(neighbor_sims: Float64Array, pair_sims: Float64Array, ds_floor: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_crossingdemo_free: (a: number, b: number) => void;
    readonly crossingdemo_frames: (a: number) => number;
    readonly crossingdemo_height: (a: number) => number;
    readonly crossingdemo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly crossingdemo_render: (a: number, b: number) => [number, number];
    readonly crossingdemo_summary: (a: number) => [number, number];
    readonly crossingdemo_tags: (a: number, b: number) => [number, number];
    readonly crossingdemo_width: (a: number) => number;
    readonly lk_shift: (a: number, b: number, c: number) => [number, number, number, number];
    readonly weights: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
