/* tslint:disable */
/* eslint-disable */

export class PitsDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `tick` is milliseconds into the epoch.
     */
    add_log(text: string, tick: number): number;
    add_random(n: number): void;
    audit(): string;
    insert(text: string, tick: number): number;
    constructor(depth_p: number, size_p: number, seed: number);
    receipt(id: number): string;
    seal(): string;
    tamper(id: number, _delete: boolean): void;
    view(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_pitsdemo_free: (a: number, b: number) => void;
    readonly pitsdemo_add_log: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly pitsdemo_add_random: (a: number, b: number) => [number, number];
    readonly pitsdemo_audit: (a: number) => [number, number, number, number];
    readonly pitsdemo_insert: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly pitsdemo_new: (a: number, b: number, c: number) => number;
    readonly pitsdemo_receipt: (a: number, b: number) => [number, number, number, number];
    readonly pitsdemo_seal: (a: number) => [number, number, number, number];
    readonly pitsdemo_tamper: (a: number, b: number, c: number) => [number, number];
    readonly pitsdemo_view: (a: number) => [number, number];
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
