/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_pitsdemo_free: (a: number, b: number) => void;
export const pitsdemo_add_log: (a: number, b: number, c: number, d: number) => [number, number, number];
export const pitsdemo_add_random: (a: number, b: number) => [number, number];
export const pitsdemo_audit: (a: number) => [number, number, number, number];
export const pitsdemo_insert: (a: number, b: number, c: number, d: number) => [number, number, number];
export const pitsdemo_new: (a: number, b: number, c: number) => number;
export const pitsdemo_receipt: (a: number, b: number) => [number, number, number, number];
export const pitsdemo_seal: (a: number) => [number, number, number, number];
export const pitsdemo_tamper: (a: number, b: number, c: number) => [number, number];
export const pitsdemo_view: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
