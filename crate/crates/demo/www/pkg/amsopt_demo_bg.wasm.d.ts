/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const ams_grid: (a: number, b: number) => [number, number];
export const ams_point: (a: number, b: number, c: number) => [number, number];
export const sweep_demo: (a: bigint, b: number, c: number, d: number) => [number, number];
export const transfer_point: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
