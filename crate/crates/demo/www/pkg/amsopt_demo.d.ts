/* tslint:disable */
/* eslint-disable */

/**
 * AMS² on an `n × n` grid over `s, b ∈ (0, 1)` with `s + b ≤ 1`;
 * cells outside the simplex are `null`.
 */
export function ams_grid(n: number, b_reg: number): string;

/**
 * AMS, its gradient and the bound constants at `(s, b)`.
 */
export function ams_point(s: number, b: number, b_reg: number): string;

/**
 * A random population, a perturbed log-odds scorer, its exact threshold
 * curve and the regrets at `θ̂` and `θ*`.
 */
export function sweep_demo(seed: bigint, cells: number, magnitude: number, b_reg: number): string;

/**
 * Pointwise Pinsker and logistic-to-cost-sensitive transfer at `(η, f, c)`.
 */
export function transfer_point(eta: number, f: number, c: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly ams_grid: (a: number, b: number) => [number, number];
    readonly ams_point: (a: number, b: number, c: number) => [number, number];
    readonly sweep_demo: (a: bigint, b: number, c: number, d: number) => [number, number];
    readonly transfer_point: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
