/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const agent_timeline: (a: number) => [number, number];
export const simulate: (a: number, b: number, c: number, d: number) => [number, number];
export const visit_rate: (a: number, b: number) => number;
export const __wbindgen_export_0: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
