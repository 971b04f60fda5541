/**
 * Writers (and readers, for self-checking) of the RVLM binary interchange
 * format consumed by the chunkseek engine.
 *
 * Every file is little-endian: 4-byte magic "RVLM", u32 version, u32 record
 * kind, kind-specific u32 shape fields, a contiguous float32 payload, and a
 * u64 FNV-1a checksum of the payload bytes.
 */

import { writeFileSync, readFileSync } from 'node:fs';

export const MAGIC = 'RVLM';
export const FORMAT_VERSION = 1;
export const KIND_FRAME_FEATURES = 0;
export const KIND_QUERY_FEATURES = 2;

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const U64_MASK = 0xffffffffffffffffn;

export function fnv1a64(payload: Uint8Array): bigint {
  let hash = FNV_OFFSET;
  for (let i = 0; i < payload.length; i++) {
    hash ^= BigInt(payload[i]);
    hash = (hash * FNV_PRIME) & U64_MASK;
  }
  return hash;
}

function packRecord(kind: number, shape: number[], payload: Float32Array): Uint8Array {
  const payloadBytes = new Uint8Array(payload.buffer, payload.byteOffset, payload.byteLength);
  const total = 12 + 4 * shape.length + payloadBytes.length + 8;
  const out = new Uint8Array(total);
  const view = new DataView(out.buffer);
  out.set(new TextEncoder().encode(MAGIC), 0);
  view.setUint32(4, FORMAT_VERSION, true);
  view.setUint32(8, kind, true);
  let offset = 12;
  for (const dim of shape) {
    view.setUint32(offset, dim, true);
    offset += 4;
  }
  out.set(payloadBytes, offset);
  offset += payloadBytes.length;
  view.setBigUint64(offset, fnv1a64(payloadBytes), true);
  return out;
}

export interface FrameFeatureTensor {
  frames: number;
  gridH: number;
  gridW: number;
  dim: number;
  /** frames * gridH * gridW * dim values in C order */
  data: Float32Array;
}

export function writeFrameFeatures(path: string, tensor: FrameFeatureTensor): void {
  const { frames, gridH, gridW, dim, data } = tensor;
  if (data.length !== frames * gridH * gridW * dim) {
    throw new Error(
      `frame tensor length ${data.length} does not match ${frames}x${gridH}x${gridW}x${dim}`,
    );
  }
  writeFileSync(path, packRecord(KIND_FRAME_FEATURES, [frames, gridH, gridW, dim], data));
}

export function writeQueryFeatures(path: string, count: number, dim: number, data: Float32Array): void {
  if (data.length !== count * dim) {
    throw new Error(`query matrix length ${data.length} does not match ${count}x${dim}`);
  }
  writeFileSync(path, packRecord(KIND_QUERY_FEATURES, [count, dim], data));
}

export interface ParsedRecord {
  kind: number;
  shape: number[];
  data: Float32Array;
}

/** Parse a tensor record back, verifying magic, version, and checksum. */
export function readRecord(path: string, shapeFields: number): ParsedRecord {
  const blob = readFileSync(path);
  const bytes = new Uint8Array(blob.buffer, blob.byteOffset, blob.byteLength);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (new TextDecoder().decode(bytes.subarray(0, 4)) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = view.getUint32(4, true);
  if (version !== FORMAT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const kind = view.getUint32(8, true);
  const shape: number[] = [];
  let offset = 12;
  for (let i = 0; i < shapeFields; i++) {
    shape.push(view.getUint32(offset, true));
    offset += 4;
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = bytes.subarray(offset, offset + count * 4);
  if (payload.length !== count * 4 || bytes.length !== offset + count * 4 + 8) {
    throw new Error(`${path}: truncated or oversized payload`);
  }
  const stored = view.getBigUint64(offset + count * 4, true);
  if (fnv1a64(payload) !== stored) {
    throw new Error(`${path}: checksum mismatch`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = view.getFloat32(offset + i * 4, true);
  }
  return { kind, shape, data };
}
