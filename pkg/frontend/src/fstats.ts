/**
 * .fstats container: one UTF-8 JSON header line, then a little-endian
 * float32 body holding, per layer, the mean vector followed by the
 * row-major covariance matrix.
 */

import * as crypto from "crypto";
import { LayerStats } from "./features";
import { GrayImage } from "./png";

export const FSTATS_FORMAT_VERSION = 1;

export interface FstatsHeader {
  format_version: number;
  layers: { name: string; channels: number }[];
  image_sha256: string;
}

export function encodeFstats(layers: LayerStats[], imageHash: string): Buffer {
  const header: FstatsHeader = {
    format_version: FSTATS_FORMAT_VERSION,
    layers: layers.map((l) => ({ name: l.name, channels: l.channels })),
    image_sha256: imageHash,
  };
  const parts: Buffer[] = [Buffer.from(JSON.stringify(header) + "\n", "utf-8")];
  for (const layer of layers) {
    if (layer.cov.length !== layer.channels * layer.channels) {
      throw new Error("covariance shape mismatch");
    }
    parts.push(Buffer.from(Float32Array.from(layer.mean).buffer));
    parts.push(Buffer.from(Float32Array.from(layer.cov).buffer));
  }
  return Buffer.concat(parts);
}

export function decodeFstats(buffer: Buffer): {
  header: FstatsHeader;
  layers: LayerStats[];
} {
  const newline = buffer.indexOf(0x0a);
  if (newline < 0) throw new Error("malformed .fstats file: no header line");
  const header = JSON.parse(buffer.toString("utf-8", 0, newline)) as FstatsHeader;
  if (header.format_version !== FSTATS_FORMAT_VERSION) {
    throw new Error("unsupported .fstats format version");
  }
  const expected = header.layers.reduce(
    (sum, l) => sum + 4 * (l.channels + l.channels * l.channels),
    0,
  );
  if (buffer.length - (newline + 1) !== expected) {
    throw new Error("body length does not match header");
  }
  let pos = newline + 1;
  const layers: LayerStats[] = [];
  for (const { name, channels } of header.layers) {
    const mean = new Float64Array(channels);
    for (let i = 0; i < channels; i++) {
      mean[i] = buffer.readFloatLE(pos + 4 * i);
    }
    pos += 4 * channels;
    const cov = new Float64Array(channels * channels);
    for (let i = 0; i < channels * channels; i++) {
      cov[i] = buffer.readFloatLE(pos + 4 * i);
    }
    pos += 4 * channels * channels;
    layers.push({ name, mean, cov, channels });
  }
  return { header, layers };
}

/** SHA-256 of the image as rounded 8-bit row-major pixels. */
export function imageSha256(image: GrayImage): string {
  const bytes = Buffer.alloc(image.data.length);
  for (let i = 0; i < image.data.length; i++) {
    bytes[i] = Math.min(255, Math.max(0, Math.round(image.data[i])));
  }
  return crypto.createHash("sha256").update(bytes).digest("hex");
}
