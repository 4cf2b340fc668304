/**
 * Builtin feature backbone: a fixed bank of eight zero-sum 3x3 derivative
 * filters applied over a Gaussian pyramid, with per-level channel means and
 * covariances computed over spatial positions.
 *
 * The definition (filters, blur taps, boundary crop, normalization) matches
 * the statistics extractor built into the main package, so exported files
 * are drop-in references for its aesthetic loss.
 */

export interface LayerStats {
  name: string;
  mean: Float64Array; // (C)
  cov: Float64Array; // (C x C) row-major
  channels: number;
}

export const FILTER_BANK: number[][][] = [
  [[0, 0, 0], [-0.5, 0, 0.5], [0, 0, 0]], // d/dx
  [[0, -0.5, 0], [0, 0, 0], [0, 0.5, 0]], // d/dy
  [[0, 0, 0], [1, -2, 1], [0, 0, 0]], // d2/dx2
  [[0, 1, 0], [0, -2, 0], [0, 1, 0]], // d2/dy2
  [[0.25, 0, -0.25], [0, 0, 0], [-0.25, 0, 0.25]], // d2/dxdy
  [[0, 1, 0], [1, -4, 1], [0, 1, 0]], // laplacian
  [[-0.5, 0, 0], [0, 0, 0], [0, 0, 0.5]], // diagonal /
  [[0, 0, -0.5], [0, 0, 0], [0.5, 0, 0]], // diagonal \
];

export const N_CHANNELS = FILTER_BANK.length;

const BLUR_1D = [1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16];

/** Zero-pad boundary crop that keeps interior filter responses exact. */
export const CROP = 6;

export interface Plane {
  width: number;
  height: number;
  data: Float64Array;
}

function at(p: Plane, y: number, x: number): number {
  if (y < 0 || x < 0 || y >= p.height || x >= p.width) return 0; // zero pad
  return p.data[y * p.width + x];
}

/** Cross-correlation with a 3x3 kernel, zero padding, "same" output. */
export function correlate3x3(p: Plane, kernel: number[][]): Plane {
  const out = new Float64Array(p.width * p.height);
  for (let y = 0; y < p.height; y++) {
    for (let x = 0; x < p.width; x++) {
      let acc = 0;
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const w = kernel[ky][kx];
          if (w !== 0) acc += w * at(p, y + ky - 1, x + kx - 1);
        }
      }
      out[y * p.width + x] = acc;
    }
  }
  return { width: p.width, height: p.height, data: out };
}

/** Separable 5-tap binomial blur with zero padding. */
export function blur(p: Plane): Plane {
  const tmp = new Float64Array(p.width * p.height);
  for (let y = 0; y < p.height; y++) {
    for (let x = 0; x < p.width; x++) {
      let acc = 0;
      for (let k = -2; k <= 2; k++) acc += BLUR_1D[k + 2] * at(p, y, x + k);
      tmp[y * p.width + x] = acc;
    }
  }
  const horizontal: Plane = { width: p.width, height: p.height, data: tmp };
  const out = new Float64Array(p.width * p.height);
  for (let y = 0; y < p.height; y++) {
    for (let x = 0; x < p.width; x++) {
      let acc = 0;
      for (let k = -2; k <= 2; k++) acc += BLUR_1D[k + 2] * at(horizontal, y + k, x);
      out[y * p.width + x] = acc;
    }
  }
  return { width: p.width, height: p.height, data: out };
}

export function downsample(p: Plane): Plane {
  const width = Math.ceil(p.width / 2);
  const height = Math.ceil(p.height / 2);
  const out = new Float64Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      out[y * width + x] = p.data[2 * y * p.width + 2 * x];
    }
  }
  return { width, height, data: out };
}

function minSideForLevels(levels: number): number {
  return (2 * CROP + 4) * 2 ** (levels - 1);
}

function levelStats(p: Plane, name: string): LayerStats {
  const maps = FILTER_BANK.map((k) => correlate3x3(p, k));
  const h = p.height - 2 * CROP;
  const w = p.width - 2 * CROP;
  const n = h * w;
  const mean = new Float64Array(N_CHANNELS);
  const centered: Float64Array[] = [];
  for (let c = 0; c < N_CHANNELS; c++) {
    const vals = new Float64Array(n);
    let sum = 0;
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const v = maps[c].data[(y + CROP) * p.width + (x + CROP)];
        vals[y * w + x] = v;
        sum += v;
      }
    }
    mean[c] = sum / n;
    for (let i = 0; i < n; i++) vals[i] -= mean[c];
    centered.push(vals);
  }
  const cov = new Float64Array(N_CHANNELS * N_CHANNELS);
  for (let a = 0; a < N_CHANNELS; a++) {
    for (let b = a; b < N_CHANNELS; b++) {
      let acc = 0;
      const va = centered[a];
      const vb = centered[b];
      for (let i = 0; i < n; i++) acc += va[i] * vb[i];
      cov[a * N_CHANNELS + b] = acc / n;
      cov[b * N_CHANNELS + a] = acc / n;
    }
  }
  return { name, mean, cov, channels: N_CHANNELS };
}

export const DEFAULT_LAYERS = ["level0", "level1", "level2"];

/**
 * Compute per-layer statistics of a [0,255] grayscale plane.
 *
 * Layer names are "level<k>" for pyramid level k; they must be requested in
 * ascending order with no gaps (each level is derived from the previous one).
 */
export function extractStats(image: Plane, layers: string[]): LayerStats[] {
  if (layers.length === 0) throw new Error("no layers requested");
  const indices = layers.map((name) => {
    const m = /^level(\d+)$/.exec(name);
    if (!m) {
      throw new Error(
        `unknown layer ${JSON.stringify(name)}; builtin layers are level0, level1, ...`,
      );
    }
    return Number(m[1]);
  });
  indices.forEach((idx, i) => {
    if (idx !== i) throw new Error("layers must be level0..levelN in order");
  });
  const levels = indices.length;
  if (Math.min(image.width, image.height) < minSideForLevels(levels)) {
    throw new Error(
      `image side ${Math.min(image.width, image.height)} below minimum ` +
        `${minSideForLevels(levels)} for ${levels} levels`,
    );
  }

  // normalize to [0, 1] to match the consumer's convention
  const normalized: Plane = {
    width: image.width,
    height: image.height,
    data: Float64Array.from(image.data, (v) => v / 255),
  };
  const stats: LayerStats[] = [];
  let level = normalized;
  for (let k = 0; k < levels; k++) {
    if (k > 0) level = downsample(blur(level));
    stats.push(levelStats(level, layers[k]));
  }
  return stats;
}
