// Dataset providers: local CIFAR-10 binary batches when available, plus a
// bundled procedural dataset so the pipeline runs without any downloads.

import { existsSync, readFileSync } from 'fs'
import { join } from 'path'

export const IMAGE_SIZE = 32
export const CHANNELS = 3
export const N_CLASSES = 10
const PIXELS = IMAGE_SIZE * IMAGE_SIZE * CHANNELS

export interface ImageSet {
  /** float32 pixels in [0,1], length n * 32*32*3, NHWC */
  pixels: Float32Array
  /** class labels, length n; empty for outlier sets */
  labels: Int32Array
  n: number
  name: string
}

// Deterministic 32-bit PRNG (mulberry32); fast enough for millions of draws
// and identical on every platform.
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function gaussianPair(rand: () => number): [number, number] {
  const u = Math.max(rand(), 1e-12)
  const v = rand()
  const r = Math.sqrt(-2 * Math.log(u))
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)]
}

// Class signatures: blob centers on a ring plus a class color. Neighboring
// classes sit close enough that jitter makes them confusable, which keeps a
// small CNN in the intended mid-range accuracy band.
const CLASS_COLORS: Array<[number, number, number]> = [
  [0.9, 0.2, 0.2],
  [0.2, 0.9, 0.2],
  [0.2, 0.2, 0.9],
  [0.9, 0.9, 0.2],
  [0.9, 0.2, 0.9],
  [0.2, 0.9, 0.9],
  [0.7, 0.5, 0.2],
  [0.5, 0.2, 0.7],
  [0.2, 0.7, 0.5],
  [0.6, 0.6, 0.6],
]

const RING_RADIUS = 9
const BLOB_SIGMA = 4.5
const POSITION_JITTER = 6.5
const COLOR_JITTER = 0.6
const PIXEL_NOISE = 0.28

function classCenter(cls: number): [number, number] {
  const angle = (2 * Math.PI * cls) / N_CLASSES
  return [
    IMAGE_SIZE / 2 + RING_RADIUS * Math.cos(angle),
    IMAGE_SIZE / 2 + RING_RADIUS * Math.sin(angle),
  ]
}

/** Procedural in-distribution set: one noisy colored blob per image. */
export function blobs10(n: number, seed: number): ImageSet {
  const rand = mulberry32(seed)
  const pixels = new Float32Array(n * PIXELS)
  const labels = new Int32Array(n)
  for (let i = 0; i < n; i++) {
    const cls = i % N_CLASSES
    labels[i] = cls
    const [g1, g2] = gaussianPair(rand)
    const [cx0, cy0] = classCenter(cls)
    const cx = cx0 + POSITION_JITTER * g1
    const cy = cy0 + POSITION_JITTER * g2
    const color = CLASS_COLORS[cls].map(
      (c) => Math.min(1, Math.max(0, c + COLOR_JITTER * (rand() - 0.5))),
    )
    const base = i * PIXELS
    for (let y = 0; y < IMAGE_SIZE; y++) {
      for (let x = 0; x < IMAGE_SIZE; x++) {
        const d2 = (x - cx) ** 2 + (y - cy) ** 2
        const blob = Math.exp(-d2 / (2 * BLOB_SIGMA * BLOB_SIGMA))
        const p = base + (y * IMAGE_SIZE + x) * CHANNELS
        for (let c = 0; c < CHANNELS; c++) {
          const value = blob * color[c] + PIXEL_NOISE * (rand() - 0.5)
          pixels[p + c] = Math.min(1, Math.max(0, value))
        }
      }
    }
  }
  return { pixels, labels, n, name: `blobs10(seed=${seed})` }
}

// Outlier contrast relative to the inlier blobs. Lower contrast is the
// distribution shift the supervisors must pick up; the ranges overlap the
// inlier response enough to keep detection imperfect.
const OUTLIER_AMP_LO = 0.35
const OUTLIER_AMP_HI = 0.8

/** Procedural outlier set: scenes of several low-contrast blobs at random
 * positions with random colors. Same image statistics family as the
 * inliers, but no class structure and a contrast shift, the way a
 * disjoint, differently captured outlier set would look. */
export function scatterblobs(n: number, seed: number): ImageSet {
  const rand = mulberry32(seed)
  const pixels = new Float32Array(n * PIXELS)
  for (let i = 0; i < n; i++) {
    const blobCount = 2 + Math.floor(rand() * 3)
    const amp = OUTLIER_AMP_LO + (OUTLIER_AMP_HI - OUTLIER_AMP_LO) * rand()
    const blobs: Array<{ cx: number; cy: number; color: number[] }> = []
    for (let b = 0; b < blobCount; b++) {
      blobs.push({
        cx: rand() * IMAGE_SIZE,
        cy: rand() * IMAGE_SIZE,
        color: [amp * rand(), amp * rand(), amp * rand()],
      })
    }
    const base = i * PIXELS
    for (let y = 0; y < IMAGE_SIZE; y++) {
      for (let x = 0; x < IMAGE_SIZE; x++) {
        const p = base + (y * IMAGE_SIZE + x) * CHANNELS
        for (let c = 0; c < CHANNELS; c++) {
          let value = PIXEL_NOISE * (rand() - 0.5)
          for (const blob of blobs) {
            const d2 = (x - blob.cx) ** 2 + (y - blob.cy) ** 2
            value += Math.exp(-d2 / (2 * BLOB_SIGMA * BLOB_SIGMA)) * blob.color[c]
          }
          pixels[p + c] = Math.min(1, Math.max(0, value))
        }
      }
    }
  }
  return { pixels, labels: new Int32Array(0), n, name: `scatterblobs(seed=${seed})` }
}

/** CIFAR-10 binary batches (data_batch_*.bin / test_batch.bin). */
export function cifar10(dir: string, files: string[], limit: number): ImageSet {
  const rows: Buffer[] = []
  for (const file of files) {
    const path = join(dir, file)
    if (!existsSync(path)) throw new Error(`missing CIFAR-10 batch ${path}`)
    rows.push(readFileSync(path))
  }
  const record = 1 + PIXELS
  const total = rows.reduce((acc, b) => acc + b.length / record, 0)
  const n = Math.min(limit, total)
  const pixels = new Float32Array(n * PIXELS)
  const labels = new Int32Array(n)
  let i = 0
  for (const buf of rows) {
    for (let r = 0; r * record < buf.length && i < n; r++, i++) {
      const off = r * record
      labels[i] = buf[off]
      // CIFAR stores planes (RRR..GGG..BBB); convert to interleaved HWC.
      for (let c = 0; c < CHANNELS; c++) {
        for (let px = 0; px < IMAGE_SIZE * IMAGE_SIZE; px++) {
          pixels[i * PIXELS + px * CHANNELS + c] = buf[off + 1 + c * 1024 + px] / 255
        }
      }
    }
  }
  return { pixels, labels, n, name: `cifar10(${dir})` }
}

export interface DatasetRequest {
  name: string
  trainCount: number
  testCount: number
  seed: number
}

export function loadInDistribution(req: DatasetRequest): { train: ImageSet; test: ImageSet } {
  if (req.name === 'blobs10') {
    return {
      train: blobs10(req.trainCount, req.seed),
      test: blobs10(req.testCount, req.seed + 1),
    }
  }
  if (req.name.startsWith('cifar10:')) {
    const dir = req.name.slice('cifar10:'.length)
    return {
      train: cifar10(
        dir,
        ['data_batch_1.bin', 'data_batch_2.bin', 'data_batch_3.bin', 'data_batch_4.bin', 'data_batch_5.bin'].filter(
          (f) => existsSync(join(dir, f)),
        ),
        req.trainCount,
      ),
      test: cifar10(dir, ['test_batch.bin'], req.testCount),
    }
  }
  throw new Error(`unknown in-distribution dataset ${req.name}`)
}

export function loadOutliers(name: string, count: number, seed: number): ImageSet {
  if (name === 'scatterblobs') return scatterblobs(count, seed + 2)
  if (name.startsWith('cifar10:')) {
    const dir = name.slice('cifar10:'.length)
    const set = cifar10(dir, ['test_batch.bin'], count)
    // An outlier set carries no in-distribution labels.
    return { ...set, labels: new Int32Array(0) }
  }
  throw new Error(`unknown outlier dataset ${name}`)
}
