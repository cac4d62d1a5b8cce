// Small convolutional classifier plus directory-based save/load. Pure-JS
// tfjs has no filesystem IO handler, so model artifacts are written and
// restored manually.

import * as tf from '@tensorflow/tfjs'
import { mkdirSync, readFileSync, writeFileSync } from 'fs'
import { join } from 'path'

import { CHANNELS, IMAGE_SIZE, N_CLASSES, mulberry32 } from './data.js'

export const PENULTIMATE_LAYER = 'penultimate'
export const LOGITS_LAYER = 'logits'

export function buildModel(seed = 1): tf.LayersModel {
  const init = tf.initializers.glorotUniform({ seed })
  const model = tf.sequential()
  // Halve the resolution before any conv: the pure-JS conv kernels dominate
  // the runtime, and 16x16 keeps training at minutes scale on CPU.
  model.add(
    tf.layers.averagePooling2d({
      inputShape: [IMAGE_SIZE, IMAGE_SIZE, CHANNELS],
      poolSize: 2,
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: 8,
      kernelSize: 3,
      activation: 'relu',
      kernelInitializer: init,
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }))
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      activation: 'relu',
      kernelInitializer: init,
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }))
  model.add(tf.layers.flatten())
  // The penultimate layer is class-width so either layer can be exported
  // into the fixed-width dump format.
  model.add(
    tf.layers.dense({
      units: N_CLASSES,
      activation: 'relu',
      name: PENULTIMATE_LAYER,
      kernelInitializer: init,
    }),
  )
  model.add(
    tf.layers.dense({ units: N_CLASSES, name: LOGITS_LAYER, kernelInitializer: init }),
  )
  return model
}

export async function trainEpoch(
  model: tf.LayersModel,
  pixels: Float32Array,
  labels: Int32Array,
  batchSize = 128,
  shuffleSeed = 0,
): Promise<number> {
  if (!model.optimizer) {
    model.compile({
      optimizer: tf.train.adam(4e-3),
      loss: (yTrue, yPred) => tf.losses.softmaxCrossEntropy(yTrue, yPred),
    })
  }
  const n = labels.length
  // Seeded Fisher-Yates instead of fit's unseeded shuffling keeps training
  // runs reproducible.
  const order = new Int32Array(n)
  for (let i = 0; i < n; i++) order[i] = i
  const rand = mulberry32(0x5eed + shuffleSeed)
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1))
    const tmp = order[i]
    order[i] = order[j]
    order[j] = tmp
  }
  const pixelsPer = IMAGE_SIZE * IMAGE_SIZE * CHANNELS
  const shuffledPixels = new Float32Array(n * pixelsPer)
  const shuffledLabels = new Int32Array(n)
  for (let i = 0; i < n; i++) {
    const src = order[i]
    shuffledPixels.set(pixels.subarray(src * pixelsPer, (src + 1) * pixelsPer), i * pixelsPer)
    shuffledLabels[i] = labels[src]
  }
  const xs = tf.tensor4d(shuffledPixels, [n, IMAGE_SIZE, IMAGE_SIZE, CHANNELS])
  const ys = tf.oneHot(tf.tensor1d(shuffledLabels, 'int32'), N_CLASSES)
  const history = await model.fit(xs, ys, { epochs: 1, batchSize, shuffle: false, verbose: 0 })
  xs.dispose()
  ys.dispose()
  return history.history.loss?.[0] as number
}

export interface Activations {
  logits: Float32Array[]
  penultimate: Float32Array[]
  predictions: Int32Array
}

/** Batched forward pass capturing logits and penultimate activations. */
export function activations(model: tf.LayersModel, pixels: Float32Array, n: number): Activations {
  const penultimateModel = tf.model({
    inputs: model.inputs,
    outputs: [
      model.getLayer(PENULTIMATE_LAYER).output as tf.SymbolicTensor,
      model.getLayer(LOGITS_LAYER).output as tf.SymbolicTensor,
    ],
  })
  const logits: Float32Array[] = []
  const penultimate: Float32Array[] = []
  const predictions = new Int32Array(n)
  const pixelsPer = IMAGE_SIZE * IMAGE_SIZE * CHANNELS
  const batch = 256
  for (let start = 0; start < n; start += batch) {
    const count = Math.min(batch, n - start)
    const slice = pixels.subarray(start * pixelsPer, (start + count) * pixelsPer)
    const [pen, log] = tf.tidy(() => {
      const xs = tf.tensor4d(slice, [count, IMAGE_SIZE, IMAGE_SIZE, CHANNELS])
      const [p, l] = penultimateModel.predict(xs) as tf.Tensor[]
      return [p.dataSync() as Float32Array, l.dataSync() as Float32Array]
    })
    for (let i = 0; i < count; i++) {
      const logRow = log.slice(i * N_CLASSES, (i + 1) * N_CLASSES)
      const penRow = pen.slice(i * N_CLASSES, (i + 1) * N_CLASSES)
      logits.push(logRow)
      penultimate.push(penRow)
      let best = 0
      for (let j = 1; j < N_CLASSES; j++) if (logRow[j] > logRow[best]) best = j
      predictions[start + i] = best
    }
  }
  return { logits, penultimate, predictions }
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  mkdirSync(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const { weightData, ...rest } = artifacts
      const weights = Buffer.from(weightData as ArrayBuffer)
      writeFileSync(join(dir, 'model.json'), JSON.stringify(rest))
      writeFileSync(join(dir, 'weights.bin'), weights)
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
    }),
  )
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const rest = JSON.parse(readFileSync(join(dir, 'model.json'), 'utf-8'))
  const weights = readFileSync(join(dir, 'weights.bin'))
  const artifacts = {
    ...rest,
    weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
  }
  return tf.loadLayersModel(tf.io.fromMemory(artifacts))
}
