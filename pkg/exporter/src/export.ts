// Export jobs: run a classifier over the datasets and emit the three dumps
// (TrainCorrectOnly / Test / OutlierSet) with their manifests.

import * as tf from '@tensorflow/tfjs'
import { join } from 'path'

import { ImageSet, N_CLASSES } from './data.js'
import { DumpRecord, Manifest, Split, dumpPaths, writeDump } from './dump.js'
import { Activations, activations } from './model.js'

export type Layer = 'logits' | 'penultimate'

export interface ExportJob {
  model: tf.LayersModel
  modelName: string
  epoch: number
  layer: Layer
  train: ImageSet
  test: ImageSet
  outliers: ImageSet
  outDir: string
}

export interface ExportSummary {
  trainKept: number
  trainTotal: number
  testAccuracy: number
  outDir: string
}

const TEST_ID_BASE = 1_000_000n
const OUTLIER_ID_BASE = 2_000_000n

function pick(acts: Activations, layer: Layer, i: number): Float32Array {
  return layer === 'logits' ? acts.logits[i] : acts.penultimate[i]
}

export function exportJob(job: ExportJob): ExportSummary {
  const paths = dumpPaths(job.outDir)

  const manifest = (split: Split, referenceAccuracy: number | null): Manifest => ({
    model_name: job.modelName,
    dataset_name: `${job.train.name} / outliers ${job.outliers.name} / layer ${job.layer}`,
    epoch: job.epoch,
    reference_accuracy: referenceAccuracy,
    split,
  })

  // Training set: keep exactly the correctly classified samples.
  const trainActs = activations(job.model, job.train.pixels, job.train.n)
  const trainRecords: DumpRecord[] = []
  for (let i = 0; i < job.train.n; i++) {
    if (trainActs.predictions[i] === job.train.labels[i]) {
      trainRecords.push({
        sampleId: BigInt(i),
        label: job.train.labels[i],
        activations: pick(trainActs, job.layer, i),
      })
    }
  }
  writeDump(paths.train, N_CLASSES, trainRecords, manifest('TrainCorrectOnly', null))

  const testActs = activations(job.model, job.test.pixels, job.test.n)
  let hits = 0
  const testRecords: DumpRecord[] = []
  for (let i = 0; i < job.test.n; i++) {
    if (testActs.predictions[i] === job.test.labels[i]) hits++
    testRecords.push({
      sampleId: TEST_ID_BASE + BigInt(i),
      label: job.test.labels[i],
      activations: pick(testActs, job.layer, i),
    })
  }
  const testAccuracy = hits / job.test.n
  writeDump(paths.test, N_CLASSES, testRecords, manifest('Test', testAccuracy))

  const outlierActs = activations(job.model, job.outliers.pixels, job.outliers.n)
  const outlierRecords: DumpRecord[] = []
  for (let i = 0; i < job.outliers.n; i++) {
    outlierRecords.push({
      sampleId: OUTLIER_ID_BASE + BigInt(i),
      label: null,
      activations: pick(outlierActs, job.layer, i),
    })
  }
  writeDump(paths.outlier, N_CLASSES, outlierRecords, manifest('OutlierSet', null))

  return {
    trainKept: trainRecords.length,
    trainTotal: job.train.n,
    testAccuracy,
    outDir: job.outDir,
  }
}

export function epochDir(root: string, epoch: number): string {
  return join(root, `epoch_${String(epoch).padStart(3, '0')}`)
}
