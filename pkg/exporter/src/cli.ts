#!/usr/bin/env node
// ood-export: train or load a small image classifier and write activation
// dumps consumable by the oodkit evaluation toolkit.
//
// Two modes:
//   --checkpoint DIR            load a saved model, export once
//   --train-epochs E            train from scratch, exporting every k epochs
//                               (--every-k, checkpoints saved alongside)

import * as tf from '@tensorflow/tfjs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { loadInDistribution, loadOutliers } from './data.js'
import { epochDir, exportJob, Layer } from './export.js'
import { buildModel, loadModel, saveModel, trainEpoch } from './model.js'

tf.enableProdMode()

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .option('checkpoint', { type: 'string', describe: 'saved model directory' })
    .option('in-dataset', { type: 'string', default: 'blobs10', describe: 'blobs10 or cifar10:DIR' })
    .option('outlier-dataset', { type: 'string', default: 'scatterblobs', describe: 'scatterblobs or cifar10:DIR' })
    .option('epoch', { type: 'number', default: 0, describe: 'epoch tag for single exports' })
    .option('layer', { choices: ['logits', 'penultimate'] as const, default: 'logits' as Layer })
    .option('out', { type: 'string', demandOption: true })
    .option('train-epochs', { type: 'number', default: 0, describe: 'train this many epochs' })
    .option('every-k', { type: 'number', default: 1, describe: 'export every k-th epoch' })
    .option('train-count', { type: 'number', default: 3000 })
    .option('test-count', { type: 'number', default: 1000 })
    .option('outlier-count', { type: 'number', default: 1000 })
    .option('seed', { type: 'number', default: 42 })
    .strict()
    .parse()

  const { train, test } = loadInDistribution({
    name: argv['in-dataset'],
    trainCount: argv['train-count'],
    testCount: argv['test-count'],
    seed: argv.seed,
  })
  const outliers = loadOutliers(argv['outlier-dataset'], argv['outlier-count'], argv.seed)
  const layer = argv.layer as Layer

  if (argv['train-epochs'] > 0) {
    const model = buildModel(argv.seed)
    const everyK = Math.max(1, argv['every-k'])
    for (let epoch = 1; epoch <= argv['train-epochs']; epoch++) {
      const started = Date.now()
      const loss = await trainEpoch(model, train.pixels, train.labels, 128, epoch)
      const secs = ((Date.now() - started) / 1000).toFixed(1)
      if (epoch % everyK === 0 || epoch === argv['train-epochs']) {
        const dir = epochDir(argv.out, epoch)
        const summary = exportJob({
          model,
          modelName: `smallcnn(seed=${argv.seed})`,
          epoch,
          layer,
          train,
          test,
          outliers,
          outDir: dir,
        })
        await saveModel(model, `${dir}/checkpoint`)
        console.log(
          `epoch ${epoch}: loss=${loss.toFixed(4)} (${secs}s) ` +
            `test_acc=${summary.testAccuracy.toFixed(4)} ` +
            `train_kept=${summary.trainKept}/${summary.trainTotal} -> ${dir}`,
        )
      } else {
        console.log(`epoch ${epoch}: loss=${loss.toFixed(4)} (${secs}s)`)
      }
    }
    return 0
  }

  if (!argv.checkpoint) {
    console.error('either --checkpoint or --train-epochs is required')
    return 2
  }
  const model = await loadModel(argv.checkpoint)
  const summary = exportJob({
    model,
    modelName: `smallcnn(checkpoint=${argv.checkpoint})`,
    epoch: argv.epoch,
    layer,
    train,
    test,
    outliers,
    outDir: argv.out,
  })
  console.log(
    `exported: test_acc=${summary.testAccuracy.toFixed(4)} ` +
      `train_kept=${summary.trainKept}/${summary.trainTotal} -> ${summary.outDir}`,
  )
  return 0
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err instanceof Error ? err.message : err)
    process.exit(1)
  },
)
