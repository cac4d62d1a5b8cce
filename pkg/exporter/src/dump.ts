// Activation-dump binary format shared with the oodkit evaluation toolkit.
// Layout (little-endian): magic "OODD" | version u32 = 1 | n_classes u32 |
// n_records u64 | per record: sample_id u64, label i32 (-1 = outlier),
// n_classes f32 activations. Manifest is a sidecar UTF-8 JSON file.

import { mkdirSync, readFileSync, writeFileSync } from 'fs'
import { dirname, join } from 'path'

export const MAGIC = 'OODD'
export const FORMAT_VERSION = 1

export interface DumpRecord {
  sampleId: bigint
  /** class index for inliers, null for outliers */
  label: number | null
  activations: Float32Array
}

export type Split = 'TrainCorrectOnly' | 'Test' | 'OutlierSet'

export interface Manifest {
  model_name: string
  dataset_name: string
  epoch: number
  reference_accuracy: number | null
  split: Split
}

const HEADER_BYTES = 4 + 4 + 4 + 8
const RECORD_PREFIX_BYTES = 8 + 4

export function encodeDump(nClasses: number, records: DumpRecord[]): Buffer {
  if (nClasses < 2) throw new Error(`n_classes must be >= 2, got ${nClasses}`)
  const recordBytes = RECORD_PREFIX_BYTES + 4 * nClasses
  const buf = Buffer.alloc(HEADER_BYTES + recordBytes * records.length)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt32LE(FORMAT_VERSION, 4)
  buf.writeUInt32LE(nClasses, 8)
  buf.writeBigUInt64LE(BigInt(records.length), 12)
  let offset = HEADER_BYTES
  const seen = new Set<bigint>()
  for (const rec of records) {
    if (rec.activations.length !== nClasses) {
      throw new Error(
        `record ${rec.sampleId}: ${rec.activations.length} activations, expected ${nClasses}`,
      )
    }
    for (const v of rec.activations) {
      if (!Number.isFinite(v)) throw new Error(`record ${rec.sampleId}: non-finite activation`)
    }
    if (seen.has(rec.sampleId)) throw new Error(`duplicate sample_id ${rec.sampleId}`)
    seen.add(rec.sampleId)
    buf.writeBigUInt64LE(rec.sampleId, offset)
    buf.writeInt32LE(rec.label === null ? -1 : rec.label, offset + 8)
    offset += RECORD_PREFIX_BYTES
    for (const v of rec.activations) {
      buf.writeFloatLE(v, offset)
      offset += 4
    }
  }
  return buf
}

export function decodeDump(buf: Buffer): { nClasses: number; records: DumpRecord[] } {
  if (buf.length < HEADER_BYTES) throw new Error('truncated header')
  if (buf.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad magic')
  const version = buf.readUInt32LE(4)
  if (version !== FORMAT_VERSION) throw new Error(`unsupported version ${version}`)
  const nClasses = buf.readUInt32LE(8)
  const nRecords = Number(buf.readBigUInt64LE(12))
  const recordBytes = RECORD_PREFIX_BYTES + 4 * nClasses
  if (buf.length !== HEADER_BYTES + recordBytes * nRecords) {
    throw new Error('length mismatch')
  }
  const records: DumpRecord[] = []
  let offset = HEADER_BYTES
  for (let i = 0; i < nRecords; i++) {
    const sampleId = buf.readBigUInt64LE(offset)
    const label = buf.readInt32LE(offset + 8)
    offset += RECORD_PREFIX_BYTES
    const activations = new Float32Array(nClasses)
    for (let j = 0; j < nClasses; j++) {
      activations[j] = buf.readFloatLE(offset)
      offset += 4
    }
    records.push({ sampleId, label: label === -1 ? null : label, activations })
  }
  return { nClasses, records }
}

export function writeDump(
  path: string,
  nClasses: number,
  records: DumpRecord[],
  manifest: Manifest,
): void {
  mkdirSync(dirname(path), { recursive: true })
  writeFileSync(path, encodeDump(nClasses, records))
  writeFileSync(`${path}.manifest.json`, JSON.stringify(manifest, null, 2))
}

export function readManifest(dumpPath: string): Manifest {
  return JSON.parse(readFileSync(`${dumpPath}.manifest.json`, 'utf-8')) as Manifest
}

export function dumpPaths(outDir: string) {
  return {
    train: join(outDir, 'train.oodd'),
    test: join(outDir, 'test.oodd'),
    outlier: join(outDir, 'outlier.oodd'),
  }
}
