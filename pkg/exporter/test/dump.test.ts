import { mkdtempSync, readFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { describe, expect, it } from 'vitest'

import { decodeDump, dumpPaths, encodeDump, readManifest, writeDump } from '../src/dump.js'
import type { DumpRecord, Manifest } from '../src/dump.js'

const record = (id: number, label: number | null, values: number[]): DumpRecord => ({
  sampleId: BigInt(id),
  label,
  activations: Float32Array.from(values),
})

describe('binary dump encoding', () => {
  it('writes the documented byte layout', () => {
    const buf = encodeDump(2, [record(7, 0, [1.0, 0.0])])
    expect(buf.length).toBe(20 + 8 + 4 + 8)
    expect(buf.toString('ascii', 0, 4)).toBe('OODD')
    expect(buf.readUInt32LE(4)).toBe(1) // version
    expect(buf.readUInt32LE(8)).toBe(2) // n_classes
    expect(buf.readBigUInt64LE(12)).toBe(1n)
    expect(buf.readBigUInt64LE(20)).toBe(7n)
    expect(buf.readInt32LE(28)).toBe(0)
    expect(buf.readFloatLE(32)).toBe(1.0)
    expect(buf.readFloatLE(36)).toBe(0.0)
  })

  it('encodes outliers with label -1', () => {
    const buf = encodeDump(2, [record(1, null, [0.5, 0.25])])
    expect(buf.readInt32LE(28)).toBe(-1)
  })

  it('round-trips', () => {
    const records = [record(1, 0, [0.5, -0.25, 3]), record(2, null, [1, 2, -8])]
    const out = decodeDump(encodeDump(3, records))
    expect(out.nClasses).toBe(3)
    expect(out.records).toEqual(records)
  })

  it('empty dump is header only', () => {
    expect(encodeDump(10, []).length).toBe(20)
  })

  it('rejects invalid records before writing', () => {
    expect(() => encodeDump(2, [record(1, 0, [1])])).toThrow(/activations/)
    expect(() => encodeDump(2, [record(1, 0, [1, NaN])])).toThrow(/non-finite/)
    expect(() =>
      encodeDump(2, [record(1, 0, [1, 2]), record(1, 1, [2, 1])]),
    ).toThrow(/duplicate/)
  })

  it('rejects corrupted input', () => {
    const buf = encodeDump(2, [record(1, 0, [1, 2])])
    const badMagic = Buffer.from(buf)
    badMagic.write('XXXX', 0, 'ascii')
    expect(() => decodeDump(badMagic)).toThrow(/magic/)
    const badVersion = Buffer.from(buf)
    badVersion.writeUInt32LE(9, 4)
    expect(() => decodeDump(badVersion)).toThrow(/version/)
    expect(() => decodeDump(buf.subarray(0, buf.length - 3))).toThrow(/length/)
  })
})

describe('dump files', () => {
  it('writes the dump and its manifest sidecar', () => {
    const dir = mkdtempSync(join(tmpdir(), 'dump-'))
    const paths = dumpPaths(dir)
    const manifest: Manifest = {
      model_name: 'm',
      dataset_name: 'd',
      epoch: 3,
      reference_accuracy: 0.75,
      split: 'Test',
    }
    writeDump(paths.test, 2, [record(5, 1, [0, 1])], manifest)
    expect(readManifest(paths.test)).toEqual(manifest)
    const out = decodeDump(readFileSync(paths.test))
    expect(out.records[0].sampleId).toBe(5n)
  })
})
