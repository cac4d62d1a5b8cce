import { describe, expect, it } from 'vitest'

import { N_CLASSES, blobs10, mulberry32, scatterblobs } from '../src/data.js'

describe('mulberry32', () => {
  it('is deterministic for a given seed', () => {
    const a = mulberry32(123)
    const b = mulberry32(123)
    for (let i = 0; i < 100; i++) expect(a()).toBe(b())
  })

  it('yields values in [0, 1)', () => {
    const rand = mulberry32(7)
    for (let i = 0; i < 1000; i++) {
      const v = rand()
      expect(v).toBeGreaterThanOrEqual(0)
      expect(v).toBeLessThan(1)
    }
  })
})

describe('blobs10', () => {
  it('is deterministic per seed', () => {
    expect(blobs10(20, 5)).toEqual(blobs10(20, 5))
    expect(blobs10(20, 5).pixels).not.toEqual(blobs10(20, 6).pixels)
  })

  it('produces balanced labels and bounded pixels', () => {
    const set = blobs10(40, 1)
    expect(set.n).toBe(40)
    expect(set.pixels.length).toBe(40 * 32 * 32 * 3)
    const counts = new Array(N_CLASSES).fill(0)
    for (const label of set.labels) counts[label]++
    expect(counts).toEqual(new Array(N_CLASSES).fill(4))
    for (const p of set.pixels) {
      expect(p).toBeGreaterThanOrEqual(0)
      expect(p).toBeLessThanOrEqual(1)
    }
  })
})

describe('scatterblobs', () => {
  it('carries no labels', () => {
    const set = scatterblobs(10, 1)
    expect(set.labels.length).toBe(0)
    expect(set.pixels.length).toBe(10 * 32 * 32 * 3)
  })

  it('is deterministic per seed', () => {
    expect(scatterblobs(8, 3)).toEqual(scatterblobs(8, 3))
  })
})
