import { describe, expect, it } from 'vitest';

import { Bitmap, blendBitmaps, blendRatio, makeBitmap, SHADE_K, TUNGSTEN_K } from '../src/blend.js';

function randomBitmap(width: number, height: number, seed: number): Bitmap {
  const bmp = makeBitmap(width, height);
  let state = seed >>> 0;
  for (let i = 0; i < bmp.data.length; i += 1) {
    // xorshift32; alpha forced opaque
    state ^= state << 13; state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5; state >>>= 0;
    bmp.data[i] = i % 4 === 3 ? 255 : state % 256;
  }
  return bmp;
}

/** Offline float oracle for the inverse-temperature blend. */
function oracleBlend(t: Bitmap, s: Bitmap, kelvin: number): Uint8ClampedArray {
  const b = (1 / kelvin - 1 / SHADE_K) / (1 / TUNGSTEN_K - 1 / SHADE_K);
  const out = new Uint8ClampedArray(t.data.length);
  for (let i = 0; i < out.length; i += 1) {
    out[i] = i % 4 === 3 ? 255 : Math.round(b * t.data[i] + (1 - b) * s.data[i]);
  }
  return out;
}

describe('blendRatio', () => {
  it('is 1 at the tungsten endpoint and 0 at the shade endpoint', () => {
    expect(blendRatio(TUNGSTEN_K)).toBe(1);
    expect(blendRatio(SHADE_K)).toBe(0);
  });

  it('matches the direct reciprocal formula at 3800K', () => {
    const direct = (1 / 3800 - 1 / 7500) / (1 / 2850 - 1 / 7500);
    expect(Math.abs(blendRatio(3800) - direct)).toBeLessThan(1e-12);
    expect(blendRatio(3800)).toBeCloseTo(0.5968, 4);
  });

  it('decreases monotonically in temperature', () => {
    let prev = Infinity;
    for (let k = TUNGSTEN_K; k <= SHADE_K; k += 93) {
      const b = blendRatio(k);
      expect(b).toBeLessThan(prev);
      prev = b;
    }
  });

  it('rejects out-of-range temperatures', () => {
    expect(() => blendRatio(2000)).toThrow(RangeError);
    expect(() => blendRatio(9000)).toThrow(RangeError);
  });
});

describe('blendBitmaps', () => {
  const tungsten = randomBitmap(64, 48, 1234);
  const shade = randomBitmap(64, 48, 9999);

  it('reproduces the tungsten preview exactly at 2850K', () => {
    const out = blendBitmaps(tungsten, shade, TUNGSTEN_K);
    expect(out.data).toEqual(tungsten.data);
  });

  it('reproduces the shade preview exactly at 7500K', () => {
    const out = blendBitmaps(tungsten, shade, SHADE_K);
    expect(out.data).toEqual(shade.data);
  });

  it('matches the float oracle within one 8-bit step at 3800K', () => {
    const out = blendBitmaps(tungsten, shade, 3800);
    const expected = oracleBlend(tungsten, shade, 3800);
    for (let i = 0; i < expected.length; i += 1) {
      expect(Math.abs(out.data[i] - expected[i])).toBeLessThanOrEqual(1);
    }
  });

  it('stays channelwise between the two previews', () => {
    const out = blendBitmaps(tungsten, shade, 4600);
    for (let i = 0; i < out.data.length; i += 1) {
      if (i % 4 === 3) continue;
      const lo = Math.min(tungsten.data[i], shade.data[i]);
      const hi = Math.max(tungsten.data[i], shade.data[i]);
      expect(out.data[i]).toBeGreaterThanOrEqual(lo);
      expect(out.data[i]).toBeLessThanOrEqual(hi);
    }
  });

  it('never mutates the preview bitmaps', () => {
    const t0 = tungsten.data.slice();
    const s0 = shade.data.slice();
    blendBitmaps(tungsten, shade, 5100);
    expect(tungsten.data).toEqual(t0);
    expect(shade.data).toEqual(s0);
  });

  it('writes into the provided display surface', () => {
    const display = makeBitmap(64, 48);
    const out = blendBitmaps(tungsten, shade, 6200, display);
    expect(out).toBe(display);
    expect(out.data).not.toBe(tungsten.data);
  });

  it('rejects mismatched preview dims', () => {
    expect(() => blendBitmaps(tungsten, randomBitmap(32, 48, 7), 5000)).toThrow(/dims/);
  });

  it('blends a network-resolution preview within one frame', () => {
    const a = randomBitmap(656, 496, 42);
    const b = randomBitmap(656, 496, 43);
    const display = makeBitmap(656, 496);
    let best = Infinity;
    for (let run = 0; run < 5; run += 1) {
      const start = performance.now();
      blendBitmaps(a, b, 3800 + run, display);
      best = Math.min(best, performance.now() - start);
    }
    expect(best).toBeLessThanOrEqual(16.7);
  });
});
