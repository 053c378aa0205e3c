// Client-side color temperature blending between the two endpoint previews.
// The weight lives in inverse-temperature space, so the slider behaves like
// a camera's Kelvin control; blending is pure pixel math and never touches
// the source bitmaps.

export const TUNGSTEN_K = 2850;
export const SHADE_K = 7500;

export interface Bitmap {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>; // RGBA, row-major
}

export function makeBitmap(width: number, height: number): Bitmap {
  return { width, height, data: new Uint8ClampedArray(width * height * 4) };
}

/** Weight of the tungsten image: 1 at 2850K, 0 at 7500K. */
export function blendRatio(t: number): number {
  if (!(t >= TUNGSTEN_K && t <= SHADE_K)) {
    throw new RangeError(`temperature ${t} outside [${TUNGSTEN_K}, ${SHADE_K}]`);
  }
  return (1 / t - 1 / SHADE_K) / (1 / TUNGSTEN_K - 1 / SHADE_K);
}

/**
 * Per-pixel blend b*tungsten + (1-b)*shade into `out` (allocated if absent).
 * Runs in 16.16 fixed point; endpoints reproduce the inputs exactly.
 */
export function blendBitmaps(tungsten: Bitmap, shade: Bitmap, t: number, out?: Bitmap): Bitmap {
  if (tungsten.width !== shade.width || tungsten.height !== shade.height) {
    throw new Error(
      `preview dims differ: ${tungsten.width}x${tungsten.height} vs ${shade.width}x${shade.height}`,
    );
  }
  const dst = out ?? makeBitmap(tungsten.width, tungsten.height);
  if (dst.width !== tungsten.width || dst.height !== tungsten.height) {
    throw new Error('output bitmap dims differ from previews');
  }
  const wT = Math.round(blendRatio(t) * 65536);
  const wS = 65536 - wT;
  const a = tungsten.data;
  const b = shade.data;
  const d = dst.data;
  for (let i = 0; i < d.length; i += 4) {
    d[i] = (wT * a[i] + wS * b[i] + 32768) >> 16;
    d[i + 1] = (wT * a[i + 1] + wS * b[i + 1] + 32768) >> 16;
    d[i + 2] = (wT * a[i + 2] + wS * b[i + 2] + 32768) >> 16;
    d[i + 3] = 255;
  }
  return dst;
}
