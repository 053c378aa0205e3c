// Editor session state: the loaded previews, the selected white-balance
// target and the before/after toggle. Pure state + pixel math, no DOM.

import { Bitmap, blendBitmaps, makeBitmap, SHADE_K, TUNGSTEN_K } from './blend.js';

export interface Previews {
  awb: Bitmap;
  tungsten: Bitmap;
  shade: Bitmap;
}

export type Mode = 'awb' | 'temperature';

export const SLIDER_DETENTS = [
  { kelvin: 2850, label: 'Incandescent' },
  { kelvin: 3800, label: 'Fluorescent' },
  { kelvin: 5500, label: 'Daylight' },
  { kelvin: 6500, label: 'Cloudy' },
  { kelvin: 7500, label: 'Shade' },
];

export class EditorSession {
  previews: Previews | null = null;
  sourceBase64: string | null = null; // original upload, re-sent for export
  temperature = 5500;
  mode: Mode = 'awb';
  showOriginal = false;
  private display: Bitmap | null = null;

  get loaded(): boolean {
    return this.previews !== null;
  }

  get canExport(): boolean {
    return this.loaded && this.sourceBase64 !== null;
  }

  loadPreviews(previews: Previews, sourceBase64: string): void {
    const { awb, tungsten, shade } = previews;
    for (const p of [tungsten, shade]) {
      if (p.width !== awb.width || p.height !== awb.height) {
        throw new Error('previews disagree on dimensions');
      }
    }
    this.previews = previews;
    this.sourceBase64 = sourceBase64;
    this.display = makeBitmap(awb.width, awb.height);
  }

  setTemperature(t: number): void {
    this.temperature = Math.min(SHADE_K, Math.max(TUNGSTEN_K, t));
    this.mode = 'temperature';
  }

  selectAwb(): void {
    this.mode = 'awb';
  }

  /** The bitmap to draw: AWB preview, or the blend at the current slider value. */
  displayed(): Bitmap {
    if (!this.previews || !this.display) throw new Error('no image loaded');
    if (this.mode === 'awb') return this.previews.awb;
    return blendBitmaps(this.previews.tungsten, this.previews.shade, this.temperature, this.display);
  }

  exportTarget(): { wb: 'awb' } | { temperature: number } {
    return this.mode === 'awb' ? { wb: 'awb' } : { temperature: this.temperature };
  }
}
