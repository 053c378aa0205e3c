// DOM wiring for the white-balance editor page.

import { exportImage, uploadImage } from './api.js';
import { Bitmap } from './blend.js';
import { EditorSession, SLIDER_DETENTS } from './session.js';

const BASE_URL = (window as any).WBSTUDIO_URL ?? 'http://127.0.0.1:8765';

const session = new EditorSession();

const fileInput = document.getElementById('file') as HTMLInputElement;
const canvas = document.getElementById('view') as HTMLCanvasElement;
const slider = document.getElementById('kelvin') as HTMLInputElement;
const kelvinLabel = document.getElementById('kelvin-label') as HTMLSpanElement;
const awbButton = document.getElementById('awb') as HTMLButtonElement;
const compareButton = document.getElementById('compare') as HTMLButtonElement;
const exportButton = document.getElementById('export') as HTMLButtonElement;
const statusBox = document.getElementById('status') as HTMLDivElement;

let originalBitmap: ImageBitmap | null = null;

function setStatus(text: string, isError = false): void {
  statusBox.textContent = text;
  statusBox.className = isError ? 'status error' : 'status';
}

function refreshControls(): void {
  slider.disabled = !session.loaded;
  awbButton.disabled = !session.loaded;
  compareButton.disabled = !session.loaded;
  exportButton.disabled = !session.canExport;
  kelvinLabel.textContent = session.mode === 'awb' ? 'AWB' : `${session.temperature} K`;
}

function draw(): void {
  if (!session.loaded) return;
  const ctx = canvas.getContext('2d')!;
  if (session.showOriginal && originalBitmap) {
    canvas.width = originalBitmap.width;
    canvas.height = originalBitmap.height;
    ctx.drawImage(originalBitmap, 0, 0);
    return;
  }
  const bitmap = session.displayed();
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  ctx.putImageData(new ImageData(bitmap.data, bitmap.width, bitmap.height), 0, 0);
}

async function decodePreview(base64: string): Promise<Bitmap> {
  const bytes = Uint8Array.from(atob(base64), (c) => c.charCodeAt(0));
  const image = await createImageBitmap(new Blob([bytes], { type: 'image/png' }));
  const work = document.createElement('canvas');
  work.width = image.width;
  work.height = image.height;
  const ctx = work.getContext('2d')!;
  ctx.drawImage(image, 0, 0);
  const data = ctx.getImageData(0, 0, image.width, image.height);
  return { width: data.width, height: data.height, data: data.data };
}

function blobToBase64(blob: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve((reader.result as string).split(',', 2)[1]);
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(blob);
  });
}

fileInput.addEventListener('change', async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  setStatus('uploading…');
  try {
    const response = await uploadImage(BASE_URL, file);
    const [awb, tungsten, shade] = await Promise.all([
      decodePreview(response.awb),
      decodePreview(response.tungsten),
      decodePreview(response.shade),
    ]);
    session.loadPreviews({ awb, tungsten, shade }, await blobToBase64(file));
    originalBitmap = await createImageBitmap(file);
    session.selectAwb();
    setStatus(`loaded ${response.width}x${response.height} previews`);
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
    return;
  } finally {
    refreshControls();
  }
  draw();
});

slider.addEventListener('input', () => {
  session.setTemperature(Number(slider.value));
  refreshControls();
  draw();
});

awbButton.addEventListener('click', () => {
  session.selectAwb();
  refreshControls();
  draw();
});

compareButton.addEventListener('mousedown', () => {
  session.showOriginal = true;
  draw();
});
compareButton.addEventListener('mouseup', () => {
  session.showOriginal = false;
  draw();
});

exportButton.addEventListener('click', async () => {
  if (!session.canExport || !session.sourceBase64) return;
  setStatus('exporting…');
  try {
    const blob = await exportImage(BASE_URL, session.sourceBase64, session.exportTarget());
    const link = document.createElement('a');
    link.href = URL.createObjectURL(blob);
    const tag = session.mode === 'awb' ? 'awb' : `${session.temperature}K`;
    link.download = `edited_${tag}.png`;
    link.click();
    URL.revokeObjectURL(link.href);
    setStatus('export complete');
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
});

// slider detents labeled with the preset names
const datalist = document.getElementById('detents') as HTMLDataListElement;
for (const { kelvin, label } of SLIDER_DETENTS) {
  const option = document.createElement('option');
  option.value = String(kelvin);
  option.label = label;
  datalist.appendChild(option);
}

refreshControls();
setStatus('load an image to begin');
