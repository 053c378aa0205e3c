import { afterEach, describe, expect, it, vi } from 'vitest';

import { exportImage, fetchHealth, uploadImage } from '../src/api.js';

const BASE = 'http://127.0.0.1:9999';

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('api client', () => {
  it('fetches health', async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { status: 'ok', model_id: 'm' }));
    vi.stubGlobal('fetch', fetchMock);
    const health = await fetchHealth(BASE);
    expect(health.model_id).toBe('m');
    expect(fetchMock).toHaveBeenCalledWith(`${BASE}/api/v1/health`);
  });

  it('uploads the image as a PNG body and parses previews', async () => {
    const payload = { awb: 'YQ==', tungsten: 'Yg==', shade: 'Yw==', width: 64, height: 48 };
    const fetchMock = vi.fn(async () => jsonResponse(200, payload));
    vi.stubGlobal('fetch', fetchMock);
    const blob = new Blob([new Uint8Array([1, 2, 3])], { type: 'image/png' });
    const resp = await uploadImage(BASE, blob);
    expect(resp).toEqual(payload);
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe(`${BASE}/api/v1/edit`);
    expect(init.method).toBe('POST');
    expect((init.headers as Record<string, string>)['Content-Type']).toBe('image/png');
  });

  it('surfaces backend error messages verbatim', async () => {
    vi.stubGlobal('fetch', vi.fn(async () =>
      jsonResponse(400, { code: 'decode_error', message: 'could not decode image: nope' })));
    await expect(uploadImage(BASE, new Blob([]))).rejects.toThrow(
      'could not decode image: nope');
  });

  it('propagates network failures', async () => {
    vi.stubGlobal('fetch', vi.fn(async () => {
      throw new TypeError('fetch failed');
    }));
    await expect(fetchHealth(BASE)).rejects.toThrow('fetch failed');
  });

  it('posts export targets as JSON', async () => {
    const fetchMock = vi.fn(async () => new Response(new Uint8Array([9]), {
      status: 200,
      headers: { 'Content-Type': 'image/png' },
    }));
    vi.stubGlobal('fetch', fetchMock);
    await exportImage(BASE, 'aW1n', { temperature: 5500 });
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe(`${BASE}/api/v1/export`);
    expect(JSON.parse(init.body as string)).toEqual({ image: 'aW1n', temperature: 5500 });

    await exportImage(BASE, 'aW1n', { wb: 'awb' });
    const [, init2] = fetchMock.mock.calls[1] as unknown as [string, RequestInit];
    expect(JSON.parse(init2.body as string)).toEqual({ image: 'aW1n', wb: 'awb' });
  });
});
