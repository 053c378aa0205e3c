// Thin client for the editing backend. Backend errors arrive as JSON
// {code, message} and are surfaced verbatim.

export interface EditResponse {
  awb: string;      // base64 PNG at network resolution
  tungsten: string;
  shade: string;
  width: number;
  height: number;
}

export type ExportTarget = { wb: 'awb' | 'tungsten' | 'shade' } | { temperature: number };

async function raiseBackendError(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.message === 'string') message = body.message;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new Error(message);
}

export async function fetchHealth(baseUrl: string): Promise<{ status: string; model_id: string }> {
  const resp = await fetch(`${baseUrl}/api/v1/health`);
  if (!resp.ok) await raiseBackendError(resp);
  return resp.json();
}

export async function uploadImage(baseUrl: string, file: Blob): Promise<EditResponse> {
  const resp = await fetch(`${baseUrl}/api/v1/edit`, {
    method: 'POST',
    headers: { 'Content-Type': 'image/png' },
    body: file,
  });
  if (!resp.ok) await raiseBackendError(resp);
  return resp.json();
}

export async function exportImage(
  baseUrl: string,
  imageBase64: string,
  target: ExportTarget,
): Promise<Blob> {
  const resp = await fetch(`${baseUrl}/api/v1/export`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ image: imageBase64, ...target }),
  });
  if (!resp.ok) await raiseBackendError(resp);
  return resp.blob();
}
