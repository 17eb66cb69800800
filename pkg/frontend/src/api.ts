/**
 * Typed client for the sketchtint pipeline service.
 *
 * Every correspondence the UI renders (sentence to instance ids,
 * instruction bindings, overlay pixels) comes from these payloads;
 * the client never derives bindings of its own.
 */

export interface SlotDoc {
  start: number;
  end: number;
  role: string;
}

export interface SentenceDoc {
  id: number;
  text: string;
  instance_ids: number[];
  slots: SlotDoc[];
}

export interface CaptionDoc {
  sentences: SentenceDoc[];
}

export interface InstanceDoc {
  id: number;
  label: number;
  score: number;
  bbox: number[];
  mask_rle: unknown;
}

export interface InstructionDoc {
  instance_ids: number[];
  part: string | null;
  color: string;
  conditioning_text: string;
}

export interface InstructionsDoc {
  instructions: InstructionDoc[];
  background: Record<string, string> | null;
  unmatched: string[];
  nouns: Record<string, string>;
}

export interface SessionDoc {
  session_id: string;
  stage: string;
  image_size: [number, number];
  instances: InstanceDoc[];
  caption: CaptionDoc | null;
  edited_text: unknown;
  instructions: InstructionsDoc | null;
  has_result: boolean;
  skip_log: unknown[];
}

export interface ColorizeResponse {
  session_id: string;
  result: string;
  instructions: InstructionsDoc;
}

/** An edited sentence: caption sentence id (null = new sentence) + body. */
export type EditedPair = [number | null, string];

export interface ApiErrorBody {
  stage: string;
  code: string;
  message: string;
  sentence?: number | null;
  token?: string | null;
  span?: [number, number] | null;
  [key: string]: unknown;
}

/** Structured {stage, code, message} failure reported by the service. */
export class ApiError extends Error {
  constructor(public readonly status: number,
              public readonly body: ApiErrorBody) {
    super(body.message);
    this.name = "ApiError";
  }

  get stage(): string { return this.body.stage; }
  get code(): string { return this.body.code; }
}

function multipartPng(field: string, filename: string,
                      bytes: Uint8Array): { body: Uint8Array; type: string } {
  // Hand-rolled multipart so the same code runs in browsers, node and
  // jsdom without depending on any particular FormData implementation.
  const boundary = "----sketchtint" + Math.random().toString(36).slice(2);
  const encoder = new TextEncoder();
  const head = encoder.encode(
    `--${boundary}\r\n` +
    `Content-Disposition: form-data; name="${field}"; ` +
    `filename="${filename}"\r\n` +
    `Content-Type: image/png\r\n\r\n`);
  const tail = encoder.encode(`\r\n--${boundary}--\r\n`);
  const body = new Uint8Array(head.length + bytes.length + tail.length);
  body.set(head, 0);
  body.set(bytes, head.length);
  body.set(tail, head.length + bytes.length);
  return { body, type: `multipart/form-data; boundary=${boundary}` };
}

async function unwrap(response: Response): Promise<Response> {
  if (response.ok) {
    return response;
  }
  let body: ApiErrorBody;
  try {
    body = await response.json() as ApiErrorBody;
  } catch {
    body = { stage: "transport", code: `http_${response.status}`,
             message: response.statusText || "request failed" };
  }
  throw new ApiError(response.status, body);
}

export class ApiClient {
  constructor(public readonly baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(png: Uint8Array,
                      filename = "sketch.png"): Promise<SessionDoc> {
    const { body, type } = multipartPng("sketch", filename, png);
    const response = await unwrap(await fetch(this.url("/api/sessions"), {
      method: "POST",
      headers: { "Content-Type": type },
      body: body as unknown as BodyInit,
    }));
    return await response.json() as SessionDoc;
  }

  async getSession(sessionId: string): Promise<SessionDoc> {
    const response = await unwrap(
      await fetch(this.url(`/api/sessions/${sessionId}`)));
    return await response.json() as SessionDoc;
  }

  async colorize(sessionId: string,
                 edited: string | EditedPair[]): Promise<ColorizeResponse> {
    const response = await unwrap(
      await fetch(this.url(`/api/sessions/${sessionId}/colorize`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ edited_text: edited }),
      }));
    return await response.json() as ColorizeResponse;
  }

  resultUrl(sessionId: string): string {
    return this.url(`/api/sessions/${sessionId}/result.png`);
  }

  overlayUrl(sessionId: string, instanceId: number): string {
    return this.url(`/api/sessions/${sessionId}/overlay/${instanceId}.png`);
  }

  async fetchResult(sessionId: string): Promise<Uint8Array> {
    const response = await unwrap(await fetch(this.resultUrl(sessionId)));
    return new Uint8Array(await response.arrayBuffer());
  }

  async fetchOverlay(sessionId: string,
                     instanceId: number): Promise<Uint8Array> {
    const response = await unwrap(
      await fetch(this.overlayUrl(sessionId, instanceId)));
    return new Uint8Array(await response.arrayBuffer());
  }
}
