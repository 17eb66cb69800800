/**
 * Session view state, kept apart from the DOM so the data flow is
 * testable on its own.
 *
 * Invariants enforced here:
 *  - hover targets are exactly the server's sentence.instance_ids;
 *  - sentence boundaries are locked: edits replace bodies of existing
 *    sentence ids only, plus one optional background sentence;
 *  - at most one colorize outcome applies: a revision counter stamps
 *    each request and stale responses are discarded.
 */

import type {
  ApiErrorBody,
  EditedPair,
  InstructionsDoc,
  SentenceDoc,
  SessionDoc,
} from "./api.js";

export interface InlineError {
  /** Caption sentence id, or null when the background sentence failed. */
  sentenceId: number | null;
  span: [number, number] | null;
  token: string | null;
  message: string;
  code: string;
}

function stripPeriod(text: string): string {
  return text.endsWith(".") ? text.slice(0, -1) : text;
}

export class SessionStore {
  doc: SessionDoc | null = null;
  instructions: InstructionsDoc | null = null;
  resultBytes: Uint8Array | null = null;
  inlineError: InlineError | null = null;
  toast: string | null = null;
  backgroundText = "";

  private bodies = new Map<number, string>();
  private revision = 0;
  private inflight: number | null = null;

  load(doc: SessionDoc): void {
    this.doc = doc;
    this.instructions = doc.instructions;
    this.resultBytes = null;
    this.inlineError = null;
    this.toast = null;
    this.backgroundText = "";
    this.bodies.clear();
    for (const sentence of this.sentences()) {
      this.bodies.set(sentence.id, stripPeriod(sentence.text));
    }
  }

  get sessionId(): string | null {
    return this.doc ? this.doc.session_id : null;
  }

  get busy(): boolean {
    return this.inflight !== null;
  }

  sentences(): SentenceDoc[] {
    return this.doc?.caption?.sentences ?? [];
  }

  instanceCount(): number {
    return this.doc ? this.doc.instances.length : 0;
  }

  instanceIds(): number[] {
    return this.doc ? this.doc.instances.map((inst) => inst.id) : [];
  }

  /** Instance ids to highlight while a sentence is hovered. */
  hoverTargets(sentenceId: number): number[] {
    for (const sentence of this.sentences()) {
      if (sentence.id === sentenceId) {
        return [...sentence.instance_ids];
      }
    }
    return [];
  }

  bodyOf(sentenceId: number): string {
    const body = this.bodies.get(sentenceId);
    if (body === undefined) {
      throw new Error(`unknown sentence id ${sentenceId}`);
    }
    return body;
  }

  setBody(sentenceId: number, text: string): void {
    if (!this.bodies.has(sentenceId)) {
      throw new Error(`unknown sentence id ${sentenceId}`);
    }
    this.bodies.set(sentenceId, text);
  }

  setBackground(text: string): void {
    this.backgroundText = text;
  }

  /** The edit payload: every sentence body by id, in caption order. */
  editedPairs(): EditedPair[] {
    const pairs: EditedPair[] = this.sentences().map(
      (sentence) => [sentence.id, this.bodyOf(sentence.id)]);
    if (this.backgroundText.trim()) {
      pairs.push([null, this.backgroundText.trim()]);
    }
    return pairs;
  }

  /** Stamp a new colorize request; the returned token settles it. */
  beginColorize(): number {
    this.revision += 1;
    this.inflight = this.revision;
    this.inlineError = null;
    this.toast = null;
    return this.revision;
  }

  /** Apply a success outcome; false means the response was stale. */
  settleSuccess(token: number, instructions: InstructionsDoc,
                resultBytes: Uint8Array): boolean {
    if (token !== this.revision) {
      return false;
    }
    this.inflight = null;
    this.instructions = instructions;
    this.resultBytes = resultBytes;
    return true;
  }

  /** Apply a failure outcome; false means the response was stale. */
  settleError(token: number, error: ApiErrorBody): boolean {
    if (token !== this.revision) {
      return false;
    }
    this.inflight = null;
    if (error.stage === "compile") {
      this.inlineError = {
        sentenceId: error.sentence ?? null,
        span: error.span ?? null,
        token: error.token ?? null,
        message: error.message,
        code: error.code,
      };
    } else {
      this.toast = `${error.stage}/${error.code}: ${error.message}`;
    }
    return true;
  }
}
