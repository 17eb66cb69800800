/** Client + live service: session lifecycle and error surfaces. */

import { beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { SessionDoc } from "../src/api.js";
import {
  corpusSketches,
  editTextFor,
  readBytes,
  serverInfo,
} from "./helpers.js";

// A valid 1x1 PNG that is not any fixture scene.
const STRAY_PNG = Uint8Array.from(atob(
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8" +
  "z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg=="), (ch) => ch.charCodeAt(0));

let api: ApiClient;

beforeAll(() => {
  api = new ApiClient(serverInfo().baseUrl);
});

describe("session lifecycle", () => {
  let doc: SessionDoc;
  let sketchPath: string;

  beforeAll(async () => {
    sketchPath = corpusSketches()[0];
    doc = await api.createSession(readBytes(sketchPath));
  });

  it("creates a captioned session from a fixture sketch", () => {
    expect(doc.session_id).toBeTruthy();
    expect(doc.stage).toBe("caption");
    expect(doc.instances.length).toBeGreaterThan(0);
    expect(doc.caption).not.toBeNull();
    expect(doc.caption!.sentences.length).toBeGreaterThan(0);
    expect(doc.has_result).toBe(false);
  });

  it("caption sentences partition the instance ids", () => {
    const ids = doc.instances.map((inst) => inst.id).sort((a, b) => a - b);
    const mentioned = doc.caption!.sentences
      .flatMap((sentence) => sentence.instance_ids)
      .sort((a, b) => a - b);
    expect(mentioned).toEqual(ids);
  });

  it("every sentence carries category slots into its text", () => {
    for (const sentence of doc.caption!.sentences) {
      expect(sentence.text.endsWith(".")).toBe(true);
      for (const slot of sentence.slots) {
        expect(slot.start).toBeGreaterThanOrEqual(0);
        expect(slot.end).toBeLessThanOrEqual(sentence.text.length);
        expect(slot.start).toBeLessThan(slot.end);
      }
    }
  });

  it("colorizes with the scene's own edit text", async () => {
    const echo = await api.colorize(doc.session_id, editTextFor(sketchPath));
    expect(echo.session_id).toBe(doc.session_id);
    expect(echo.result).toContain(`/api/sessions/${doc.session_id}/`);
    expect(echo.instructions.background).not.toBeNull();
    const refreshed = await api.getSession(doc.session_id);
    expect(refreshed.stage).toBe("colorize");
    expect(refreshed.has_result).toBe(true);
    const png = await api.fetchResult(doc.session_id);
    expect([...png.slice(0, 4)]).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });

  it("serves an RGBA overlay for each instance", async () => {
    for (const inst of doc.instances) {
      const png = await api.fetchOverlay(doc.session_id, inst.id);
      expect([...png.slice(0, 4)]).toEqual([0x89, 0x50, 0x4e, 0x47]);
    }
  });
});

describe("error surfaces", () => {
  it("rejects an empty upload with a structured error", async () => {
    const failure = await api.createSession(new Uint8Array())
      .then(() => null, (error) => error as ApiError);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure!.status).toBe(400);
    expect(failure!.stage).toBe("segment");
    expect(failure!.code).toBe("empty_upload");
  });

  it("rejects undecodable bytes with a structured error", async () => {
    const failure = await api.createSession(
      new TextEncoder().encode("not a png at all"))
      .then(() => null, (error) => error as ApiError);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure!.status).toBe(400);
    expect(failure!.code).toBe("bad_image");
  });

  it("reports non-fixture sketches as a segment-stage failure", async () => {
    const failure = await api.createSession(STRAY_PNG)
      .then(() => null, (error) => error as ApiError);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure!.status).toBe(400);
    expect(failure!.stage).toBe("segment");
    expect(failure!.code).toBe("plugin_failure");
  });

  it("404s unknown sessions", async () => {
    const failure = await api.getSession("no-such-session")
      .then(() => null, (error) => error as ApiError);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure!.status).toBe(404);
    expect(failure!.code).toBe("not_found");
  });

  it("422s an unknown color with sentence id and span", async () => {
    const sketch = corpusSketches()[1];
    const doc = await api.createSession(readBytes(sketch));
    const sentence = doc.caption!.sentences.find(
      (s) => s.text.startsWith("There") &&
        s.slots.some((slot) => slot.role === "category"))
      ?? doc.caption!.sentences[0];
    const body = sentence.text.replace(/\.$/, "");
    const slot = sentence.slots.find((s) => s.role === "category")!;
    const edited = body.slice(0, slot.start) + "blurple " +
      body.slice(slot.start);
    const failure = await api.colorize(doc.session_id, [[sentence.id, edited]])
      .then(() => null, (error) => error as ApiError);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure!.status).toBe(422);
    expect(failure!.stage).toBe("compile");
    expect(failure!.code).toBe("unknown_color");
    expect(failure!.body.sentence).toBe(sentence.id);
    const span = failure!.body.span!;
    expect(edited.slice(span[0], span[1])).toBe("blurple");
  });
});
