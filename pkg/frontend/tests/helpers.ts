/** Shared access to the fixture service started by global setup. */

import { readdirSync, readFileSync } from "node:fs";
import { join } from "node:path";

// process.cwd() is the frontend root under vitest regardless of the
// test environment (import.meta.url is not a file: URL under jsdom).
const cache = join(process.cwd(), "tests", "fixture", ".cache");

export interface ServerInfo {
  baseUrl: string;
  corpus: string;
}

export function serverInfo(): ServerInfo {
  return JSON.parse(
    readFileSync(join(cache, "server.json"), "utf8")) as ServerInfo;
}

/** Absolute paths of the fixture sketches, in corpus order. */
export function corpusSketches(): string[] {
  const { corpus } = serverInfo();
  return readdirSync(corpus)
    .filter((name) => name.endsWith("_sketch.png"))
    .sort()
    .map((name) => join(corpus, name));
}

export function readBytes(path: string): Uint8Array {
  return new Uint8Array(readFileSync(path));
}

/** The ground-truth edit text shipped beside a fixture sketch. */
export function editTextFor(sketchPath: string): string {
  return readFileSync(
    sketchPath.replace(/_sketch\.png$/, "_edit.txt"), "utf8").trim();
}

export function bytesEqual(a: Uint8Array | null,
                           b: Uint8Array | null): boolean {
  if (!a || !b || a.length !== b.length) {
    return false;
  }
  for (let i = 0; i < a.length; i += 1) {
    if (a[i] !== b[i]) {
      return false;
    }
  }
  return true;
}
