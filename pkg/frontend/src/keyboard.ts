import type { KeyboardLayout } from "./types.js";

export class KeyboardError extends Error {}

/** Accept only `{name, rows: [[glyph, ...], ...]}` with non-empty glyphs. */
export function validateLayout(value: unknown): KeyboardLayout {
  if (typeof value !== "object" || value === null) {
    throw new KeyboardError("layout must be an object");
  }
  const { name, rows } = value as { name?: unknown; rows?: unknown };
  if (typeof name !== "string" || !name) throw new KeyboardError("missing layout name");
  if (!Array.isArray(rows) || rows.length === 0) throw new KeyboardError("missing rows");
  for (const row of rows) {
    if (!Array.isArray(row)) throw new KeyboardError("rows must be arrays of glyphs");
    for (const glyph of row) {
      if (typeof glyph !== "string" || glyph.length === 0) {
        throw new KeyboardError("glyphs must be non-empty strings");
      }
    }
  }
  return { name, rows: rows.map((row: string[]) => [...row]) };
}

export function exportLayout(layout: KeyboardLayout): string {
  return JSON.stringify(layout);
}

/** Import replaces the layout only after validation; bad JSON never does. */
export function importLayout(json: string): KeyboardLayout {
  let parsed: unknown;
  try {
    parsed = JSON.parse(json);
  } catch {
    throw new KeyboardError("not valid JSON");
  }
  return validateLayout(parsed);
}
