/**
 * Wire protocol: one JSON object per line on stdin/stdout (or a TCP
 * stream).  Unknown fields are ignored; a malformed line that still
 * carries a usable integer id earns an error line, anything else is
 * dropped silently.
 */

import { z } from "zod";

export const SuggestRequestSchema = z
  .object({
    id: z.number().int(),
    context: z.string(),
    prefix: z.string(),
    n: z.number().int(),
  })
  .loose();

export type SuggestRequest = z.infer<typeof SuggestRequestSchema>;

export const SuggestionSchema = z.object({
  word: z.string().regex(/^[a-z]+$/),
  score: z.number().nonnegative(),
});

export const SuggestResponseSchema = z.object({
  id: z.number().int(),
  suggestions: z.array(SuggestionSchema),
});

export type SuggestResponse = z.infer<typeof SuggestResponseSchema>;

export interface Suggestion {
  word: string;
  score: number;
}

export type ParseOutcome =
  | { kind: "request"; request: SuggestRequest }
  | { kind: "error"; id: number; message: string }
  | { kind: "ignore" };

/** Classify one incoming line. */
export function parseRequestLine(line: string): ParseOutcome {
  const trimmed = line.trim();
  if (trimmed === "") return { kind: "ignore" };
  let raw: unknown;
  try {
    raw = JSON.parse(trimmed);
  } catch {
    return { kind: "ignore" };
  }
  const parsed = SuggestRequestSchema.safeParse(raw);
  if (parsed.success) {
    const req = parsed.data;
    if (req.n < 1) return { kind: "error", id: req.id, message: "invalid n" };
    if (!/^[a-z]*$/.test(req.prefix)) {
      return { kind: "error", id: req.id, message: "invalid prefix" };
    }
    return { kind: "request", request: req };
  }
  // salvage an id so the peer can match the failure to its request
  if (typeof raw === "object" && raw !== null && "id" in raw) {
    const id = (raw as { id: unknown }).id;
    if (typeof id === "number" && Number.isInteger(id)) {
      return { kind: "error", id, message: "malformed request" };
    }
  }
  return { kind: "ignore" };
}

export function responseLine(id: number, suggestions: Suggestion[]): string {
  const body: SuggestResponse = { id, suggestions };
  return JSON.stringify(SuggestResponseSchema.parse(body));
}

export function errorLine(id: number, message: string): string {
  return JSON.stringify({ id, error: message });
}
