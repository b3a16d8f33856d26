/** Backend contract plus the shared candidate clean-up rules. */

import type { Suggestion } from "./protocol.js";

export interface SuggestBackend {
  /** Up to n candidate words for the current partial word. */
  suggest(context: string, prefix: string, n: number): Suggestion[];
}

/**
 * Normalize raw candidates into protocol-legal suggestions: lowercase,
 * letters only (truncated at the first illegal character), prefix kept,
 * de-duplicated, scores clamped and sorted non-increasing, at most n.
 */
export function sanitize(
  candidates: Suggestion[],
  prefix: string,
  n: number,
): Suggestion[] {
  const seen = new Set<string>();
  const clean: Suggestion[] = [];
  for (const c of candidates) {
    const match = c.word.toLowerCase().match(/^[a-z]+/);
    const word = match ? match[0] : "";
    if (!word || !word.startsWith(prefix) || seen.has(word)) continue;
    seen.add(word);
    clean.push({ word, score: Math.max(c.score, 0) });
  }
  clean.sort((a, b) => b.score - a.score || (a.word < b.word ? -1 : 1));
  return clean.slice(0, n);
}

/** Trim context to the tail the model can actually condition on. */
export function normalizeText(raw: string): string {
  return raw
    .toLowerCase()
    .split("")
    .filter((ch) => ch === " " || (ch >= "a" && ch <= "z"))
    .join("")
    .replace(/ +/g, " ")
    .trim();
}
