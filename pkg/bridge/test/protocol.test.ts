import { describe, expect, it } from "vitest";

import {
  errorLine,
  parseRequestLine,
  responseLine,
  SuggestResponseSchema,
} from "../src/protocol.js";

describe("parseRequestLine", () => {
  it("accepts a well-formed request", () => {
    const out = parseRequestLine(
      '{"id": 7, "context": "the united", "prefix": "sta", "n": 2}',
    );
    expect(out.kind).toBe("request");
    if (out.kind === "request") {
      expect(out.request.id).toBe(7);
      expect(out.request.prefix).toBe("sta");
    }
  });

  it("ignores unknown fields", () => {
    const out = parseRequestLine(
      '{"id": 1, "context": "", "prefix": "", "n": 1, "extra": [1, 2]}',
    );
    expect(out.kind).toBe("request");
  });

  it("rejects n below one with an id-matched error", () => {
    const out = parseRequestLine('{"id": 3, "context": "", "prefix": "a", "n": 0}');
    expect(out).toEqual({ kind: "error", id: 3, message: "invalid n" });
  });

  it("rejects a prefix with non-letters", () => {
    const out = parseRequestLine('{"id": 4, "context": "", "prefix": "a1", "n": 2}');
    expect(out).toEqual({ kind: "error", id: 4, message: "invalid prefix" });
  });

  it("errors with the id when fields are missing but id is usable", () => {
    const out = parseRequestLine('{"id": 9, "prefix": "ab"}');
    expect(out).toEqual({ kind: "error", id: 9, message: "malformed request" });
  });

  it("silently drops non-JSON and id-less garbage", () => {
    expect(parseRequestLine("not json").kind).toBe("ignore");
    expect(parseRequestLine("").kind).toBe("ignore");
    expect(parseRequestLine('{"prefix": "x"}').kind).toBe("ignore");
    expect(parseRequestLine('{"id": "seven"}').kind).toBe("ignore");
  });
});

describe("serialization", () => {
  it("produces schema-valid response lines", () => {
    const line = responseLine(5, [{ word: "stack", score: 0.5 }]);
    const parsed = SuggestResponseSchema.parse(JSON.parse(line));
    expect(parsed.id).toBe(5);
    expect(parsed.suggestions[0].word).toBe("stack");
  });

  it("rejects illegal words at the serialization boundary", () => {
    expect(() => responseLine(1, [{ word: "St4ck", score: 0.5 }])).toThrow();
  });

  it("formats error lines", () => {
    expect(JSON.parse(errorLine(2, "invalid n"))).toEqual({ id: 2, error: "invalid n" });
  });
});
