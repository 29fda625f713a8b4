import { describe, expect, it } from "vitest";
import { parseCommand } from "../src/console.js";

describe("parseCommand", () => {
  it("parses avoid with a range", () => {
    expect(parseCommand("avoid 3.0")).toEqual({ kind: "avoid", range: 3.0 });
    expect(parseCommand("  AVOID 1.5 ")).toEqual({ kind: "avoid", range: 1.5 });
  });

  it("parses find with and without a corridor half-width", () => {
    expect(parseCommand("find chair")).toEqual({
      kind: "find",
      klass: "chair",
      halfWidth: null,
    });
    expect(parseCommand("find door 2")).toEqual({
      kind: "find",
      klass: "door",
      halfWidth: 2,
    });
  });

  it("rejects avoid without a numeric range", () => {
    expect(parseCommand("avoid").kind).toBe("error");
    expect(parseCommand("avoid x").kind).toBe("error");
    expect(parseCommand("avoid 1 2").kind).toBe("error");
  });

  it("rejects malformed find commands", () => {
    expect(parseCommand("find").kind).toBe("error");
    expect(parseCommand("find chair wide").kind).toBe("error");
    expect(parseCommand("find chair 1 2").kind).toBe("error");
  });

  it("rejects unknown verbs and empty input", () => {
    const unknown = parseCommand("frobnicate 3");
    expect(unknown.kind).toBe("error");
    if (unknown.kind === "error") {
      expect(unknown.message).toContain("unknown command");
    }
    expect(parseCommand("   ").kind).toBe("error");
  });
});
