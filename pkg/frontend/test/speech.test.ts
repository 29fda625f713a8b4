import { describe, expect, it } from "vitest";
import { speak } from "../src/speech.js";

function fakeHost() {
  const spoken: string[] = [];
  let cancelled = 0;
  return {
    spoken,
    cancelled: () => cancelled,
    host: {
      speechSynthesis: {
        cancel: () => {
          cancelled += 1;
        },
        speak: (u: unknown) => {
          spoken.push((u as { text: string }).text);
        },
      },
      SpeechSynthesisUtterance: class {
        text: string;
        constructor(text: string) {
          this.text = text;
        }
      },
    },
  };
}

describe("speak", () => {
  it("queues one utterance per line after cancelling prior speech", () => {
    const f = fakeHost();
    const ok = speak(["line one", "line two"], true, f.host);
    expect(ok).toBe(true);
    expect(f.spoken).toEqual(["line one", "line two"]);
    expect(f.cancelled()).toBe(1);
  });

  it("does nothing when disabled", () => {
    const f = fakeHost();
    expect(speak(["x"], false, f.host)).toBe(false);
    expect(f.spoken).toEqual([]);
  });

  it("degrades silently without a speech API", () => {
    expect(speak(["x"], true, {})).toBe(false);
  });

  it("ignores empty narration", () => {
    const f = fakeHost();
    expect(speak([], true, f.host)).toBe(false);
    expect(f.cancelled()).toBe(0);
  });
});
