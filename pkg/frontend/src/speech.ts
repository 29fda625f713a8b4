// Optional spoken narration. Uses the browser speech API when present and
// does nothing otherwise, so the module is safe under test runners and
// headless browsers.

interface SpeechHost {
  speechSynthesis?: {
    cancel(): void;
    speak(u: unknown): void;
  };
  SpeechSynthesisUtterance?: new (text: string) => unknown;
}

export function speak(
  lines: string[],
  enabled: boolean,
  host: SpeechHost = globalThis as SpeechHost,
): boolean {
  if (!enabled || lines.length === 0) return false;
  const synth = host.speechSynthesis;
  const Utterance = host.SpeechSynthesisUtterance;
  if (!synth || !Utterance) return false;
  synth.cancel();
  for (const line of lines) {
    synth.speak(new Utterance(line));
  }
  return true;
}
