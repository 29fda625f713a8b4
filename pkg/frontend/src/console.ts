// Query console command grammar:
//   avoid <range_m>      obstacle report and free-sector suggestion
//   find <class> [half-width_deg]   locate the nearest instance of a class
// Parsing is pure so the grammar is testable without a DOM.

export type Command =
  | { kind: "avoid"; range: number }
  | { kind: "find"; klass: string; halfWidth: number | null }
  | { kind: "error"; message: string };

export const USAGE = "commands: avoid <range_m> | find <class> [half-width_deg]";

export function parseCommand(text: string): Command {
  const parts = text.trim().split(/\s+/).filter((p) => p.length > 0);
  if (parts.length === 0) return { kind: "error", message: USAGE };
  const verb = parts[0].toLowerCase();
  if (verb === "avoid") {
    if (parts.length !== 2) {
      return { kind: "error", message: "avoid takes one argument: avoid <range_m>" };
    }
    const range = Number(parts[1]);
    if (!Number.isFinite(range)) {
      return { kind: "error", message: `not a number: ${parts[1]}` };
    }
    return { kind: "avoid", range };
  }
  if (verb === "find") {
    if (parts.length < 2 || parts.length > 3) {
      return { kind: "error", message: "find takes: find <class> [half-width_deg]" };
    }
    let halfWidth: number | null = null;
    if (parts.length === 3) {
      halfWidth = Number(parts[2]);
      if (!Number.isFinite(halfWidth)) {
        return { kind: "error", message: `not a number: ${parts[2]}` };
      }
    }
    return { kind: "find", klass: parts[1], halfWidth };
  }
  return { kind: "error", message: `unknown command: ${verb}. ${USAGE}` };
}
