// Incremental parser for the service's event stream. Frames arrive as
//   id: <seq>\n
//   data: <json>\n
//   \n
// possibly split across arbitrary chunk boundaries, so a stateful buffer is
// kept between feed() calls.

export interface SseFrame {
  id: number;
  data: string;
}

export interface SseParser {
  feed(chunk: string): SseFrame[];
}

export function createSseParser(): SseParser {
  let buf = "";
  return {
    feed(chunk: string): SseFrame[] {
      buf += chunk;
      const frames: SseFrame[] = [];
      for (;;) {
        const cut = buf.indexOf("\n\n");
        if (cut < 0) break;
        const block = buf.slice(0, cut);
        buf = buf.slice(cut + 2);
        let id = -1;
        let data = "";
        for (const line of block.split("\n")) {
          if (line.startsWith("id: ")) id = Number(line.slice(4));
          else if (line.startsWith("data: ")) data = line.slice(6);
        }
        if (id >= 0 && data !== "") frames.push({ id, data });
      }
      return frames;
    },
  };
}
