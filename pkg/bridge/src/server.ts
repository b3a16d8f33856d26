/**
 * Request loop: one request line in, one matching response line out,
 * in order, over stdio or a TCP socket.
 */

import { createInterface } from "node:readline";
import { createServer } from "node:net";
import type { Socket } from "node:net";

import type { SuggestBackend } from "./backend.js";
import { errorLine, parseRequestLine, responseLine } from "./protocol.js";

export function handleLine(backend: SuggestBackend, line: string): string | null {
  const outcome = parseRequestLine(line);
  if (outcome.kind === "ignore") return null;
  if (outcome.kind === "error") return errorLine(outcome.id, outcome.message);
  const { id, context, prefix, n } = outcome.request;
  try {
    return responseLine(id, backend.suggest(context, prefix, n));
  } catch (err) {
    return errorLine(id, `backend failure: ${(err as Error).message}`);
  }
}

export function serveStdio(backend: SuggestBackend): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input: process.stdin, terminal: false });
    rl.on("line", (line) => {
      const reply = handleLine(backend, line);
      if (reply !== null) process.stdout.write(reply + "\n");
    });
    rl.on("close", resolve);
  });
}

export function serveTcp(backend: SuggestBackend, host: string, port: number): Promise<void> {
  return new Promise((resolve, reject) => {
    const server = createServer((socket: Socket) => {
      const rl = createInterface({ input: socket, terminal: false });
      rl.on("line", (line) => {
        const reply = handleLine(backend, line);
        if (reply !== null) socket.write(reply + "\n");
      });
      socket.on("error", () => socket.destroy());
    });
    server.on("error", reject);
    server.listen(port, host, () => {
      const addr = server.address();
      if (addr && typeof addr === "object") {
        // announce the bound port (useful with port 0)
        process.stderr.write(`listening on ${addr.address}:${addr.port}\n`);
      }
    });
  });
}
