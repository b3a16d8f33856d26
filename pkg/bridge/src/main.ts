#!/usr/bin/env node
/**
 * Entry point.  Flags:
 *   --stdio (default) | --tcp <host:port>
 *   --model <path>    weight bundle for the transformer backend
 *   --stub            deterministic hash backend (default when no model)
 *   --timeout-ms <n>  per-request compute budget for the model backend
 *
 * Exit codes: 0 clean shutdown, 2 bad usage, 3 model load failure.
 */

import type { SuggestBackend } from "./backend.js";
import { ModelBackend, loadModel } from "./model.js";
import { serveStdio, serveTcp } from "./server.js";
import { StubBackend } from "./stub.js";

interface Options {
  tcp: string | null;
  model: string | null;
  stub: boolean;
  timeoutMs: number;
}

function parseArgs(argv: string[]): Options {
  const opts: Options = { tcp: null, model: null, stub: false, timeoutMs: 10_000 };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    switch (arg) {
      case "--stdio":
        opts.tcp = null;
        break;
      case "--tcp":
        opts.tcp = argv[++i] ?? "";
        break;
      case "--model":
        opts.model = argv[++i] ?? "";
        break;
      case "--stub":
        opts.stub = true;
        break;
      case "--timeout-ms":
        opts.timeoutMs = Number.parseInt(argv[++i] ?? "", 10);
        break;
      default:
        throw new Error(`unknown flag ${arg}`);
    }
  }
  if (opts.tcp === "") throw new Error("--tcp needs host:port");
  if (opts.model === "") throw new Error("--model needs a path");
  if (!Number.isFinite(opts.timeoutMs) || opts.timeoutMs <= 0) {
    throw new Error("--timeout-ms needs a positive integer");
  }
  return opts;
}

async function main(): Promise<void> {
  let opts: Options;
  try {
    opts = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(`usage error: ${(err as Error).message}\n`);
    process.exit(2);
  }

  let backend: SuggestBackend;
  if (opts.model && !opts.stub) {
    try {
      backend = new ModelBackend(loadModel(opts.model), { timeoutMs: opts.timeoutMs });
    } catch (err) {
      process.stderr.write(`model load failure: ${(err as Error).message}\n`);
      process.exit(3);
    }
  } else {
    backend = new StubBackend();
  }

  if (opts.tcp !== null) {
    const sep = opts.tcp.lastIndexOf(":");
    if (sep < 0) {
      process.stderr.write("usage error: --tcp needs host:port\n");
      process.exit(2);
    }
    const host = opts.tcp.slice(0, sep) || "127.0.0.1";
    const port = Number.parseInt(opts.tcp.slice(sep + 1), 10);
    await serveTcp(backend, host, port);
  } else {
    await serveStdio(backend);
  }
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err}\n`);
  process.exit(1);
});
