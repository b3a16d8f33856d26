/**
 * Minimal decoder-only transformer for next-word completion.
 *
 * Loads a JSON weight bundle (see tools/train_tiny_lm.py for the
 * exporter): character-level GPT blocks with pre-layernorm, causal
 * multi-head attention, tanh-GELU MLPs and a weight-tied output head.
 * Inference is plain float64 arithmetic over float32 weights; decoding
 * is a deterministic beam over next characters until the word-ending
 * space, so repeated calls always return the same list.
 */

import { readFileSync } from "node:fs";

import { normalizeText, sanitize } from "./backend.js";
import type { SuggestBackend } from "./backend.js";
import type { Suggestion } from "./protocol.js";

export interface ModelConfig {
  n_vocab: number;
  n_ctx: number;
  d_model: number;
  n_head: number;
  n_layer: number;
}

interface Tensor {
  shape: number[];
  data: Float32Array;
}

export interface ModelBundle {
  config: ModelConfig;
  chars: string;
  bosId: number;
  weights: Map<string, Tensor>;
}

const FORMAT = "p300-tiny-lm";

export function loadModel(path: string): ModelBundle {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  if (raw.format !== FORMAT || raw.version !== 1) {
    throw new Error(`not a ${FORMAT} v1 bundle: ${path}`);
  }
  const weights = new Map<string, Tensor>();
  for (const [name, spec] of Object.entries<{ shape: number[]; data: string }>(
    raw.weights,
  )) {
    const buf = Buffer.from(spec.data, "base64");
    const data = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    const numel = spec.shape.reduce((a, b) => a * b, 1);
    if (data.length !== numel) {
      throw new Error(`weight ${name}: ${data.length} values for shape ${spec.shape}`);
    }
    weights.set(name, { shape: spec.shape, data });
  }
  return {
    config: raw.config,
    chars: raw.tokenizer.chars,
    bosId: raw.tokenizer.bos_id,
    weights,
  };
}

function get(bundle: ModelBundle, name: string): Tensor {
  const t = bundle.weights.get(name);
  if (!t) throw new Error(`missing weight ${name}`);
  return t;
}

function layerNorm(x: Float64Array, d: number, g: Tensor, b: Tensor): Float64Array {
  const rows = x.length / d;
  const out = new Float64Array(x.length);
  for (let r = 0; r < rows; r++) {
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x[r * d + j];
    mean /= d;
    let variance = 0;
    for (let j = 0; j < d; j++) {
      const v = x[r * d + j] - mean;
      variance += v * v;
    }
    variance /= d;
    const inv = 1 / Math.sqrt(variance + 1e-5);
    for (let j = 0; j < d; j++) {
      out[r * d + j] = (x[r * d + j] - mean) * inv * g.data[j] + b.data[j];
    }
  }
  return out;
}

/** y[r,o] = sum_i x[r,i] * W[o,i] + b[o]   (torch Linear layout) */
function linear(x: Float64Array, dIn: number, w: Tensor, b: Tensor): Float64Array {
  const dOut = w.shape[0];
  const rows = x.length / dIn;
  const out = new Float64Array(rows * dOut);
  for (let r = 0; r < rows; r++) {
    for (let o = 0; o < dOut; o++) {
      let acc = b.data[o];
      const wofs = o * dIn;
      const xofs = r * dIn;
      for (let i = 0; i < dIn; i++) acc += x[xofs + i] * w.data[wofs + i];
      out[r * dOut + o] = acc;
    }
  }
  return out;
}

const GELU_C = Math.sqrt(2 / Math.PI);

function gelu(x: Float64Array): Float64Array {
  const out = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    const v = x[i];
    out[i] = 0.5 * v * (1 + Math.tanh(GELU_C * (v + 0.044715 * v * v * v)));
  }
  return out;
}

/** Final-position logits for a token id sequence (length <= n_ctx). */
export function forwardLogits(bundle: ModelBundle, ids: number[]): Float64Array {
  const { d_model: d, n_head: h, n_layer: layers, n_ctx } = bundle.config;
  if (ids.length > n_ctx) ids = ids.slice(ids.length - n_ctx);
  const T = ids.length;
  const wte = get(bundle, "wte");
  const wpe = get(bundle, "wpe");
  let x = new Float64Array(T * d);
  for (let t = 0; t < T; t++) {
    for (let j = 0; j < d; j++) {
      x[t * d + j] = wte.data[ids[t] * d + j] + wpe.data[t * d + j];
    }
  }
  const dHead = d / h;
  const scale = 1 / Math.sqrt(dHead);
  for (let l = 0; l < layers; l++) {
    const p = `blocks.${l}.`;
    const xn = layerNorm(x, d, get(bundle, p + "ln1.weight"), get(bundle, p + "ln1.bias"));
    const qkv = linear(xn, d, get(bundle, p + "attn.qkv.weight"), get(bundle, p + "attn.qkv.bias"));
    const attnOut = new Float64Array(T * d);
    for (let head = 0; head < h; head++) {
      const qOfs = head * dHead;
      const kOfs = d + head * dHead;
      const vOfs = 2 * d + head * dHead;
      for (let t = 0; t < T; t++) {
        const scores = new Float64Array(t + 1);
        let maxScore = -Infinity;
        for (let s = 0; s <= t; s++) {
          let acc = 0;
          for (let j = 0; j < dHead; j++) {
            acc += qkv[t * 3 * d + qOfs + j] * qkv[s * 3 * d + kOfs + j];
          }
          scores[s] = acc * scale;
          if (scores[s] > maxScore) maxScore = scores[s];
        }
        let z = 0;
        for (let s = 0; s <= t; s++) {
          scores[s] = Math.exp(scores[s] - maxScore);
          z += scores[s];
        }
        for (let s = 0; s <= t; s++) {
          const a = scores[s] / z;
          for (let j = 0; j < dHead; j++) {
            attnOut[t * d + qOfs + j] += a * qkv[s * 3 * d + vOfs + j];
          }
        }
      }
    }
    const proj = linear(attnOut, d, get(bundle, p + "attn.proj.weight"), get(bundle, p + "attn.proj.bias"));
    for (let i = 0; i < x.length; i++) x[i] += proj[i];
    const xn2 = layerNorm(x, d, get(bundle, p + "ln2.weight"), get(bundle, p + "ln2.bias"));
    const fc = gelu(linear(xn2, d, get(bundle, p + "mlp.fc.weight"), get(bundle, p + "mlp.fc.bias")));
    const mlp = linear(fc, 4 * d, get(bundle, p + "mlp.proj.weight"), get(bundle, p + "mlp.proj.bias"));
    for (let i = 0; i < x.length; i++) x[i] += mlp[i];
  }
  const xf = layerNorm(x, d, get(bundle, "ln_f.weight"), get(bundle, "ln_f.bias"));
  const V = bundle.config.n_vocab;
  const logits = new Float64Array(V);
  const last = (T - 1) * d;
  for (let v = 0; v < V; v++) {
    let acc = 0;
    for (let j = 0; j < d; j++) acc += xf[last + j] * wte.data[v * d + j];
    logits[v] = acc;
  }
  return logits;
}

function logSoftmax(logits: Float64Array): Float64Array {
  let max = -Infinity;
  for (const v of logits) if (v > max) max = v;
  let z = 0;
  for (const v of logits) z += Math.exp(v - max);
  const logZ = max + Math.log(z);
  return logits.map((v) => v - logZ);
}

interface BeamEntry {
  added: number[];
  word: string;
  logp: number;
}

export class ModelBackend implements SuggestBackend {
  private readonly bundle: ModelBundle;
  private readonly charToId: Map<string, number>;
  private readonly spaceId: number;
  readonly maxExtra: number;
  timeoutMs: number;

  constructor(bundle: ModelBundle, opts: { maxExtra?: number; timeoutMs?: number } = {}) {
    this.bundle = bundle;
    this.charToId = new Map([...bundle.chars].map((c, i) => [c, i]));
    const spaceId = this.charToId.get(" ");
    if (spaceId === undefined) throw new Error("tokenizer lacks a space symbol");
    this.spaceId = spaceId;
    this.maxExtra = opts.maxExtra ?? 12;
    this.timeoutMs = opts.timeoutMs ?? 10_000;
  }

  private encode(text: string): number[] {
    const out: number[] = [];
    for (const ch of text) {
      const id = this.charToId.get(ch);
      if (id !== undefined) out.push(id);
    }
    return out;
  }

  suggest(context: string, prefix: string, n: number): Suggestion[] {
    const deadline = Date.now() + this.timeoutMs;
    const text = normalizeText(context + " " + prefix);
    // keep room in the context window for the word being generated
    const budget = this.bundle.config.n_ctx - this.maxExtra - 2;
    const tail = this.encode(text).slice(-budget);
    const prompt = [this.bundle.bosId, ...tail];

    const width = Math.max(8, 2 * n);
    let beam: BeamEntry[] = [{ added: [], word: prefix, logp: 0 }];
    const completed: { word: string; logp: number }[] = [];
    for (let step = 0; step <= this.maxExtra; step++) {
      if (beam.length === 0 || Date.now() > deadline) break;
      const expansions: BeamEntry[] = [];
      for (const entry of beam) {
        const lsm = logSoftmax(forwardLogits(this.bundle, [...prompt, ...entry.added]));
        if (entry.word.length > 0) {
          completed.push({ word: entry.word, logp: entry.logp + lsm[this.spaceId] });
        }
        if (step === this.maxExtra) continue;
        for (let v = 0; v < this.bundle.config.n_vocab; v++) {
          if (v === this.spaceId || v === this.bundle.bosId) continue;
          expansions.push({
            added: [...entry.added, v],
            word: entry.word + this.bundle.chars[v],
            logp: entry.logp + lsm[v],
          });
        }
      }
      expansions.sort((a, b) => b.logp - a.logp || (a.word < b.word ? -1 : 1));
      beam = expansions.slice(0, width);
    }
    completed.sort((a, b) => b.logp - a.logp || (a.word < b.word ? -1 : 1));
    const top = completed.slice(0, n);
    if (top.length === 0) return [];
    const best = top[0].logp;
    return sanitize(
      top.map((c) => ({ word: c.word, score: Math.exp(c.logp - best) })),
      prefix,
      n,
    );
  }
}
