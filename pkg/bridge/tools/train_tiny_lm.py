#!/usr/bin/env python3
"""Train a tiny character-level causal transformer and export it.

Produces two artifacts for the bridge:
  fixtures/tiny-lm.json  -- weight bundle the TypeScript backend loads
  fixtures/parity.json   -- input id sequences with reference logits, used
                            by the tests to pin the TS forward pass to the
                            trained network

Run from the bridge directory:  python3 tools/train_tiny_lm.py
A --corpus file can replace the built-in synthetic text.
"""

import argparse
import base64
import json
import math
import random
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

CHARS = "abcdefghijklmnopqrstuvwxyz "
BOS_ID = 27
N_VOCAB = 28

CONFIG = dict(n_vocab=N_VOCAB, n_ctx=64, d_model=48, n_head=3, n_layer=2)


def synthetic_corpus(seed=11, n_syllables=160, vocab_size=5000, corpus_words=20000):
    rng = random.Random(seed)
    cons = "tnshrdlcmwfgypbvkjxqz"
    cw = [9, 8, 7, 6, 6, 5, 5, 4, 4, 3, 3, 3, 3, 2.5, 2, 1.5, 0.4, 0.3, 0.3, 0.2, 0.2]
    vow = "eaoiu"
    vw = [12, 8, 7, 7, 3]

    def syllable():
        s = rng.choices(cons, cw)[0] + rng.choices(vow, vw)[0]
        if rng.random() < 0.5:
            s += rng.choices(cons, cw)[0]
        return s

    syls, seen = [], set()
    while len(syls) < n_syllables:
        s = syllable()
        if s not in seen:
            seen.add(s)
            syls.append(s)

    def word(k):
        return "".join(rng.choices(syls, k=k))

    vocab, seenw = [], set()
    while len(vocab) < 60:
        w = word(1)
        if w not in seenw:
            seenw.add(w)
            vocab.append(w)
    while len(vocab) < vocab_size:
        w = word(rng.choice([3, 3, 4, 4, 5]))
        if w not in seenw and len(w) <= 14:
            seenw.add(w)
            vocab.append(w)
    zipf = [1 / (i + 1) for i in range(vocab_size)]
    return " ".join(rng.choices(vocab, zipf, k=corpus_words))


class Block(nn.Module):
    def __init__(self, d, h):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d)
        self.fc = nn.Linear(d, 4 * d)
        self.proj2 = nn.Linear(4 * d, d)
        self.h = h
        self.d = d

    def forward(self, x):
        B, T, d = x.shape
        q, k, v = self.qkv(self.ln1(x)).split(d, dim=2)
        hd = d // self.h
        q = q.view(B, T, self.h, hd).transpose(1, 2)
        k = k.view(B, T, self.h, hd).transpose(1, 2)
        v = v.view(B, T, self.h, hd).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(hd)
        mask = torch.tril(torch.ones(T, T, dtype=torch.bool, device=x.device))
        att = att.masked_fill(~mask, float("-inf")).softmax(dim=-1)
        y = (att @ v).transpose(1, 2).reshape(B, T, d)
        x = x + self.proj(y)
        x = x + self.proj2(F.gelu(self.fc(self.ln2(x)), approximate="tanh"))
        return x


class TinyLM(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.wte = nn.Embedding(cfg["n_vocab"], cfg["d_model"])
        self.wpe = nn.Embedding(cfg["n_ctx"], cfg["d_model"])
        self.blocks = nn.ModuleList(
            Block(cfg["d_model"], cfg["n_head"]) for _ in range(cfg["n_layer"])
        )
        self.ln_f = nn.LayerNorm(cfg["d_model"])

    def forward(self, ids):
        B, T = ids.shape
        pos = torch.arange(T, device=ids.device)
        x = self.wte(ids) + self.wpe(pos)[None]
        for block in self.blocks:
            x = block(x)
        return self.ln_f(x) @ self.wte.weight.T  # tied head


def encode(text):
    lookup = {c: i for i, c in enumerate(CHARS)}
    return [lookup[c] for c in text if c in lookup]


def batches(ids, cfg, batch_size, rng):
    ctx = cfg["n_ctx"]
    while True:
        xs, ys = [], []
        for _ in range(batch_size):
            start = rng.randrange(len(ids) - ctx)
            chunk = ids[start : start + ctx]
            xs.append([BOS_ID] + chunk[:-1])
            ys.append(chunk)
        yield torch.tensor(xs), torch.tensor(ys)


def tensor_entry(t):
    data = t.detach().contiguous().to(torch.float32).numpy().tobytes()
    return {"shape": list(t.shape), "data": base64.b64encode(data).decode("ascii")}


def export(model, out_path):
    names = {"wte": model.wte.weight, "wpe": model.wpe.weight,
             "ln_f.weight": model.ln_f.weight, "ln_f.bias": model.ln_f.bias}
    for i, b in enumerate(model.blocks):
        p = f"blocks.{i}."
        names.update({
            p + "ln1.weight": b.ln1.weight, p + "ln1.bias": b.ln1.bias,
            p + "attn.qkv.weight": b.qkv.weight, p + "attn.qkv.bias": b.qkv.bias,
            p + "attn.proj.weight": b.proj.weight, p + "attn.proj.bias": b.proj.bias,
            p + "ln2.weight": b.ln2.weight, p + "ln2.bias": b.ln2.bias,
            p + "mlp.fc.weight": b.fc.weight, p + "mlp.fc.bias": b.fc.bias,
            p + "mlp.proj.weight": b.proj2.weight, p + "mlp.proj.bias": b.proj2.bias,
        })
    bundle = {
        "format": "p300-tiny-lm",
        "version": 1,
        "config": CONFIG,
        "tokenizer": {"chars": CHARS, "bos_id": BOS_ID},
        "weights": {k: tensor_entry(v) for k, v in names.items()},
    }
    out_path.write_text(json.dumps(bundle))
    print(f"wrote {out_path} ({out_path.stat().st_size // 1024} KiB)")


def export_parity(model, ids_text, out_path):
    cases = []
    for text in ids_text:
        ids = [BOS_ID] + encode(text)
        with torch.no_grad():
            logits = model(torch.tensor([ids]))[0, -1]
        cases.append({"text": text, "ids": ids, "logits": [float(v) for v in logits]})
    out_path.write_text(json.dumps({"cases": cases}))
    print(f"wrote {out_path}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--corpus", help="training text file (default: synthetic)")
    ap.add_argument("--steps", type=int, default=1200)
    ap.add_argument("--batch", type=int, default=48)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = random.Random(args.seed)
    if args.corpus:
        text = " ".join(Path(args.corpus).read_text().lower().split())
        text = "".join(c for c in text if c in CHARS)
    else:
        text = synthetic_corpus()
    ids = encode(text)
    print(f"training on {len(ids)} characters")

    model = TinyLM(CONFIG)
    opt = torch.optim.AdamW(model.parameters(), lr=3e-3, weight_decay=0.01)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.steps)
    stream = batches(ids, CONFIG, args.batch, rng)
    model.train()
    for step in range(args.steps):
        x, y = next(stream)
        logits = model(x)
        loss = F.cross_entropy(logits.view(-1, N_VOCAB), y.view(-1))
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        if step % 100 == 0 or step == args.steps - 1:
            print(f"step {step:5d}  loss {loss.item():.3f}")

    model.eval()
    fixtures = Path(__file__).resolve().parent.parent / "fixtures"
    fixtures.mkdir(exist_ok=True)
    export(model, fixtures / "tiny-lm.json")
    words = text.split()
    probes = [
        " ".join(words[10:14]),
        " ".join(words[100:103]) + " " + words[103][:2],
        words[0][:3],
    ]
    export_parity(model, probes, fixtures / "parity.json")


if __name__ == "__main__":
    main()
