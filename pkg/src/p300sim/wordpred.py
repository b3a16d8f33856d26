"""Word completion: best-first search over the layered LM, an external
suggester client with transparent fallback, and oracle performance bounds.

The search explores extensions of the current partial word in order of
decreasing path probability (every branch multiplies by p <= 1, so the
frontier maximum is a valid bound).  Completions therefore pop in exact
best-first order and the returned top-n matches exhaustive enumeration.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import queue
import socket
import subprocess
import threading
from dataclasses import dataclass

from .lm import ALPHABET, LETTERS, SPACE, LayeredLM, p_char, split_context

log = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 12


@dataclass(frozen=True)
class Suggestion:
    word: str
    prob: float


def dijkstra_complete(
    lm: LayeredLM, history: str, n: int, max_len: int = DEFAULT_MAX_LEN
):
    """Top-n completions of the current partial word, best first.

    A completion is the partial word plus up to ``max_len`` added letters
    and a terminating space; its probability is the chain product of
    smoothed branch probabilities including the space.  Ties break
    alphabetically.  Fewer than n completions are returned only when the
    bounded search space holds fewer.
    """
    if n < 1 or max_len < 1:
        raise ValueError("n and max_len must be >= 1")
    _, partial = split_context(history)
    completed = []
    # Frontier entries: (-logprob, word_so_far, history_including_word).
    frontier = [(-0.0, partial, history)]
    while frontier and len(completed) < n:
        neg_logp, word, h = heapq.heappop(frontier)
        if word.endswith(SPACE):
            completed.append(Suggestion(word[:-1], math.exp(-neg_logp)))
            continue
        grown = len(word) - len(partial)
        if word:
            # Terminating here yields the word spelled so far.
            p = p_char(lm, h, SPACE)
            if p > 0.0:
                heapq.heappush(
                    frontier, (neg_logp - math.log(p), word + SPACE, h + SPACE)
                )
        if grown < max_len:
            for c in LETTERS:
                p = p_char(lm, h, c)
                if p > 0.0:
                    heapq.heappush(
                        frontier, (neg_logp - math.log(p), word + c, h + c)
                    )
    return completed


def oracle_char_dist(target: str) -> dict:
    """Bound distribution: 0.5 on the target, the rest spread uniformly."""
    if target not in ALPHABET:
        raise ValueError(f"target {target!r} not in alphabet")
    rest = 0.5 / (len(ALPHABET) - 1)
    return {c: (0.5 if c == target else rest) for c in ALPHABET}


def oracle_word_suggest(target_word: str, n: int = 6):
    """Bound suggestion list: the correct word at 0.5, nothing else."""
    if not target_word:
        return []
    return [Suggestion(target_word, 0.5)]


class SuggesterError(Exception):
    """Transport or protocol failure talking to the external suggester."""


class _StdioTransport:
    """Line-delimited JSON over a child process's stdin/stdout."""

    def __init__(self, argv, timeout_ms: int):
        self.timeout_s = timeout_ms / 1000.0
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def send_line(self, line: str):
        if self.proc.poll() is not None:
            raise SuggesterError("suggester process has exited")
        try:
            assert self.proc.stdin is not None
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SuggesterError(f"write failed: {exc}") from exc

    def recv_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise SuggesterError("suggester timed out") from None
        if line is None:
            raise SuggesterError("suggester closed its output")
        return line

    def close(self):
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout_ms: int):
        self.timeout_s = timeout_ms / 1000.0
        self.sock = socket.create_connection((host, port), timeout=self.timeout_s)
        self.sock.settimeout(self.timeout_s)
        self._rfile = self.sock.makefile("r", encoding="utf-8")

    def send_line(self, line: str):
        try:
            self.sock.sendall((line + "\n").encode("utf-8"))
        except OSError as exc:
            raise SuggesterError(f"write failed: {exc}") from exc

    def recv_line(self) -> str:
        try:
            line = self._rfile.readline()
        except OSError as exc:
            raise SuggesterError(f"read failed: {exc}") from exc
        if not line:
            raise SuggesterError("suggester closed the connection")
        return line

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class SuggesterHandle:
    """Client for the external word-suggester wire protocol.

    One request in flight at a time.  Any transport or protocol failure
    surfaces as SuggesterError; callers are expected to fall back to the
    built-in search.
    """

    def __init__(self, transport):
        self._transport = transport
        self._next_id = 0
        self._lock = threading.Lock()
        self.dead = False

    @classmethod
    def spawn(cls, argv, timeout_ms: int = 2000) -> "SuggesterHandle":
        return cls(_StdioTransport(argv, timeout_ms))

    @classmethod
    def connect(cls, host: str, port: int, timeout_ms: int = 2000) -> "SuggesterHandle":
        return cls(_TcpTransport(host, port, timeout_ms))

    def request(self, context: str, prefix: str, n: int):
        if self.dead:
            raise SuggesterError("suggester marked dead after earlier failure")
        with self._lock:
            self._next_id += 1
            req_id = self._next_id
            payload = json.dumps(
                {"id": req_id, "context": context, "prefix": prefix, "n": n}
            )
            try:
                self._transport.send_line(payload)
                while True:
                    line = self._transport.recv_line()
                    try:
                        msg = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise SuggesterError(f"malformed response: {exc}") from exc
                    if not isinstance(msg, dict):
                        raise SuggesterError("malformed response: not an object")
                    if msg.get("id") != req_id:
                        continue  # stale response from a dropped request
                    if "error" in msg:
                        raise SuggesterError(f"provider error: {msg['error']}")
                    raw = msg.get("suggestions")
                    if not isinstance(raw, list):
                        raise SuggesterError("malformed response: no suggestions")
                    out = []
                    for item in raw:
                        word = item.get("word", "")
                        score = float(item.get("score", 0.0))
                        out.append(Suggestion(word, max(score, 0.0)))
                    return out
            except SuggesterError:
                self.dead = True
                raise

    def close(self):
        self._transport.close()


def layered_suggest(
    handle: SuggesterHandle | None,
    lm: LayeredLM,
    history: str,
    n: int,
    max_len: int = DEFAULT_MAX_LEN,
):
    """External suggestions first, search fallback for the remainder.

    Provider words are kept only when they are clean lowercase extensions
    of the current partial word.  Short, failed or timed-out provider
    answers never raise; the remainder of the list fills from
    dijkstra_complete, de-duplicated, provider words first.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    prev_context, partial = split_context(history)
    context = history[: len(history) - len(partial)].rstrip(SPACE)
    merged = []
    seen = set()
    if handle is not None:
        try:
            provided = handle.request(context, partial, n)
        except SuggesterError as exc:
            log.warning("suggester fallback: %s", exc)
            provided = []
        for s in provided:
            word = s.word.lower()
            if (
                word
                and word.startswith(partial)
                and all(c in LETTERS for c in word)
                and word not in seen
            ):
                merged.append(Suggestion(word, s.prob))
                seen.add(word)
            if len(merged) >= n:
                return merged[:n]
    for s in dijkstra_complete(lm, history, n, max_len):
        if s.word and s.word not in seen:
            merged.append(s)
            seen.add(s.word)
        if len(merged) >= n:
            break
    return merged[:n]
