"""Word prediction: search-vs-enumeration oracles, fallback merging, bounds."""

import json
import math
import sys
import textwrap

import pytest

from p300sim.lm import LETTERS, SPACE, p_char, split_context
from p300sim.wordpred import (
    Suggestion,
    SuggesterError,
    SuggesterHandle,
    dijkstra_complete,
    layered_suggest,
    oracle_char_dist,
    oracle_word_suggest,
)

# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def full_enumeration(lm, history, n, max_len):
    """Score every letter string up to max_len added characters."""
    _, partial = split_context(history)
    results = []

    def walk(word, h, logp, depth):
        if word:
            p = p_char(lm, h, SPACE)
            if p > 0:
                results.append((word, logp + math.log(p)))
        if depth == max_len:
            return
        for c in LETTERS:
            p = p_char(lm, h, c)
            if p > 0:
                walk(word + c, h + c, logp + math.log(p), depth + 1)

    walk(partial, history, 0.0, 0)
    results.sort(key=lambda t: (-t[1], t[0]))
    return results[:n]


def pruned_enumeration(lm, history, n, max_len):
    """Depth-first enumeration with a sound bound.

    Every branch factor is <= 1, so a prefix whose log-probability is
    already below the current n-th best completion cannot contain a
    better one; pruning it never changes the exact top-n result.
    """
    _, partial = split_context(history)
    best: list = []  # ascending by evictability: worst completion first

    def evict_key(logp, word):
        # lowest probability evicts first; on exact ties the
        # alphabetically-last word goes (keeping alphabetical winners)
        return (logp,) + tuple(-ord(c) for c in word) + (1,)

    def consider(word, logp):
        import bisect

        bisect.insort(best, evict_key(logp, word) + (word,))
        if len(best) > n:
            best.pop(0)

    def bound():
        return best[0][0] if len(best) == n else -math.inf

    def walk(word, h, logp, depth):
        if len(best) == n and logp < bound():
            return
        if word:
            p = p_char(lm, h, SPACE)
            if p > 0:
                consider(word, logp + math.log(p))
        if depth == max_len:
            return
        for c in LETTERS:
            p = p_char(lm, h, c)
            if p > 0:
                walk(word + c, h + c, logp + math.log(p), depth + 1)

    walk(partial, history, 0.0, 0)
    return sorted(((row[-1], row[0]) for row in best), key=lambda t: (-t[1], t[0]))


def assert_matches_oracle(result, oracle):
    assert [s.word for s in result] == [w for w, _ in oracle]
    for s, (_, logp) in zip(result, oracle):
        assert math.log(s.prob) == pytest.approx(logp, abs=1e-12)


# ---------------------------------------------------------------------------
# dijkstra_complete
# ---------------------------------------------------------------------------

class TestDijkstraComplete:
    def test_spec_example_toy_corpus(self, toy_lm):
        result = dijkstra_complete(toy_lm, "ca", n=2, max_len=4)
        assert [s.word for s in result] == ["cat", "car"]
        assert_matches_oracle(result, pruned_enumeration(toy_lm, "ca", 2, 4))

    def test_full_enumeration_small(self, toy_lm):
        # max_len small enough for the unpruned oracle, which also
        # validates the pruned oracle itself
        for history in ("ca", "c", "cat "):
            full = full_enumeration(toy_lm, history, 5, 2)
            assert pruned_enumeration(toy_lm, history, 5, 2) == full
            assert_matches_oracle(dijkstra_complete(toy_lm, history, 5, 2), full)

    def test_empty_prefix_argmax_word(self, toy_lm):
        result = dijkstra_complete(toy_lm, "cat ", n=1, max_len=4)
        oracle = pruned_enumeration(toy_lm, "cat ", 1, 4)
        assert result[0].word == oracle[0][0] == "cat"

    def test_max_len_one_yields_single_char_words(self, toy_lm):
        for s in dijkstra_complete(toy_lm, "cat ", n=10, max_len=1):
            assert len(s.word) == 1

    def test_monotone_in_n(self, toy_lm):
        small = [s.word for s in dijkstra_complete(toy_lm, "c", 3, 5)]
        big = [s.word for s in dijkstra_complete(toy_lm, "c", 6, 5)]
        assert big[:3] == small

    def test_prefix_soundness(self, big_lm):
        for s in dijkstra_complete(big_lm, "ta", 6, 8):
            assert s.word.startswith("ta")

    def test_probabilities_descending(self, big_lm):
        probs = [s.prob for s in dijkstra_complete(big_lm, "s", 6, 8)]
        assert probs == sorted(probs, reverse=True)

    def test_bad_args_rejected(self, toy_lm):
        with pytest.raises(ValueError):
            dijkstra_complete(toy_lm, "ca", 0, 4)
        with pytest.raises(ValueError):
            dijkstra_complete(toy_lm, "ca", 1, 0)


# ---------------------------------------------------------------------------
# Oracle bounds
# ---------------------------------------------------------------------------

class TestOracleBounds:
    def test_char_dist_values(self):
        dist = oracle_char_dist("e")
        assert dist["e"] == 0.5
        assert dist["q"] == pytest.approx(0.5 / 26)
        assert sum(dist.values()) == pytest.approx(1.0)
        assert max(dist, key=dist.get) == "e"

    def test_char_dist_rejects_unknown(self):
        with pytest.raises(ValueError):
            oracle_char_dist("!")

    def test_word_suggest(self):
        assert oracle_word_suggest("cat") == [Suggestion("cat", 0.5)]
        assert oracle_word_suggest("cat", n=6) == [Suggestion("cat", 0.5)]
        assert oracle_word_suggest("") == []


# ---------------------------------------------------------------------------
# layered_suggest and the wire client
# ---------------------------------------------------------------------------

class FakeHandle:
    def __init__(self, response):
        self.response = response
        self.requests = []

    def request(self, context, prefix, n):
        self.requests.append((context, prefix, n))
        if isinstance(self.response, Exception):
            raise self.response
        return self.response


class TestLayeredSuggest:
    def test_provider_satisfies_n(self, toy_lm):
        handle = FakeHandle([Suggestion("cax", 0.9), Suggestion("cay", 0.8)])
        out = layered_suggest(handle, toy_lm, "ca", 2)
        assert [s.word for s in out] == ["cax", "cay"]

    def test_provider_empty_means_pure_dijkstra(self, toy_lm):
        handle = FakeHandle([])
        out = layered_suggest(handle, toy_lm, "ca", 3)
        assert [s.word for s in out] == [
            s.word for s in dijkstra_complete(toy_lm, "ca", 3)
        ]

    def test_partial_provider_merges_deduplicated(self, toy_lm):
        dijkstra_words = [s.word for s in dijkstra_complete(toy_lm, "ca", 6)]
        handle = FakeHandle(
            [Suggestion("cazq", 0.9), Suggestion(dijkstra_words[0], 0.8)]
        )
        out = layered_suggest(handle, toy_lm, "ca", 6)
        words = [s.word for s in out]
        assert len(words) == 6
        assert len(set(words)) == 6
        assert words[0] == "cazq"
        assert words[1] == dijkstra_words[0]

    def test_provider_error_falls_back(self, toy_lm):
        handle = FakeHandle(SuggesterError("boom"))
        out = layered_suggest(handle, toy_lm, "ca", 2)
        assert [s.word for s in out] == [
            s.word for s in dijkstra_complete(toy_lm, "ca", 2)
        ]

    def test_wrong_prefix_and_junk_filtered(self, toy_lm):
        handle = FakeHandle(
            [Suggestion("dog", 0.9), Suggestion("ca7x", 0.8), Suggestion("CAts", 0.7)]
        )
        out = layered_suggest(handle, toy_lm, "ca", 2)
        assert out[0].word == "cats"  # lowercased, prefix-consistent survivor

    def test_context_split(self, toy_lm):
        handle = FakeHandle([])
        layered_suggest(handle, toy_lm, "the cat ca", 2)
        context, prefix, _ = handle.requests[0]
        assert context == "the cat"
        assert prefix == "ca"

    def test_no_handle_is_pure_dijkstra(self, toy_lm):
        out = layered_suggest(None, toy_lm, "ca", 2)
        assert [s.word for s in out] == [
            s.word for s in dijkstra_complete(toy_lm, "ca", 2)
        ]


ECHO_PROVIDER = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        words = [req["prefix"] + chr(ord('a') + i) for i in range(req["n"])]
        resp = {"id": req["id"],
                "suggestions": [{"word": w, "score": 1.0 - 0.1 * i}
                                 for i, w in enumerate(words)]}
        print(json.dumps(resp), flush=True)
    """
)

DYING_PROVIDER = "import sys; sys.exit(1)"

SLOW_PROVIDER = textwrap.dedent(
    """
    import sys, time
    sys.stdin.readline()
    time.sleep(30)
    """
)


BRIDGE_MAIN = __import__("pathlib").Path(__file__).resolve().parent.parent / "bridge" / "dist" / "main.js"
needs_bridge = pytest.mark.skipif(
    not BRIDGE_MAIN.exists(), reason="suggester bridge not built (bridge/dist/main.js)"
)


@needs_bridge
class TestRealBridge:
    """Integration against the actual TypeScript bridge process."""

    def test_stub_backend_fills_layered_suggest(self, toy_lm):
        handle = SuggesterHandle.spawn(["node", str(BRIDGE_MAIN), "--stub"])
        try:
            first = layered_suggest(handle, toy_lm, "the ca", 6)
            assert len(first) == 6
            assert all(s.word.startswith("ca") for s in first)
            assert len({s.word for s in first}) == 6
        finally:
            handle.close()
        handle = SuggesterHandle.spawn(["node", str(BRIDGE_MAIN), "--stub"])
        try:
            again = layered_suggest(handle, toy_lm, "the ca", 6)
            assert [s.word for s in again] == [s.word for s in first]
        finally:
            handle.close()

    def test_model_backend_if_trained(self, toy_lm):
        bundle = BRIDGE_MAIN.parent.parent / "fixtures" / "tiny-lm.json"
        if not bundle.exists():
            pytest.skip("tiny-lm fixture not trained")
        handle = SuggesterHandle.spawn(
            ["node", str(BRIDGE_MAIN), "--model", str(bundle)], timeout_ms=15000
        )
        try:
            out = handle.request("bato ne", "t", 4)
            assert 0 < len(out) <= 4
            assert all(s.word.startswith("t") for s in out)
            scores = [s.prob for s in out]
            assert scores == sorted(scores, reverse=True)
        finally:
            handle.close()

    def test_tcp_transport(self, toy_lm):
        import re
        import subprocess
        import time

        proc = subprocess.Popen(
            ["node", str(BRIDGE_MAIN), "--stub", "--tcp", "127.0.0.1:0"],
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            assert proc.stderr is not None
            line = proc.stderr.readline()
            match = re.search(r"listening on .*:(\d+)", line)
            assert match, f"no listen banner: {line!r}"
            port = int(match.group(1))
            handle = SuggesterHandle.connect("127.0.0.1", port, timeout_ms=5000)
            try:
                out = handle.request("over tcp", "ne", 3)
                assert 0 < len(out) <= 3
                assert all(s.word.startswith("ne") for s in out)
                merged = layered_suggest(handle, toy_lm, "the ca", 6)
                assert len(merged) == 6
            finally:
                handle.close()
        finally:
            proc.terminate()
            proc.wait(timeout=5)


class TestSuggesterHandle:
    def test_stdio_roundtrip(self):
        handle = SuggesterHandle.spawn([sys.executable, "-c", ECHO_PROVIDER])
        try:
            out = handle.request("the cat", "sa", 3)
            assert [s.word for s in out] == ["saa", "sab", "sac"]
            out = handle.request("the cat", "x", 1)
            assert [s.word for s in out] == ["xa"]
        finally:
            handle.close()

    def test_dead_process_raises_and_sticks(self, toy_lm):
        handle = SuggesterHandle.spawn([sys.executable, "-c", DYING_PROVIDER])
        try:
            with pytest.raises(SuggesterError):
                handle.request("", "ca", 2)
            assert handle.dead
            out = layered_suggest(handle, toy_lm, "ca", 2)
            assert [s.word for s in out] == [
                s.word for s in dijkstra_complete(toy_lm, "ca", 2)
            ]
        finally:
            handle.close()

    def test_timeout_raises(self):
        handle = SuggesterHandle.spawn(
            [sys.executable, "-c", SLOW_PROVIDER], timeout_ms=300
        )
        try:
            with pytest.raises(SuggesterError, match="timed out"):
                handle.request("", "ca", 2)
        finally:
            handle.close()
