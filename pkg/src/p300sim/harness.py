"""Passage-typing simulation: schemes, error correction, ITR and retry rate.

A simulated user types a target passage on the flashboard.  Each selection
rebuilds the scheme's virtual layout and prior from the language model,
runs scan rounds drawing flash scores from the subject's resampled pools,
and stops dynamically.  Wrong selections trigger a backspace cycle; a
passage character that consumes more than the scan budget is abandoned
(credited zero) and the simulation moves on.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .decoder import DecoderConfig, check_stop, init_prior, update
from .flashboard import (
    BACKSPACE_LABEL,
    SLOT_LABELS,
    ScanSchedule,
    alphabetical_board,
    label_to_symbol,
    layout_diagonal,
    layout_sequential,
    map_virtual,
    place_suggestions,
    schedule_round,
    symbol_to_label,
)
from .lm import SPACE, LayeredLM, build_lm, load_corpus, normalize_text, p_next, split_context
from .signal_sim import SamplerState, ScorePools, build_pools, sample_score
from .swlda import (
    GaussianParams,
    fit_gaussians,
    read_subject_file,
    score,
    split_wscv,
    swlda_train,
)
from .wordpred import (
    SuggesterHandle,
    dijkstra_complete,
    layered_suggest,
    oracle_char_dist,
    oracle_word_suggest,
)

log = logging.getLogger(__name__)

SCHEMES = (
    "random",
    "deterministic",
    "freqsorted",
    "diagonal",
    "char_bound",
    "dijkstra",
    "external_llm",
    "word_bound",
)
WORD_SCHEMES = frozenset({"dijkstra", "external_llm", "word_bound"})
GRID_N = 36

CSV_COLUMNS = (
    "subject,scheme,cv_mode,itr_bits_per_min,retry_rate,chars_out,"
    "backspaces,abandoned,flashes,seconds,seed"
)

# Layout / scan-order pairing per scheme.  Character-bound and the word
# schemes ride on the diagonal layout with weighted scanning (the
# best-performing character-level configuration).
_SCHEME_LAYOUT = {
    "random": ("alphabetical", "random"),
    "deterministic": ("alphabetical", "deterministic"),
    "freqsorted": ("sequential", "deterministic"),
    "diagonal": ("diagonal", "weighted"),
    "char_bound": ("diagonal", "weighted"),
    "dijkstra": ("diagonal", "weighted"),
    "external_llm": ("diagonal", "weighted"),
    "word_bound": ("diagonal", "weighted"),
}


@dataclass
class SimConfig:
    scheme: str = "random"
    cv_mode: str = "wscv"
    passage_path: str | None = None
    corpus_path: str | None = None
    subjects_path: str | None = None
    seed: int = 0
    suggestions_n: int = 6
    soa_seconds: float = 0.125
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    abandon_scans: int = 75
    max_word_len: int = 12
    layout_rebuild: str = "char"  # char | word | passage
    suggester_cmd: list | None = None
    suggester_tcp: str | None = None
    out_path: str | None = None
    trace_dir: str | None = None
    passage_text: str | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.cv_mode not in ("wscv", "ascv"):
            raise ValueError(f"unknown cv_mode {self.cv_mode!r}")
        if not 0 <= self.suggestions_n <= 6:
            raise ValueError("suggestions_n must be in 0..6")
        if self.layout_rebuild not in ("char", "word", "passage"):
            raise ValueError(f"unknown layout_rebuild {self.layout_rebuild!r}")


@dataclass
class SubjectModel:
    subject_id: str
    pools: ScorePools
    gaussians: GaussianParams


@dataclass
class SelectionRecord:
    intended: str
    selected: str
    scans_used: int
    flashes_used: int
    elapsed_seconds: float
    was_backspace_cycle: bool
    abandoned: bool = False
    chars_credited: int = 0


@dataclass
class SimResult:
    subject_id: str
    scheme: str
    itr_bits_per_min: float
    retry_rate: float
    records: list
    final_text: str

    @property
    def chars_out(self) -> int:
        return sum(r.chars_credited for r in self.records)

    @property
    def backspaces(self) -> int:
        return sum(1 for r in self.records if r.was_backspace_cycle)

    @property
    def abandoned(self) -> int:
        return sum(1 for r in self.records if r.abandoned)

    @property
    def flashes(self) -> int:
        return sum(r.flashes_used for r in self.records)

    @property
    def seconds(self) -> float:
        return sum(r.elapsed_seconds for r in self.records)


def compute_itr(selections, grid_n: int = GRID_N) -> float:
    """Aggregate information transfer rate in bits per minute.

    Each character standing in the final correct output carries
    log2(grid_n + 1) bits; all elapsed time counts, including retries,
    corrections and abandoned attempts.
    """
    total_seconds = sum(r.elapsed_seconds for r in selections)
    if total_seconds <= 0:
        raise ValueError("zero elapsed time")
    chars = sum(r.chars_credited for r in selections)
    if chars <= 0:
        return 0.0
    return 60.0 * math.log2(grid_n + 1) * chars / total_seconds


def compute_retry_rate(selections) -> float:
    """Backspace cycles as a fraction of communicated characters."""
    backspaces = sum(1 for r in selections if r.was_backspace_cycle)
    chars = sum(r.chars_credited for r in selections)
    if chars <= 0:
        warnings.warn("no characters communicated; retry rate pinned to 1.0", stacklevel=2)
        return 1.0
    return backspaces / chars


def _common_prefix_len(a: str, b: str) -> int:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


def _word_span(target: str, pos: int):
    """(start, end) of the word containing/ending at pos; end None at EOF."""
    start = target.rfind(SPACE, 0, pos) + 1
    end = target.find(SPACE, pos)
    return start, (None if end == -1 else end)


def _context_sig(history: str):
    prev, partial = split_context(history)
    return (prev, partial, history[-2:])


def _p_next_cached(lm, history, cache):
    sig = _context_sig(history)
    dist = cache.get(sig)
    if dist is None:
        dist = p_next(lm, history)
        cache[sig] = dist
    return dist


def _build_board(scheme: str, dist, physical):
    kind, policy = _SCHEME_LAYOUT[scheme]
    if kind == "alphabetical":
        virtual = physical
    elif kind == "sequential":
        virtual = layout_sequential(dist)
    else:
        virtual = layout_diagonal(dist)
    _, groups = map_virtual(virtual, physical)
    return virtual, groups, ScanSchedule(policy)


def _suggestions_for(scheme, lm, history, config, suggester, cache, target_word):
    if scheme not in WORD_SCHEMES or config.suggestions_n < 1:
        return []
    n = config.suggestions_n
    if scheme == "word_bound":
        return oracle_word_suggest(target_word or "", n)
    sig = (scheme, _context_sig(history))
    cached = cache.get(sig)
    if cached is None:
        if scheme == "dijkstra":
            cached = dijkstra_complete(lm, history, n, config.max_word_len)
        else:
            cached = layered_suggest(suggester, lm, history, n, config.max_word_len)
        cached = [s for s in cached if s.word][:n]
        cache[sig] = cached
    return cached


def _run_selection(intended, groups, schedule, prior, sampler, pools, params, dcfg, rng, scan_cap):
    """Flash until dynamic stopping fires; returns (label, scans, flashes)."""
    attempt_cfg = replace(dcfg, max_scans=scan_cap)
    by_id = {g.id: g for g in groups}
    post = prior
    flashes = 0
    scans = 0
    while True:
        posterior = post.as_dict() if schedule.policy == "weighted" else {}
        order = schedule_round(schedule, groups, posterior, rng)
        stopped = None
        for gid in order:
            g = by_id[gid]
            y = sample_score(sampler, pools, intended in g.labels)
            post = update(post, g, y, params)
            flashes += 1
            if log.isEnabledFor(logging.DEBUG):
                log.debug(
                    "flash %d group %d: argmax %s p=%.4f",
                    flashes, gid, post.argmax(), float(np.max(post.probs)),
                )
            stopped = check_stop(post, scans, attempt_cfg)
            if stopped is not None:
                break
        scans += 1
        if stopped is None:
            stopped = check_stop(post, scans, attempt_cfg)
        if stopped is not None:
            return stopped, scans, flashes


def simulate_passage(
    config: SimConfig,
    subject: SubjectModel,
    lm: LayeredLM,
    rng: np.random.Generator,
    suggester: SuggesterHandle | None = None,
    caches: dict | None = None,
) -> SimResult:
    """Type the configured passage once for one subject."""
    if caches is None:
        caches = {}
    pnext_cache = caches.setdefault("p_next", {})
    sugg_cache = caches.setdefault("suggest", {})

    target = normalize_text(config.passage_text or "")
    if not target:
        raise ValueError("empty passage")
    scheme = config.scheme
    dcfg = config.decoder
    sampler = SamplerState(rng=rng)
    physical = alphabetical_board()

    typed_units: list = []
    records: list = []
    eff_target = target
    unit_start = 0
    unit_scans = 0
    board_cache = None  # (virtual, groups, schedule) for coarse rebuild cadences

    while True:
        typed_text = "".join(typed_units)
        if typed_text == eff_target:
            break
        frontier = _common_prefix_len(typed_text, eff_target)
        if frontier > unit_start:
            unit_start = frontier
            unit_scans = 0

        history = typed_text
        next_char = eff_target[frontier] if frontier < len(eff_target) else SPACE
        if scheme == "char_bound":
            dist = oracle_char_dist(next_char)
        else:
            dist = _p_next_cached(lm, history, pnext_cache)

        _, partial = split_context(history)
        rebuild = (
            board_cache is None
            or config.layout_rebuild == "char"
            or (config.layout_rebuild == "word" and partial == "")
        )
        if rebuild:
            board_cache = _build_board(scheme, dist, physical)
        virtual, groups, schedule = board_cache

        target_word = None
        error_pending = len(typed_text) > frontier
        if not error_pending and frontier < len(eff_target):
            start, end = _word_span(eff_target, frontier)
            if end is not None and frontier < end:
                target_word = eff_target[start:end]
        suggestions = _suggestions_for(
            scheme, lm, history, config, suggester, sugg_cache, target_word
        )
        board = place_suggestions(virtual, [s.word for s in suggestions])
        prior = init_prior(dist, suggestions, dcfg, board=board)

        if error_pending:
            intended = BACKSPACE_LABEL
        elif target_word is not None and target_word in board.suggestions:
            intended = SLOT_LABELS[board.suggestions.index(target_word)]
        else:
            intended = symbol_to_label(next_char)

        scan_cap = min(dcfg.max_scans, config.abandon_scans - unit_scans)
        selected, scans, flashes = _run_selection(
            intended, groups, schedule, prior, sampler, subject.pools,
            subject.gaussians, dcfg, rng, scan_cap,
        )
        unit_scans += scans

        # Apply the selection to the typed text.
        if selected == BACKSPACE_LABEL:
            if typed_units:
                typed_units.pop()
        elif selected in SLOT_LABELS:
            word = board.suggestions[SLOT_LABELS.index(selected)]
            typed_units.append(word[len(partial):] + SPACE)
        else:
            typed_units.append(label_to_symbol(selected))

        new_text = "".join(typed_units)
        new_frontier = _common_prefix_len(new_text, eff_target)
        record = SelectionRecord(
            intended=intended,
            selected=selected,
            scans_used=scans,
            flashes_used=flashes,
            elapsed_seconds=flashes * config.soa_seconds,
            was_backspace_cycle=intended == BACKSPACE_LABEL,
            chars_credited=new_frontier - frontier,
        )
        records.append(record)

        if new_frontier <= unit_start and unit_scans >= config.abandon_scans:
            # Abandon the blocking character: drop the erroneous tail, skip
            # the character, credit nothing (its time already counted).
            record.abandoned = True
            keep = eff_target[:new_frontier]
            eff_target = keep + eff_target[new_frontier + 1 :]
            typed_units = list(keep)
            unit_start = new_frontier
            unit_scans = 0

    final_text = "".join(typed_units)
    itr = compute_itr(records, GRID_N) if records else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        retry = compute_retry_rate(records) if records else 0.0
    return SimResult(
        subject_id=subject.subject_id,
        scheme=scheme,
        itr_bits_per_min=itr,
        retry_rate=retry,
        records=records,
        final_text=final_text,
    )


# ---------------------------------------------------------------------------
# Subject loading
# ---------------------------------------------------------------------------

def _scores_in_order(epochs, weights):
    ordered = sorted(epochs, key=lambda e: (e.char_index, e.sequence_index))
    return [(score(weights, e), e.label) for e in ordered]


def subject_from_scores(subject_id: str, scored) -> SubjectModel:
    """Build pools and Gaussian parameters from ordered (score, label) rows."""
    pools = build_pools(scored)
    gauss = fit_gaussians([(s, l) for s, l in scored])
    return SubjectModel(subject_id, pools, gauss)


def load_subjects(path, cv_mode: str = "wscv", collect_errors: bool = False):
    """Load every subject file in a directory.

    Pre-scored files are used as-is.  Raw-epoch files are classified
    first: per-subject stepwise training under WSCV (scores come from the
    fold where each epoch is held out), or leave-one-subject-out training
    under ASCV.  With collect_errors the return value is
    (subjects, failed_ids) and broken subjects do not abort the load.
    """
    files = sorted(
        os.path.join(path, f) for f in os.listdir(path) if not f.startswith(".")
    )
    if not files:
        raise ValueError(f"no subject files in {path}")
    data, failures = [], []
    for f in files:
        try:
            data.append(read_subject_file(f))
        except (OSError, ValueError) as exc:
            if not collect_errors:
                raise
            log.error("cannot read %s: %s", f, exc)
            failures.append(os.path.splitext(os.path.basename(f))[0])
    raw = {d.subject_id: d.epochs for d in data if d.epochs}
    subjects = []
    for d in data:
        try:
            if d.scored:
                rows = [(s, label) for s, label, _ in d.scored]
            elif cv_mode == "ascv":
                others = [e for sid, eps in raw.items() if sid != d.subject_id for e in eps]
                if not others:
                    raise ValueError("ASCV needs at least two raw-data subjects")
                weights = swlda_train(others)
                rows = _scores_in_order(d.epochs, weights)
            else:
                scored = []
                for train, test in split_wscv(d.epochs):
                    weights = swlda_train(train)
                    scored.extend(
                        (score(weights, e), e.label, e.char_index, e.sequence_index)
                        for e in test
                    )
                rows = [(s, l) for s, l, *_ in sorted(scored, key=lambda r: (r[2], r[3]))]
            subjects.append(subject_from_scores(d.subject_id, rows))
        except (ValueError, KeyError) as exc:
            if not collect_errors:
                raise
            log.error("subject %s unusable: %s", d.subject_id, exc)
            failures.append(d.subject_id)
    if collect_errors:
        return subjects, failures
    return subjects


# ---------------------------------------------------------------------------
# Batch runner
# ---------------------------------------------------------------------------

def _make_suggester(config: SimConfig):
    if config.suggester_cmd:
        return SuggesterHandle.spawn(config.suggester_cmd)
    if config.suggester_tcp:
        host, _, port = config.suggester_tcp.rpartition(":")
        return SuggesterHandle.connect(host, int(port))
    return None


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def run_batch(config: SimConfig, subjects=None, lm=None):
    """Simulate every subject under one scheme and write the results CSV.

    Returns (results, any_failed).  A failing subject is recorded as a
    failed row; the batch continues.
    """
    if lm is None:
        if not config.corpus_path:
            raise ValueError("corpus_path required")
        lm = build_lm(load_corpus(config.corpus_path))
    if config.passage_text is None:
        if not config.passage_path:
            raise ValueError("passage_path required")
        config.passage_text = load_corpus(config.passage_path)
    failures = []
    if subjects is None:
        if not config.subjects_path:
            raise ValueError("subjects_path required")
        subjects, failures = load_subjects(
            config.subjects_path, config.cv_mode, collect_errors=True
        )
        if not subjects and failures:
            raise ValueError("no usable subjects")

    suggester = _make_suggester(config) if config.scheme == "external_llm" else None
    caches: dict = {}
    results = []
    try:
        for idx, subject in enumerate(sorted(subjects, key=lambda s: s.subject_id)):
            rng = np.random.default_rng(config.seed ^ idx)
            try:
                result = simulate_passage(config, subject, lm, rng, suggester, caches)
                results.append(result)
                if config.trace_dir:
                    _write_trace(config.trace_dir, result)
            except Exception as exc:  # noqa: BLE001 - batch must continue
                log.error("subject %s failed: %s", subject.subject_id, exc)
                failures.append(subject.subject_id)
    finally:
        if suggester is not None:
            suggester.close()

    if config.out_path:
        write_results_csv(config.out_path, config, results, failures)
    return results, bool(failures)


def _write_trace(trace_dir, result: SimResult):
    os.makedirs(trace_dir, exist_ok=True)
    path = os.path.join(trace_dir, f"{result.subject_id}_{result.scheme}.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        for r in result.records:
            fh.write(json.dumps(r.__dict__) + "\n")


def write_results_csv(path, config: SimConfig, results, failures=()):
    lines = [CSV_COLUMNS]
    for r in results:
        lines.append(
            ",".join(
                [
                    r.subject_id,
                    r.scheme,
                    config.cv_mode,
                    _fmt(r.itr_bits_per_min),
                    _fmt(r.retry_rate),
                    str(r.chars_out),
                    str(r.backspaces),
                    str(r.abandoned),
                    str(r.flashes),
                    _fmt(r.seconds),
                    str(config.seed),
                ]
            )
        )
    for sid in failures:
        lines.append(f"{sid},{config.scheme},{config.cv_mode},failed,,,,,,,{config.seed}")
    if results:
        itrs = np.array([r.itr_bits_per_min for r in results])
        retries = np.array([r.retry_rate for r in results])
        sd = float(np.std(itrs, ddof=1)) if len(itrs) > 1 else 0.0
        rsd = float(np.std(retries, ddof=1)) if len(retries) > 1 else 0.0
        lines.append(
            ",".join(
                [
                    "summary",
                    config.scheme,
                    config.cv_mode,
                    f"{np.mean(itrs):.3f}±{sd:.3f}",
                    f"{np.mean(retries):.3f}±{rsd:.3f}",
                    str(sum(r.chars_out for r in results)),
                    str(sum(r.backspaces for r in results)),
                    str(sum(r.abandoned for r in results)),
                    str(sum(r.flashes for r in results)),
                    _fmt(sum(r.seconds for r in results)),
                    str(config.seed),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
