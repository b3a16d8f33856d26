"""Resampling of recorded flash scores through a two-state Markov chain.

Simulated flashes draw real scores from the subject's laboratory data,
conditioned on whether the previous and current flashes were attended,
which preserves the serial correlation of overlapping evoked responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATTENDED = True
NON_ATTENDED = False


@dataclass
class ScorePools:
    """Recorded scores bucketed by (previous state, current state)."""

    pools: dict  # (bool, bool) -> list of floats
    marginals: dict  # bool -> list of floats


@dataclass
class SamplerState:
    rng: np.random.Generator
    prev_state: bool = NON_ATTENDED


def build_pools(scored_epochs) -> ScorePools:
    """Bucket scores of consecutive flash pairs.

    ``scored_epochs`` is an ordered sequence of (score, label) in original
    flash order; pair (i-1, i) files score_i under
    pools[label_{i-1}][label_i].
    """
    rows = list(scored_epochs)
    if len(rows) < 2:
        raise ValueError("need at least two scored epochs")
    pools = {
        (NON_ATTENDED, NON_ATTENDED): [],
        (NON_ATTENDED, ATTENDED): [],
        (ATTENDED, NON_ATTENDED): [],
        (ATTENDED, ATTENDED): [],
    }
    for (_, prev_label), (cur_score, cur_label) in zip(rows, rows[1:]):
        pools[(bool(prev_label), bool(cur_label))].append(float(cur_score))
    marginals = {
        cur: pools[(NON_ATTENDED, cur)] + pools[(ATTENDED, cur)]
        for cur in (NON_ATTENDED, ATTENDED)
    }
    return ScorePools(pools, marginals)


def sample_score(state: SamplerState, pools: ScorePools, is_attended: bool) -> float:
    """Uniform draw (with replacement) conditioned on the state pair.

    Falls back to the current-state marginal when the exact pair was
    never observed; raises only when the subject has no scores for the
    requested state at all.
    """
    pool = pools.pools[(state.prev_state, bool(is_attended))]
    if not pool:
        pool = pools.marginals[bool(is_attended)]
    if not pool:
        raise ValueError("insufficient subject data for requested state")
    value = pool[int(state.rng.integers(len(pool)))]
    state.prev_state = bool(is_attended)
    return value
