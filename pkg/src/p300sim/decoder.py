"""Bayesian flash decoder with dynamic stopping.

The posterior over flashboard targets starts from the language-model
prior and multiplies in a Gaussian likelihood per flash: the attended
density for highlighted cells, the non-attended density otherwise.
Updates accumulate the log likelihood *ratio* on highlighted cells only,
which is the same posterior (the normalizer absorbs constant factors)
and keeps long flash sequences numerically stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .swlda import GaussianParams

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class DecoderConfig:
    p_thresh: float = 0.95
    max_scans: int = 75
    backspace_prior: float = 0.005
    min_scans: int = 1  # full rounds required before the threshold may fire

    def __post_init__(self):
        if not 0.5 < self.p_thresh < 1.0:
            raise ValueError("p_thresh must lie in (0.5, 1)")
        if self.max_scans < 1:
            raise ValueError("max_scans must be >= 1")
        if self.min_scans < 0:
            raise ValueError("min_scans must be >= 0")


@dataclass(frozen=True)
class Posterior:
    """Distribution over active cells, stored as unnormalized log weights."""

    labels: tuple
    log_weights: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        w = self.log_weights - np.max(self.log_weights)
        e = np.exp(w)
        return e / e.sum()

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.probs))

    def argmax(self) -> str:
        return self.labels[int(np.argmax(self.log_weights))]


def likelihood(y: float, in_group: bool, params: GaussianParams) -> float:
    """Gaussian flash-score density under the attended or non-attended model."""
    mu, sigma = (params.mu_a, params.sigma_a) if in_group else (params.mu_n, params.sigma_n)
    z = (y - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def log_likelihood_ratio(y: float, params: GaussianParams) -> float:
    za = (y - params.mu_a) / params.sigma_a
    zn = (y - params.mu_n) / params.sigma_n
    return (-0.5 * za * za - math.log(params.sigma_a)) - (
        -0.5 * zn * zn - math.log(params.sigma_n)
    )


def init_prior(lm_dist: dict, suggestions, config: DecoderConfig, board=None) -> Posterior:
    """Posterior prior over active cells.

    Letter and space cells take the language-model mass, filled
    suggestion slots take their suggestion probability, backspace takes
    its configured prior; everything renormalizes to one.
    """
    from .flashboard import BACKSPACE_LABEL, SLOT_LABELS, SPACE_LABEL, label_to_symbol

    if board is not None:
        labels = list(board.active_labels())
    else:
        labels = [c for c in "abcdefghijklmnopqrstuvwxyz"] + [SPACE_LABEL, BACKSPACE_LABEL]
        labels += [SLOT_LABELS[i] for i in range(len(suggestions))]
    masses = []
    for label in labels:
        if label == BACKSPACE_LABEL:
            masses.append(config.backspace_prior)
        elif label in SLOT_LABELS:
            masses.append(max(float(suggestions[SLOT_LABELS.index(label)].prob), 0.0))
        else:
            masses.append(max(float(lm_dist.get(label_to_symbol(label), 0.0)), 0.0))
    total = sum(masses)
    if total <= 0:
        raise ValueError("prior has no mass")
    logw = np.log(np.maximum(np.array(masses) / total, 1e-300))
    return Posterior(tuple(labels), logw)


def update(post: Posterior, group, y: float, params: GaussianParams) -> Posterior:
    """Multiply in one flash's likelihood and return the new posterior."""
    ratio = log_likelihood_ratio(y, params)
    member = np.array([label in group.labels for label in post.labels])
    return Posterior(post.labels, post.log_weights + np.where(member, ratio, 0.0))


def check_stop(post: Posterior, scans_done: int, config: DecoderConfig):
    """Dynamic stopping rule.

    Returns the argmax cell once its posterior clears p_thresh, or once
    the scan budget is exhausted; otherwise None.  The threshold is not
    consulted before min_scans full rounds, so a confident prior cannot
    force a selection with no flash evidence behind it.
    """
    if scans_done >= config.max_scans:
        return post.argmax()
    if scans_done >= config.min_scans and float(np.max(post.probs)) >= config.p_thresh:
        return post.argmax()
    return None
