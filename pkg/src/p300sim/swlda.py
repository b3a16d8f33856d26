"""Stepwise linear discriminant analysis of P300 flash epochs.

Features are block means of the 600 ms post-stimulus window (32 channels
x 13 time features = 416).  Training regresses +/-1 class labels on a
feature subset grown by forward significance steps and pruned by backward
elimination; the flash score is the dot product of the learned weights
with an epoch's features.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

N_CHANNELS = 32
N_SAMPLES = 154
DOWNSAMPLE = 12
N_TIME_FEATURES = 13  # 12 full blocks of 12 samples + one block of 10
N_FEATURES = N_CHANNELS * N_TIME_FEATURES

ATTENDED = True
NON_ATTENDED = False


@dataclass
class EpochFeatures:
    values: np.ndarray
    label: bool  # True = attended
    subject_id: str = ""
    sequence_index: int = 0
    char_index: int = 0
    group_id: int = -1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite feature values")


@dataclass
class ClassifierWeights:
    selected: tuple
    weights: np.ndarray
    intercept: float


@dataclass
class GaussianParams:
    mu_a: float
    sigma_a: float
    mu_n: float
    sigma_n: float


def extract_features(epoch) -> np.ndarray:
    """Downsample one 32x154 epoch to 416 block-mean features.

    Each channel contributes the means of consecutive sample blocks of
    size 12; the final block holds the remaining 10 samples.  Channels
    are concatenated in input (montage) order.
    """
    arr = np.asarray(epoch, dtype=float)
    if arr.shape != (N_CHANNELS, N_SAMPLES):
        raise ValueError(f"expected epoch shape {(N_CHANNELS, N_SAMPLES)}, got {arr.shape}")
    edges = [(i * DOWNSAMPLE, min((i + 1) * DOWNSAMPLE, N_SAMPLES)) for i in range(N_TIME_FEATURES)]
    feats = np.empty((N_CHANNELS, N_TIME_FEATURES))
    for j, (lo, hi) in enumerate(edges):
        feats[:, j] = arr[:, lo:hi].mean(axis=1)
    return feats.reshape(-1)


def _ols_stats(X: np.ndarray, y: np.ndarray):
    """Least-squares fit with intercept; returns beta, RSS, per-coef p-values."""
    n, k = X.shape
    design = np.column_stack([np.ones(n), X])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    rss = float(resid @ resid)
    dof = n - (k + 1)
    if dof <= 0:
        raise ValueError("more features than samples")
    sigma2 = rss / dof
    xtx_inv = np.linalg.pinv(design.T @ design)
    se = np.sqrt(np.clip(np.diag(xtx_inv) * sigma2, 1e-300, None))
    tvals = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(tvals), dof)
    return beta, rss, pvals[1:]  # drop the intercept's p-value


def swlda_train(
    data,
    p_enter: float = 0.1,
    p_remove: float = 0.15,
    max_features: int = 60,
) -> ClassifierWeights:
    """Forward/backward stepwise regression of labels on features.

    The forward step adds the candidate with the smallest partial-F
    p-value when it clears p_enter after a Bonferroni correction for the
    number of candidates scanned (without the correction the min-p over
    ~400 null features enters almost surely, and pure-noise data would
    fill the model).  The backward step drops any selected feature whose
    p-value exceeds p_remove.  Stops when a full iteration changes
    nothing, a selection set repeats, or max_features is reached.
    """
    X = np.stack([e.values for e in data])
    y = np.array([1.0 if e.label else -1.0 for e in data])
    if len(set(y.tolist())) < 2:
        raise ValueError("degenerate labels")
    n, n_feat = X.shape

    selected: list = []
    seen_sets = set()
    while True:
        changed = False
        # Forward step on residualized candidates (numerically equivalent
        # to the partial F-test of adding each one to the current model).
        q, _ = np.linalg.qr(np.column_stack([np.ones(n)] + [X[:, j] for j in selected]))
        resid = y - q @ (q.T @ y)
        rss = float(resid @ resid)
        candidates = [j for j in range(n_feat) if j not in selected]
        if candidates and len(selected) < max_features:
            Xc = X[:, candidates]
            Xc_perp = Xc - q @ (q.T @ Xc)
            ssq = np.einsum("ij,ij->j", Xc_perp, Xc_perp)
            ok = ssq > 1e-10 * n  # skip features collinear with the model
            num = Xc_perp.T @ resid
            dof = n - len(selected) - 2
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(ok, num**2 / np.where(ok, ssq, 1.0), 0.0)
                f = gain / np.clip((rss - gain) / dof, 1e-300, None)
            pvals = np.where(ok, stats.f.sf(f, 1, dof), 1.0)
            best = int(np.argmin(pvals))
            if pvals[best] * len(candidates) < p_enter:
                selected.append(candidates[best])
                changed = True
        # Backward step: drop the least significant feature(s).
        while selected:
            _, _, pvals = _ols_stats(X[:, selected], y)
            worst = int(np.argmax(pvals))
            if pvals[worst] > p_remove:
                del selected[worst]
                changed = True
            else:
                break
        key = frozenset(selected)
        if not changed or key in seen_sets or len(selected) >= max_features:
            break
        seen_sets.add(key)

    if selected:
        beta, _, _ = _ols_stats(X[:, selected], y)
        intercept, weights = float(beta[0]), beta[1:]
    else:
        intercept, weights = float(np.mean(y)), np.empty(0)
    return ClassifierWeights(tuple(selected), np.asarray(weights, dtype=float), intercept)


def score(weights: ClassifierWeights, features) -> float:
    """Flash score: weighted sum of the selected features plus intercept."""
    values = features.values if isinstance(features, EpochFeatures) else np.asarray(features, dtype=float)
    if not weights.selected:
        return weights.intercept
    return float(values[list(weights.selected)] @ weights.weights + weights.intercept)


def split_wscv(subject_epochs):
    """Three within-subject folds: per character, flashes split into three
    contiguous sets; fold k tests on set k and trains on the other two."""
    by_char: dict = {}
    for e in subject_epochs:
        by_char.setdefault(e.char_index, []).append(e)
    for char_epochs in by_char.values():
        char_epochs.sort(key=lambda e: e.sequence_index)
        if len(char_epochs) % 3 != 0:
            warnings.warn(
                "flash count not divisible by 3; remainder goes to the last set",
                stacklevel=2,
            )
    folds = []
    for k in range(3):
        train, test = [], []
        for char_epochs in by_char.values():
            size = len(char_epochs) // 3
            bounds = [0, size, 2 * size, len(char_epochs)]
            for s in range(3):
                part = char_epochs[bounds[s] : bounds[s + 1]]
                (test if s == k else train).extend(part)
        folds.append((train, test))
    return folds


def split_ascv(all_subjects: dict, test_subject: str):
    """Leave-one-subject-out split over a mapping subject_id -> epochs."""
    if test_subject not in all_subjects:
        raise KeyError(f"unknown subject {test_subject!r}")
    if len(all_subjects) < 2:
        raise ValueError("ASCV needs at least two subjects")
    train = [e for sid, epochs in all_subjects.items() if sid != test_subject for e in epochs]
    return train, list(all_subjects[test_subject])


def fit_gaussians(scored) -> GaussianParams:
    """Sample mean and unbiased sigma of attended / non-attended scores."""
    att = np.array([s for s, label in scored if label])
    non = np.array([s for s, label in scored if not label])
    if len(att) < 2 or len(non) < 2:
        raise ValueError("need at least two scores per label")
    sigma_a = float(np.std(att, ddof=1))
    sigma_n = float(np.std(non, ddof=1))
    if sigma_a <= 0 or sigma_n <= 0:
        raise ValueError("degenerate scores")
    return GaussianParams(float(np.mean(att)), sigma_a, float(np.mean(non)), sigma_n)


# ---------------------------------------------------------------------------
# Subject data files
# ---------------------------------------------------------------------------

@dataclass
class SubjectData:
    subject_id: str
    epochs: list = field(default_factory=list)  # EpochFeatures, raw files
    scored: list = field(default_factory=list)  # (score, label, char_index) rows


def write_subject_file(path, subject_id, rows, raw: bool = False):
    """Write a subject data file.

    Raw rows: (label, char_index, flash_index, group_id, 32x154 array).
    Scored rows: (label, char_index, flash_index, group_id, score).
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"subject,{subject_id},channels,{N_CHANNELS},samples_per_epoch,{N_SAMPLES}\n")
        for label, char_index, flash_index, group_id, payload in rows:
            head = f"{1 if label else 0},{char_index},{flash_index},{group_id}"
            if raw:
                flat = np.asarray(payload, dtype=float).reshape(-1)
                fh.write(head + "," + ",".join(f"{v:.6g}" for v in flat) + "\n")
            else:
                fh.write(head + f",{float(payload):.10g}\n")


def read_subject_file(path) -> SubjectData:
    """Read either subject file flavor; raw epochs are feature-extracted."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 2 or header[0] != "subject":
            raise ValueError(f"{path}: missing subject header")
        data = SubjectData(subject_id=header[1])
        for seq, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            label = parts[0] == "1"
            char_index, flash_index, group_id = (int(parts[1]), int(parts[2]), int(parts[3]))
            if len(parts) == 5:
                data.scored.append((float(parts[4]), label, char_index))
            elif len(parts) == 4 + N_CHANNELS * N_SAMPLES:
                epoch = np.array(parts[4:], dtype=float).reshape(N_CHANNELS, N_SAMPLES)
                data.epochs.append(
                    EpochFeatures(
                        extract_features(epoch),
                        label,
                        subject_id=data.subject_id,
                        sequence_index=flash_index,
                        char_index=char_index,
                        group_id=group_id,
                    )
                )
            else:
                raise ValueError(f"{path}: malformed epoch line with {len(parts)} fields")
    return data
