"""Flashboard layouts, virtual-to-physical mapping and scan scheduling.

The physical board is a fixed 6x6 grid: 26 letters, space, backspace, six
word-suggestion slots and two blank fillers.  Probability-ranked virtual
layouts (sequential or diagonal) never move physical cells; they only
regroup which six cells highlight together, so any static board can be
retrofitted with the optimized groupings.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .lm import ALPHABET, LETTERS, SPACE

SPACE_LABEL = "SP"
BACKSPACE_LABEL = "BS"
SLOT_LABELS = ("W0", "W1", "W2", "W3", "W4", "W5")
BLANK_LABELS = ("X0", "X1")

GRID = 6
N_CELLS = GRID * GRID
N_GROUPS = 2 * GRID

# Fill order for the nine non-ranked cells: suggestion slots, blanks, and
# backspace pinned to the lowest-rank position.
_FILLER_LABELS = SLOT_LABELS + BLANK_LABELS + (BACKSPACE_LABEL,)

_SYMBOL_RANK = {c: i for i, c in enumerate(ALPHABET)}


def symbol_to_label(sym: str) -> str:
    return SPACE_LABEL if sym == SPACE else sym


def label_to_symbol(label: str) -> str:
    return SPACE if label == SPACE_LABEL else label


@dataclass(frozen=True)
class Flashboard:
    """36 cell labels in row-major order plus up to six placed suggestions."""

    cells: tuple
    layout_kind: str
    suggestions: tuple = ()

    def __post_init__(self):
        if len(self.cells) != N_CELLS:
            raise ValueError("flashboard needs exactly 36 cells")
        if len(set(self.cells)) != N_CELLS:
            raise ValueError("duplicate cell contents")

    def position_of(self, label: str):
        i = self.cells.index(label)
        return divmod(i, GRID)

    def label_at(self, row: int, col: int) -> str:
        return self.cells[row * GRID + col]

    def row_labels(self, row: int):
        return self.cells[row * GRID : (row + 1) * GRID]

    def col_labels(self, col: int):
        return self.cells[col::GRID]

    def active_labels(self):
        """Labels a selection may land on: letters, SP, BS, filled slots."""
        active = [c for c in LETTERS] + [SPACE_LABEL, BACKSPACE_LABEL]
        active += [SLOT_LABELS[i] for i in range(len(self.suggestions))]
        return tuple(active)

    def dump(self) -> str:
        """Text grid, 6 lines of 6 space-separated labels (golden files)."""
        return "\n".join(
            " ".join(self.row_labels(r)) for r in range(GRID)
        )


@dataclass(frozen=True)
class HighlightGroup:
    id: int
    kind: str  # "row" or "column" of the virtual layout
    labels: frozenset
    positions: frozenset


def alphabetical_board() -> Flashboard:
    cells = tuple(LETTERS) + (SPACE_LABEL,) + _FILLER_LABELS[:-1] + (BACKSPACE_LABEL,)
    return Flashboard(cells, "alphabetical")


def _ranked_symbols(dist: dict):
    missing = [c for c in ALPHABET if c not in dist]
    if missing:
        raise ValueError(f"distribution missing symbols: {missing!r}")
    return sorted(ALPHABET, key=lambda c: (-dist[c], _SYMBOL_RANK[c]))


def layout_sequential(dist: dict) -> Flashboard:
    """Row-major fill in descending probability, ties alphabetical.

    The 27 ranked symbols take the first 27 cells; suggestion slots,
    blanks and finally backspace fill the lowest-rank positions.
    """
    ranked = [symbol_to_label(c) for c in _ranked_symbols(dist)]
    cells = tuple(ranked) + _FILLER_LABELS
    return Flashboard(cells, "sequential")


def layout_diagonal(dist: dict) -> Flashboard:
    """Fill generalized diagonals D_k = {(i, (i+k) mod 6)} by rank.

    The six most probable symbols land on the main diagonal, the next six
    on the first wrapped diagonal, and so on; cells of one diagonal sit in
    pairwise distinct rows and columns, so same-context symbols never
    flash together.
    """
    ranked = [symbol_to_label(c) for c in _ranked_symbols(dist)]
    ordered = list(ranked) + list(_FILLER_LABELS)
    cells = [None] * N_CELLS
    for rank, label in enumerate(ordered):
        k, i = divmod(rank, GRID)
        cells[i * GRID + (i + k) % GRID] = label
    return Flashboard(tuple(cells), "diagonal")


def map_virtual(virtual: Flashboard, physical: Flashboard):
    """Overlay a virtual layout onto a physical board.

    Returns the content bijection (label -> physical position) and the 12
    highlight groups: each virtual row/column becomes the set of physical
    cells holding the same contents.  Group ids 0-5 are virtual rows,
    6-11 virtual columns.
    """
    if set(virtual.cells) != set(physical.cells):
        raise ValueError("virtual and physical boards hold different contents")
    mapping = {label: physical.position_of(label) for label in virtual.cells}
    groups = []
    for r in range(GRID):
        labels = frozenset(virtual.row_labels(r))
        groups.append(
            HighlightGroup(r, "row", labels, frozenset(mapping[l] for l in labels))
        )
    for c in range(GRID):
        labels = frozenset(virtual.col_labels(c))
        groups.append(
            HighlightGroup(
                GRID + c, "column", labels, frozenset(mapping[l] for l in labels)
            )
        )
    return mapping, groups


@dataclass(frozen=True)
class ScanSchedule:
    policy: str  # "random" | "deterministic" | "weighted"
    rng_seed: int | None = None


def schedule_round(schedule: ScanSchedule, groups, posterior, rng) -> list:
    """Order the 12 groups for one scan round.

    random: uniform permutation from rng.  deterministic: fixed id order.
    weighted: descending total posterior mass of the group members, ties
    by id, recomputed from the posterior passed in.
    """
    ids = [g.id for g in groups]
    if schedule.policy == "deterministic":
        return sorted(ids)
    if schedule.policy == "random":
        return [ids[i] for i in rng.permutation(len(ids))]
    if schedule.policy == "weighted":
        mass = {
            g.id: sum(posterior.get(label, 0.0) for label in g.labels)
            for g in groups
        }
        return sorted(ids, key=lambda i: (-mass[i], i))
    raise ValueError(f"unknown scan policy {schedule.policy!r}")


def place_suggestions(board: Flashboard, suggestions) -> Flashboard:
    """Label suggestion slots 0..k-1 with words; empty slots stay inert."""
    words = tuple(suggestions)
    if len(words) > len(SLOT_LABELS):
        raise ValueError("at most six suggestions fit on the board")
    if len(set(words)) != len(words):
        raise ValueError("suggestions must be distinct")
    return replace(board, suggestions=words)
