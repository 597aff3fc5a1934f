"""Frequency-slot occupancy, candidate blocks and fragmentation metrics.

Occupancy is a ``(links, slots)`` integer array where ``FREE`` marks an
unused slot and any non-negative value is the owning request id. Slots are
0-based internally; :meth:`SpectrumBlock.label` prints them 1-based.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .topology import NetworkTopology, RoutePath, neighbor_links

FREE = -1


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class SpectrumBlock:
    start: int
    size: int

    @property
    def stop(self) -> int:
        return self.start + self.size

    @property
    def center(self) -> float:
        return self.start + self.size / 2

    def label(self) -> str:
        return "{" + ", ".join(str(s + 1) for s in range(self.start, self.stop)) + "}"


@dataclass(frozen=True)
class Assignment:
    """A live lightpath: request id, the links it crosses, and its slot block."""

    request_id: int
    links: tuple[str, ...]
    start: int
    size: int


@dataclass(frozen=True)
class Violation:
    constraint: int
    request_id: Optional[int]
    link: Optional[str]
    message: str


class SpectrumGrid:
    def __init__(self, link_ids: Sequence[str], slot_count: int):
        if slot_count < 1:
            raise ValueError("slot_count must be positive")
        self.link_ids = tuple(link_ids)
        self.slot_count = slot_count
        self.row = {lid: i for i, lid in enumerate(self.link_ids)}
        self.occ = np.full((len(self.link_ids), slot_count), FREE, dtype=np.int64)
        self.assignments: dict[int, Assignment] = {}

    @classmethod
    def for_topology(cls, topo: NetworkTopology, slot_count: int) -> "SpectrumGrid":
        return cls(topo.link_ids, slot_count)

    def copy(self) -> "SpectrumGrid":
        new = SpectrumGrid(self.link_ids, self.slot_count)
        new.occ = self.occ.copy()
        new.assignments = dict(self.assignments)
        return new

    def rows(self, path: RoutePath) -> list[int]:
        return [self.row[lid] for lid in path.links]

    def free_mask(self, link_id: str) -> np.ndarray:
        return self.occ[self.row[link_id]] == FREE

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occ != FREE))

    def __eq__(self, other):
        if not isinstance(other, SpectrumGrid):
            return NotImplemented
        return (
            self.link_ids == other.link_ids
            and np.array_equal(self.occ, other.occ)
            and self.assignments == other.assignments
        )

    # -- snapshot text ------------------------------------------------------

    def to_text(self) -> str:
        width = max(len(lid) for lid in self.link_ids)
        lines = []
        for lid, row in zip(self.link_ids, self.occ):
            cells = " ".join("." if v == FREE else str(v) for v in row)
            lines.append(f"{lid:<{width}} {cells}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, link_ids: Optional[Sequence[str]] = None) -> "SpectrumGrid":
        """Parse a snapshot; ``link_ids`` (e.g. a topology's) fixes the row order and
        lets rows that are absent from the snapshot start empty."""
        parsed = {}
        width = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            lid, *cells = line.split()
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise SpectrumError(f"row {lid!r} has {len(cells)} slots, expected {width}")
            parsed[lid] = [FREE if c == "." else int(c) for c in cells]
        if width is None:
            raise SpectrumError("empty grid snapshot")
        order = list(link_ids) if link_ids is not None else list(parsed)
        unknown = set(parsed) - set(order)
        if unknown:
            raise SpectrumError(f"snapshot rows not in topology: {sorted(unknown)}")
        grid = cls(order, width)
        for lid, values in parsed.items():
            grid.occ[grid.row[lid]] = values
        return grid


# -- candidate search and fragmentation metrics -----------------------------


def _window_sums(mask: np.ndarray, size: int) -> np.ndarray:
    """Sum of ``mask`` over every length-``size`` window along the last axis."""
    csum = np.concatenate(
        [np.zeros(mask.shape[:-1] + (1,), dtype=np.int64), np.cumsum(mask, axis=-1, dtype=np.int64)],
        axis=-1,
    )
    return csum[..., size:] - csum[..., :-size]


def candidate_starts(grid: SpectrumGrid, rows: Sequence[int], size: int) -> np.ndarray:
    if size < 1:
        raise ValueError("block size must be >= 1")
    if size > grid.slot_count:
        return np.empty(0, dtype=np.int64)
    common_free = (grid.occ[list(rows)] == FREE).all(axis=0)
    return np.flatnonzero(_window_sums(common_free, size) == size)


def free_contiguous_blocks(grid: SpectrumGrid, path: RoutePath, size: int) -> list[SpectrumBlock]:
    """All blocks of ``size`` consecutive slots free on every link of ``path``."""
    return [SpectrumBlock(int(s), size) for s in candidate_starts(grid, grid.rows(path), size)]


def cuts_for_starts(grid: SpectrumGrid, rows: Sequence[int], starts: np.ndarray, size: int) -> np.ndarray:
    """Per start, the number of path links whose free run the block would split in two."""
    free = grid.occ[list(rows)] == FREE
    n = grid.slot_count
    left = starts - 1
    right = starts + size
    has_left = left >= 0
    has_right = right < n
    left_free = np.zeros((len(rows), len(starts)), dtype=bool)
    right_free = np.zeros_like(left_free)
    left_free[:, has_left] = free[:, left[has_left]]
    right_free[:, has_right] = free[:, right[has_right]]
    return np.count_nonzero(left_free & right_free, axis=0)


def misalignment_for_starts(
    grid: SpectrumGrid, neighbor_rows: Sequence[int], starts: np.ndarray, size: int
) -> np.ndarray:
    """Per start, sum over neighbor pairs of (+1 free / -1 occupied) across the block's slots.

    ``neighbor_rows`` lists the neighbor-link row once per pair it appears in.
    """
    if len(neighbor_rows) == 0:
        return np.zeros(len(starts), dtype=np.int64)
    free = (grid.occ[list(neighbor_rows)] == FREE)
    free_in_window = _window_sums(free, size)[:, starts]
    return (2 * free_in_window - size).sum(axis=0)


def count_cuts(grid: SpectrumGrid, path: RoutePath, block: SpectrumBlock) -> int:
    n_c = 0
    for lid in path.links:
        free = grid.free_mask(lid)
        left = block.start > 0 and free[block.start - 1]
        right = block.stop < grid.slot_count and free[block.stop]
        n_c += bool(left and right)
    return n_c


def misalignment_delta(
    grid: SpectrumGrid, topo: NetworkTopology, path: RoutePath, block: SpectrumBlock
) -> int:
    n_m = 0
    for _, neighbor in neighbor_links(topo, path):
        free = grid.free_mask(neighbor)[block.start : block.stop]
        n_m += int(np.count_nonzero(free)) - int(np.count_nonzero(~free))
    return n_m


# -- mutation ---------------------------------------------------------------


def allocate(grid: SpectrumGrid, path: RoutePath, block: SpectrumBlock, request_id: int) -> SpectrumGrid:
    """Mark ``block`` on every link of ``path`` as owned by ``request_id`` (in place)."""
    if request_id < 0:
        raise ValueError("request ids must be non-negative")
    if request_id in grid.assignments:
        raise SpectrumError(f"request {request_id} is already allocated")
    if block.start < 0 or block.stop > grid.slot_count or block.size < 1:
        raise SpectrumError(f"block {block} outside the {grid.slot_count}-slot band")
    rows = grid.rows(path)
    window = grid.occ[rows, block.start : block.stop]
    if (window != FREE).any():
        raise SpectrumError(f"slot collision allocating {block.label()} for request {request_id}")
    grid.occ[rows, block.start : block.stop] = request_id
    grid.assignments[request_id] = Assignment(request_id, path.links, block.start, block.size)
    return grid


def release(grid: SpectrumGrid, request_id: int) -> SpectrumGrid:
    try:
        assignment = grid.assignments.pop(request_id)
    except KeyError:
        raise SpectrumError(f"unknown request id {request_id}") from None
    rows = [grid.row[lid] for lid in assignment.links]
    grid.occ[rows, assignment.start : assignment.start + assignment.size] = FREE
    return grid


# -- constraint audit -------------------------------------------------------


def validate_assignment(
    grid: SpectrumGrid, assignments: Optional[Iterable[Assignment]] = None
) -> list[Violation]:
    """Check band edges (1-2), per-link non-overlap (3-4) and slot continuity (5).

    Returns every violation found; an empty list means the state is sound.
    """
    live = list(grid.assignments.values() if assignments is None else assignments)
    violations = []
    n_fs = grid.slot_count

    for a in live:
        if a.start < 0:
            violations.append(Violation(1, a.request_id, None, f"block starts at {a.start} < 0"))
        if a.start + a.size > n_fs:
            violations.append(
                Violation(2, a.request_id, None, f"block ends at {a.start + a.size} > {n_fs}")
            )

    per_link = defaultdict(list)
    for a in live:
        for lid in a.links:
            per_link[lid].append(a)
    for lid, items in per_link.items():
        items.sort(key=lambda a: (a.start, a.request_id))
        for prev, cur in zip(items, items[1:]):
            if cur.start < prev.start + prev.size:
                violations.append(
                    Violation(
                        3, cur.request_id, lid,
                        f"requests {prev.request_id} and {cur.request_id} overlap on {lid}",
                    )
                )

    for a in live:
        expected = set(range(a.start, a.start + a.size))
        for lid in a.links:
            row = grid.row.get(lid)
            if row is None:
                violations.append(Violation(5, a.request_id, lid, f"unknown link {lid}"))
                continue
            held = set(np.flatnonzero(grid.occ[row] == a.request_id).tolist())
            if held != expected:
                violations.append(
                    Violation(
                        5, a.request_id, lid,
                        f"request {a.request_id} holds slots {sorted(held)} on {lid}, "
                        f"expected {sorted(expected)}",
                    )
                )
    return violations
