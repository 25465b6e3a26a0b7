"""Exact set algebra for finite unions of half-open axis-aligned boxes.

Everything downstream only ever needs Lebesgue measures of regions and of the
cells ("atoms") cut out by a list of regions, so regions are stored as a list
of pairwise-disjoint half-open boxes and every operation works by sweeping the
coordinate hyperplanes of the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_SOURCES = 20


@dataclass(frozen=True)
class Box:
    """Half-open box ``[a_1, b_1) x ... x [a_d, b_d)``."""

    extents: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        if not ext:
            raise ValueError("a box needs at least one axis")
        for axis, (a, b) in enumerate(ext):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"axis {axis}: non-finite extent [{a}, {b})")
            if a > b:
                raise ValueError(f"axis {axis}: lower end {a} exceeds upper end {b}")
        object.__setattr__(self, "extents", ext)

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def measure(self) -> float:
        return math.prod(b - a for a, b in self.extents)

    def is_empty(self) -> bool:
        return any(a == b for a, b in self.extents)

    def intersect(self, other: Box) -> Box:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        ext = []
        for (a, b), (c, d) in zip(self.extents, other.extents):
            lo, hi = max(a, c), min(b, d)
            ext.append((lo, max(lo, hi)))
        return Box(tuple(ext))

    def contains(self, point: Sequence[float]) -> bool:
        return all(a <= x < b for (a, b), x in zip(self.extents, point))


@dataclass(frozen=True)
class Region:
    """A finite disjoint union of nonempty half-open boxes.

    Build regions with :func:`region` or :func:`normalize`; the raw
    constructor trusts that ``boxes`` are already disjoint.
    """

    dim: int
    boxes: tuple[Box, ...] = ()
    name: str | None = field(default=None, compare=False)

    @property
    def measure(self) -> float:
        return measure(self)

    def key(self) -> tuple:
        """Geometry key; equal keys mean equal point sets."""
        return (self.dim, tuple(sorted(b.extents for b in self.boxes)))

    def contains(self, point: Sequence[float]) -> bool:
        return any(b.contains(point) for b in self.boxes)

    def is_empty(self) -> bool:
        return not self.boxes

    def bounding_box(self) -> Box:
        if not self.boxes:
            raise ValueError("empty region has no bounding box")
        lo = [min(b.extents[k][0] for b in self.boxes) for k in range(self.dim)]
        hi = [max(b.extents[k][1] for b in self.boxes) for k in range(self.dim)]
        return Box(tuple(zip(lo, hi)))

    def named(self, name: str | None) -> Region:
        return Region(self.dim, self.boxes, name)

    def __repr__(self):
        label = f"{self.name}: " if self.name else ""
        parts = " u ".join(
            "x".join(f"[{a:g},{b:g})" for a, b in box.extents) for box in self.boxes
        )
        return f"Region({label}{parts or 'empty'})"


@dataclass(frozen=True)
class Atom:
    mask: tuple[int, ...]
    measure: float
    geometry: Region

    @property
    def bits(self) -> int:
        return sum(k << i for i, k in enumerate(self.mask))


@dataclass(frozen=True)
class AtomDecomposition:
    """Nonempty cells ``B(k)`` of a list of source regions, sorted by mask."""

    sources: tuple[Region, ...]
    atoms: tuple[Atom, ...]

    def table(self) -> list[tuple[str, float]]:
        return [("".join(map(str, a.mask)), a.measure) for a in self.atoms]

    def members(self, i: int) -> list[int]:
        """Indices of the atoms lying inside source ``i``."""
        return [k for k, a in enumerate(self.atoms) if a.mask[i]]


def _as_box(b) -> Box:
    return b if isinstance(b, Box) else Box(tuple(tuple(e) for e in b))


def _sweep(box_groups: Sequence[Sequence[Box]], dim: int):
    """Elementary-cell grid for the given groups of boxes.

    Returns the per-axis breakpoints and an integer array over the cell grid
    whose bit ``g`` is set when the cell lies in group ``g``.
    """
    breaks = []
    for k in range(dim):
        coords = {c for group in box_groups for b in group for c in b.extents[k]}
        breaks.append(np.array(sorted(coords), dtype=float))
    shape = tuple(max(len(bp) - 1, 0) for bp in breaks)
    masks = np.zeros(shape, dtype=np.int64)
    for g, group in enumerate(box_groups):
        for b in group:
            sl = tuple(
                slice(int(np.searchsorted(bp, a)), int(np.searchsorted(bp, c)))
                for bp, (a, c) in zip(breaks, b.extents)
            )
            masks[sl] |= np.int64(1) << g
    return breaks, masks


def _cells_to_boxes(breaks, selected: np.ndarray) -> tuple[Box, ...]:
    """Merge selected grid cells into disjoint boxes (runs along the last axis)."""
    if selected.size == 0 or not selected.any():
        return ()
    boxes = []
    last = selected.shape[-1]
    lead_shape = selected.shape[:-1]
    for lead in np.ndindex(*lead_shape):
        row = selected[lead]
        if not row.any():
            continue
        head = [(float(breaks[k][i]), float(breaks[k][i + 1])) for k, i in enumerate(lead)]
        j = 0
        while j < last:
            if not row[j]:
                j += 1
                continue
            start = j
            while j < last and row[j]:
                j += 1
            tail = (float(breaks[-1][start]), float(breaks[-1][j]))
            boxes.append(Box(tuple(head) + (tail,)))
    return tuple(boxes)


def _cell_volumes(breaks) -> np.ndarray:
    vol = np.ones(())
    for bp in breaks:
        vol = np.multiply.outer(vol, np.diff(bp))
    return vol


def normalize(boxes: Iterable, name: str | None = None, dim: int | None = None) -> Region:
    """Disjoint decomposition of the union of ``boxes``."""
    boxes = [_as_box(b) for b in boxes]
    dims = {b.dim for b in boxes}
    if dim is not None:
        dims.add(dim)
    if len(dims) > 1:
        raise ValueError(f"dimension mismatch among boxes: {sorted(dims)}")
    if not dims:
        raise ValueError("cannot infer the dimension of an empty box list")
    d = dims.pop()
    boxes = [b for b in boxes if not b.is_empty()]
    if not boxes:
        return Region(d, (), name)
    breaks, masks = _sweep([boxes], d)
    return Region(d, _cells_to_boxes(breaks, masks != 0), name)


def region(*boxes, name: str | None = None) -> Region:
    """Convenience constructor: ``region([(0, 1), (0, 2)], name="A")``."""
    return normalize(boxes, name=name)


def interval(a: float, b: float, name: str | None = None) -> Region:
    return normalize([((a, b),)], name=name)


def measure(r: Region) -> float:
    return math.fsum(b.measure for b in r.boxes)


def union(*regions: Region, name: str | None = None) -> Region:
    dims = {r.dim for r in regions}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    return normalize([b for r in regions for b in r.boxes], name=name, dim=dims.pop())


def intersect(r: Region, s: Region) -> Region:
    if r.dim != s.dim:
        raise ValueError(f"dimension mismatch: {r.dim} vs {s.dim}")
    parts = [a.intersect(b) for a in r.boxes for b in s.boxes]
    return normalize(parts, dim=r.dim)


def disjoint(r: Region, s: Region) -> bool:
    return all(a.intersect(b).is_empty() for a in r.boxes for b in s.boxes)


def atoms(regions: Sequence[Region], max_sources: int = MAX_SOURCES) -> AtomDecomposition:
    """Nonempty atoms ``B(k) = B_1 ∩ ... ∩ B_n`` with at least one bit set.

    Complements are taken inside the bounding box of the union, which is
    harmless because every retained atom lies inside some source.
    """
    regions = tuple(regions)
    n = len(regions)
    if n == 0:
        raise ValueError("need at least one source region")
    if n > max_sources:
        raise ValueError(f"{n} source regions exceed the atom guard of {max_sources}")
    dims = {r.dim for r in regions}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch among regions: {sorted(dims)}")
    d = dims.pop()
    breaks, masks = _sweep([r.boxes for r in regions], d)
    if masks.size == 0:
        return AtomDecomposition(regions, ())
    vol = _cell_volumes(breaks)
    out = []
    for bits in np.unique(masks):
        bits = int(bits)
        if bits == 0:
            continue
        sel = masks == bits
        m = math.fsum(vol[sel].tolist())
        if m <= 0.0:
            continue
        mask = tuple((bits >> i) & 1 for i in range(n))
        out.append(Atom(mask, m, Region(d, _cells_to_boxes(breaks, sel))))
    out.sort(key=lambda a: a.bits)
    return AtomDecomposition(regions, tuple(out))


def transform(r: Region, shift: Sequence[float] | None = None,
              perm: Sequence[int] | None = None,
              signs: Sequence[int] | None = None) -> Region:
    """Image of ``r`` under ``x -> O x + shift`` with ``O`` a signed permutation.

    Output axis ``i`` is ``signs[i] * x[perm[i]] + shift[i]``. Reflected boxes
    are re-closed on the left; the endpoint swap has measure zero.
    """
    d = r.dim
    shift = [0.0] * d if shift is None else [float(s) for s in shift]
    perm = list(range(d)) if perm is None else [int(p) for p in perm]
    signs = [1] * d if signs is None else [int(s) for s in signs]
    if len(shift) != d or len(perm) != d or len(signs) != d:
        raise ValueError(f"transform parameters must all have length {d}")
    if sorted(perm) != list(range(d)):
        raise ValueError(f"{perm} is not a permutation of the axes")
    if any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be +1 or -1")
    out = []
    for b in r.boxes:
        ext = []
        for i in range(d):
            a, c = b.extents[perm[i]]
            if signs[i] < 0:
                a, c = -c, -a
            ext.append((a + shift[i], c + shift[i]))
        out.append(Box(tuple(ext)))
    return Region(d, tuple(out), r.name)


def split_axis(r: Region, axis: int, at: float) -> tuple[Region, Region]:
    """Split ``r`` into the parts with coordinate ``axis`` below and at/above ``at``."""
    below, above = [], []
    for b in r.boxes:
        a, c = b.extents[axis]
        if c <= at:
            below.append(b)
        elif a >= at:
            above.append(b)
        else:
            ext = list(b.extents)
            ext[axis] = (a, at)
            below.append(Box(tuple(ext)))
            ext[axis] = (at, c)
            above.append(Box(tuple(ext)))
    return Region(r.dim, tuple(below), r.name), Region(r.dim, tuple(above), r.name)


def product(time: tuple[float, float], space: Region | None, name: str | None = None) -> Region:
    """Temporal-spatial region ``[t0, t1) x space`` (time is axis 0)."""
    t0, t1 = time
    if space is None:
        return Region(1, (Box(((t0, t1),)),) if t1 > t0 else (), name)
    boxes = tuple(Box(((t0, t1),) + b.extents) for b in space.boxes) if t1 > t0 else ()
    return Region(space.dim + 1, boxes, name)
