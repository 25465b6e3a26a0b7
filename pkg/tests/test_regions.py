import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxfield import regions as rg

from oracles import atom_measures, intersection_measure


def test_normalize_single_box():
    r = rg.normalize([((0, 1),)])
    assert len(r.boxes) == 1 and r.measure == 1.0


def test_normalize_overlapping_union_measure():
    r = rg.normalize([((0, 1),), ((0.5, 1.5),)])
    assert r.measure == 1.5
    assert all(rg.disjoint(rg.Region(1, (a,)), rg.Region(1, (b,)))
               for i, a in enumerate(r.boxes) for b in r.boxes[i + 1:])


def test_normalize_duplicate_is_idempotent():
    r = rg.normalize([((0, 1), (0, 1)), ((0, 1), (0, 1))])
    assert r.measure == 1.0


def test_measure_examples():
    assert rg.region(((0, 2), (0, 0.5))).measure == 1.0
    assert rg.Region(1).measure == 0.0
    assert rg.union(rg.interval(0, 1), rg.interval(2, 4)).measure == 3.0


def test_reversed_box_rejected():
    with pytest.raises(ValueError, match="exceeds"):
        rg.normalize([((1, 0),)])


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        rg.normalize([((0, float("inf")),)])


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        rg.normalize([((0, 1),), ((0, 1), (0, 1))])


def test_atoms_disjoint_sources():
    dec = rg.atoms([rg.interval(0, 1), rg.interval(1, 2)])
    assert dict(dec.table()) == {"10": 1.0, "01": 1.0}


def test_atoms_overlap():
    dec = rg.atoms([rg.interval(0, 1), rg.interval(0.5, 1.5)])
    assert dict(dec.table()) == {"10": 0.5, "11": 0.5, "01": 0.5}


def test_atoms_identical_sources():
    dec = rg.atoms([rg.interval(0, 1), rg.interval(0, 1)])
    assert dict(dec.table()) == {"11": 1.0}


def test_atom_guard():
    with pytest.raises(ValueError, match="atom guard"):
        rg.atoms([rg.interval(i, i + 1) for i in range(21)])


def test_transform_examples():
    r = rg.region(((0, 1), (0, 2)))
    moved = rg.transform(r, shift=(1, 0))
    assert moved.boxes[0].extents == ((1, 2), (0, 2)) and moved.measure == 2
    assert rg.transform(r, perm=(1, 0)).boxes[0].extents == ((0, 2), (0, 1))
    assert rg.transform(rg.interval(0, 1), signs=(-1,)).boxes[0].extents == ((-1, 0),)


def test_transform_rejects_non_permutation():
    with pytest.raises(ValueError):
        rg.transform(rg.region(((0, 1), (0, 1))), perm=(0, 0))


def test_split_axis_preserves_measure():
    r = rg.region(((0, 2), (0, 1)), ((3, 4), (0, 1)))
    below, above = rg.split_axis(r, 0, 1.5)
    assert below.measure == 1.5 and above.measure == 1.5


def test_product_region():
    p = rg.product((0, 2), rg.interval(1, 4))
    assert p.dim == 2 and p.measure == 6


boxes_1d = st.lists(
    st.tuples(st.integers(-8, 8), st.integers(1, 6)).map(lambda t: ((t[0] / 4, (t[0] + t[1]) / 4),)),
    min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(boxes_1d, min_size=1, max_size=4))
def test_atoms_match_inclusion_exclusion_1d(sources):
    regs = [rg.normalize(b) for b in sources]
    dec = rg.atoms(regs)
    ref = atom_measures(regs)
    got = {a.mask: a.measure for a in dec.atoms}
    for mask, m in ref.items():
        assert got.get(mask, 0.0) == pytest.approx(m, abs=1e-12)
    assert sum(got.values()) == pytest.approx(rg.union(*regs).measure, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_atoms_match_inclusion_exclusion_2d(seed):
    rng = np.random.default_rng(seed)
    regs = []
    for _ in range(3):
        k = int(rng.integers(1, 3))
        lo = np.round(rng.uniform(0, 3, (k, 2)), 2)
        hi = lo + np.round(rng.uniform(0.1, 2, (k, 2)), 2)
        regs.append(rg.normalize([tuple(zip(a, b)) for a, b in zip(lo, hi)]))
    got = {a.mask: a.measure for a in rg.atoms(regs).atoms}
    for mask, m in atom_measures(regs).items():
        assert got.get(mask, 0.0) == pytest.approx(m, abs=1e-9)
    assert intersection_measure(regs[:1]) == pytest.approx(regs[0].measure)
