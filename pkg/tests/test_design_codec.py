import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fss_bpso import design_codec as dc
from fss_bpso.errors import SymmetryViolation

octants = st.lists(st.integers(0, 1), min_size=45, max_size=45).map(lambda b: np.array(b, dtype=np.uint8))


def brute_force_orbits():
    """Orbits of the 18x18 grid under the 8 dihedral maps, by direct enumeration."""
    n = dc.GRID_SIZE
    maps = [
        lambda i, j: (i, j), lambda i, j: (j, i),
        lambda i, j: (n - 1 - i, j), lambda i, j: (i, n - 1 - j),
        lambda i, j: (n - 1 - i, n - 1 - j), lambda i, j: (j, n - 1 - i),
        lambda i, j: (n - 1 - j, i), lambda i, j: (n - 1 - j, n - 1 - i),
    ]
    seen, orbits = set(), []
    for i in range(n):
        for j in range(n):
            if (i, j) in seen:
                continue
            orbit = {m(i, j) for m in maps}
            seen |= orbit
            orbits.append(orbit)
    return orbits


def test_orbit_index_matches_brute_force():
    orbits = brute_force_orbits()
    assert len(orbits) == 45
    assert sorted(len(o) for o in orbits).count(4) == 9
    assert sorted(len(o) for o in orbits).count(8) == 36
    for orbit in orbits:
        assert len({int(dc.ORBIT_INDEX[c]) for c in orbit}) == 1


def test_representatives_are_row_major_upper_triangle():
    reps = [tuple(r) for r in dc.REPRESENTATIVES]
    assert reps[0] == (0, 0) and reps[1] == (0, 1) and reps[9] == (1, 1) and reps[-1] == (8, 8)
    assert all(r <= c < dc.HALF for r, c in reps)


def test_zero_and_one_designs():
    assert not dc.expand_octant(np.zeros(45, np.uint8)).any()
    assert dc.expand_octant(np.ones(45, np.uint8)).all()
    assert dc.fold_grid(np.ones((18, 18), np.uint8)).all()


@pytest.mark.parametrize("bit", range(45))
def test_single_bit_sets_one_orbit(bit):
    o = np.zeros(45, np.uint8)
    o[bit] = 1
    r, c = dc.REPRESENTATIVES[bit]
    assert dc.expand_octant(o).sum() == (4 if r == c else 8)


@given(octants)
def test_round_trip(o):
    assert np.array_equal(dc.fold_grid(dc.expand_octant(o)), o)


@given(octants)
@settings(max_examples=50)
def test_expanded_grid_is_dihedral_invariant(o):
    g = dc.expand_octant(o)
    for img in dc.dihedral_images(g):
        assert np.array_equal(img, g)


def test_batch_expand_matches_single(rng):
    batch = dc.random_design(rng, size=5)
    grids = dc.expand_octant(batch)
    assert grids.shape == (5, 18, 18)
    for o, g in zip(batch, grids):
        assert np.array_equal(dc.expand_octant(o), g)


def test_flipped_cell_violates_symmetry(rng):
    g = dc.expand_octant(dc.random_design(rng)).copy()
    g[3, 5] ^= 1
    with pytest.raises(SymmetryViolation):
        dc.fold_grid(g)


def test_fold_rejects_wrong_shape():
    with pytest.raises(ValueError):
        dc.fold_grid(np.zeros((9, 9)))


def test_random_design_is_seeded():
    a = dc.random_design(np.random.default_rng(7), size=3)
    b = dc.random_design(np.random.default_rng(7), size=3)
    c = dc.random_design(np.random.default_rng(8), size=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.dtype == np.uint8 and set(np.unique(a)) <= {0, 1}


def test_mean_fill_fraction_of_random_designs():
    designs = dc.random_design(np.random.default_rng(0), size=10_000)
    assert 0.45 <= dc.fill_fraction(designs).mean() <= 0.55


def test_fill_fraction_agrees_with_features(rng):
    o = dc.random_design(rng)
    assert dc.fill_fraction(o) == pytest.approx(dc.features(dc.expand_octant(o)).fill_fraction)


def test_features_of_uniform_grids():
    f0 = dc.features(np.zeros((18, 18), np.uint8))
    assert (f0.fill_fraction, f0.connectivity, f0.roughness) == (0.0, 0.0, 0.0)
    f1 = dc.features(np.ones((18, 18), np.uint8))
    assert (f1.fill_fraction, f1.connectivity, f1.roughness) == (1.0, 1.0, 0.0)


def test_checkerboard_features():
    i, j = np.indices((18, 18))
    f = dc.features(((i + j) % 2).astype(np.uint8))
    assert f.fill_fraction == 0.5
    assert f.roughness == 1.0
    # no two metal cells share an edge
    assert f.connectivity == pytest.approx(1 / 162)


def test_connectivity_counts_largest_component():
    g = np.zeros((18, 18), np.uint8)
    g[0, 0:3] = 1  # component of 3
    g[5, 5] = 1    # isolated cell
    assert dc.features(g).connectivity == pytest.approx(3 / 4)


@given(octants)
@settings(max_examples=50)
def test_features_lie_in_unit_interval(o):
    f = dc.features(dc.expand_octant(o))
    for v in (f.fill_fraction, f.connectivity, f.roughness):
        assert 0.0 <= v <= 1.0


def test_bitstring_round_trip(rng):
    o = dc.random_design(rng)
    s = dc.to_bitstring(o)
    assert len(s) == 45 and set(s) <= {"0", "1"}
    assert np.array_equal(dc.from_bitstring(s), o)


@pytest.mark.parametrize("bad", ["0" * 44, "2" * 45, [0] * 46])
def test_as_octant_rejects_invalid(bad):
    with pytest.raises(ValueError):
        dc.as_octant(bad)


def test_hamming():
    a = np.zeros(45, np.uint8)
    b = a.copy()
    b[:7] = 1
    assert dc.hamming(a, b) == 7
    assert list(dc.hamming(np.stack([a, b]), a)) == [0, 7]
