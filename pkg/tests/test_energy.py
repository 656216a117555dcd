import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrestore import (ColorImage, DamageMask, DistortionTable, GreyObservation, GridGeometry, Labeling,
                       ModelParams, Neighborhood, Palette, Problem, Triviality, fidelity_terms,
                       nontriviality_check, per_label_boundary_length, total_energy,
                       unweighted_interface_length, weighted_perimeter)
from pcrestore.energy import grid_edges
from pcrestore.oracle import oracle_energy

from conftest import random_problem

E1 = np.array([1.0, 0.0, 0.0])


def test_two_pixel_interface():
    lab = Labeling(np.array([[0, 1]]))
    pal = Palette([[0, 0, 0], [1, 0, 0]])
    assert weighted_perimeter(lab, pal) == 1.0


def test_half_split():
    lab = Labeling(np.repeat([[0, 0, 1, 1]], 4, axis=0))
    pal = Palette([[0, 0, 0], [0.5, 0, 0]])
    assert weighted_perimeter(lab, pal) == 2.0


def test_checkerboard():
    lab = Labeling(np.array([[0, 1], [1, 0]]))
    pal = Palette([[0, 0, 0], [1, 0, 0]])
    assert weighted_perimeter(lab, pal) == 4.0


def test_inside_fidelity_example():
    geom = GridGeometry(2, 1)
    d = DamageMask(np.array([[False, True]]), geom)
    img = ColorImage(np.zeros((1, 2, 3)), geom)
    grey = GreyObservation(np.array([[np.nan, 0.2]]), geom)
    table = DistortionTable.identity(E1)
    pal = Palette([[0.0, 0, 0], [0.5, 0.3, 0.3]])
    lab = Labeling(np.array([[0, 1]]), geom)
    out, ins = fidelity_terms(lab, pal, img, d, grey, table, ModelParams(1, 1, 2))
    assert out == 0.0
    assert ins == pytest.approx(0.09, abs=1e-15)


def test_exact_labeling_gives_perimeter_only():
    pal = Palette([[0.1, 0.2, 0.3], [0.8, 0.1, 0.5]])
    lab = Labeling(np.array([[0, 0, 1], [0, 1, 1]]))
    img = ColorImage(pal.colors[lab.label])
    prob = Problem(img, DamageMask.empty(img.geometry), None, None, ModelParams(5, 1, 2))
    br = total_energy(lab, pal, prob)
    assert br.fidelity_outside_D == 0 and br.fidelity_inside_D == 0
    assert br.total == br.perimeter_term == weighted_perimeter(lab, pal)


def test_constant_labeling_has_no_perimeter():
    prob, pal = random_problem(3, H=4, W=4)
    br = total_energy(Labeling.constant(prob.geometry, 1), pal, prob)
    assert br.perimeter_term == 0.0
    assert br.total == br.fidelity_outside_D + br.fidelity_inside_D


def test_n8_weights():
    geom = GridGeometry(3, 3, 2.0, Neighborhood.N8)
    ed = grid_edges(geom)
    axis = (ed.src - ed.dst) % 3 == 0
    w = sorted(set(ed.weight.tolist()))
    assert w == pytest.approx([2.0 * math.pi / (8 * math.sqrt(2)), 2.0 * math.pi / 8])
    assert ed.src.size == 2 * 6 + 2 * 4
    assert not axis.all()


def _straight_loop_fidelity(lab, pal, prob):
    h2 = prob.geometry.pixel_area
    prm = prob.params
    out = ins = 0.0
    H, W = prob.geometry.shape
    for r in range(H):
        for c in range(W):
            a = pal.colors[lab.label[r, c]]
            if prob.mask.damaged[r, c]:
                ins += prm.mu * h2 * abs(float(prob.table(a @ prob.table.e)) - prob.grey.value[r, c]) ** prm.p
            else:
                out += prm.lam * h2 * math.sqrt(sum((a - prob.image.data[r, c]) ** 2)) ** prm.p
    return out, ins


@pytest.mark.parametrize("seed", range(20))
def test_fidelity_matches_straight_loop(seed):
    prob, pal = random_problem(seed, p=[1.0, 1.5, 2.0, 3.0][seed % 4], h=[1.0, 0.5][seed % 2])
    lab = Labeling(np.random.default_rng(seed).integers(0, 3, (3, 3)), prob.geometry)
    got = fidelity_terms(lab, pal, prob.image, prob.mask, prob.grey, prob.table, prob.params)
    want = _straight_loop_fidelity(lab, pal, prob)
    assert got == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_total_matches_oracle_4x4(seed):
    nb = Neighborhood.N8 if seed % 2 else Neighborhood.N4
    prob, pal = random_problem(seed, H=4, W=4, neighborhood=nb)
    lab = Labeling(np.random.default_rng(seed).integers(0, 3, (4, 4)), prob.geometry)
    assert total_energy(lab, pal, prob).total == pytest.approx(oracle_energy(lab, pal, prob), abs=1e-12)


def test_fidelity_requires_grey_on_damage():
    prob, pal = random_problem(0)
    with pytest.raises(ValueError):
        fidelity_terms(Labeling.constant(prob.geometry), pal, prob.image, prob.mask, None, prob.table, prob.params)


# properties

labelings = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


def _lab_pal(rng, H=5, W=6, k=4, nb=Neighborhood.N4):
    geom = GridGeometry(W, H, 1.0, nb)
    return Labeling(rng.integers(0, k, (H, W)), geom), Palette(rng.random((k, 3)))


@settings(max_examples=60, deadline=None)
@given(labelings, st.sampled_from([Neighborhood.N4, Neighborhood.N8]))
def test_structure_identity(rng, nb):
    lab, pal = _lab_pal(rng, nb=nb)
    total = sum(per_label_boundary_length(lab, i) for i in range(pal.k))
    if nb is Neighborhood.N4:
        assert unweighted_interface_length(lab) - 0.5 * total == 0
    else:
        assert unweighted_interface_length(lab) == pytest.approx(0.5 * total, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(labelings, st.sampled_from([0.5, 0.25, 2.0, 4.0]))
def test_homogeneity(rng, s):
    # powers of two keep the scaling exact in floating point
    lab, pal = _lab_pal(rng)
    assert weighted_perimeter(lab, Palette(pal.colors * s)) == s * weighted_perimeter(lab, pal)


@settings(max_examples=40, deadline=None)
@given(labelings)
def test_translation_invariance(rng):
    lab, pal = _lab_pal(rng)
    geom = lab.geometry
    f = rng.random((5, 6, 3)) * 0.5
    c = rng.random(3) * 0.4
    d = DamageMask.empty(geom)
    prm = ModelParams(1.3, 1, 2)
    pal = Palette(pal.colors * 0.5)
    base = fidelity_terms(lab, pal, ColorImage(f, geom), d, None, None, prm)[0]
    moved = fidelity_terms(lab, Palette(pal.colors + c), ColorImage(f + c, geom), d, None, None, prm)[0]
    assert moved == pytest.approx(base, rel=1e-12)
    assert weighted_perimeter(lab, Palette(pal.colors + c)) == pytest.approx(weighted_perimeter(lab, pal), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_permutation_equivariance(seed):
    prob, pal = random_problem(seed, H=4, W=5, k=4)
    rng = np.random.default_rng(seed)
    lab = Labeling(rng.integers(0, 4, (4, 5)), prob.geometry)
    perm = rng.permutation(4)
    # new label perm[i] carries old color i
    colors = np.empty_like(pal.colors)
    colors[perm] = pal.colors
    a = total_energy(lab, pal, prob)
    b = total_energy(Labeling(perm[lab.label], prob.geometry), Palette(colors), prob)
    for x, y in zip(a.to_dict().values(), b.to_dict().values()):
        assert x == pytest.approx(y, rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(labelings)
def test_distances_are_a_metric(rng):
    pal = Palette(rng.random((5, 3)))
    d = pal.distances()
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)
    for i in range(5):
        for j in range(5):
            for l in range(5):
                assert d[i, j] <= d[i, l] + d[l, j] + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_energy_nonnegative(seed):
    prob, pal = random_problem(seed, H=3, W=4)
    lab = Labeling(np.random.default_rng(seed).integers(0, 3, (3, 4)), prob.geometry)
    br = total_energy(lab, pal, prob)
    assert min(br.perimeter_term, br.fidelity_outside_D, br.fidelity_inside_D) >= 0
    assert br.total >= 0


# non-triviality

def _table(fn, lo=-100, hi=100, n=2001):
    return DistortionTable.from_function(fn, E1, lo, hi, n)


def test_abs_is_nontrivial():
    res = nontriviality_check(_table(np.abs))
    assert res.verdict is Triviality.NONTRIVIAL
    assert res.growth_exponent == pytest.approx(1.0, abs=0.1)


def test_square_is_trivial():
    res = nontriviality_check(_table(lambda t: t * t))
    assert res.verdict is Triviality.TRIVIAL
    assert res.growth_exponent == pytest.approx(2.0, abs=0.1)


def test_constant_is_nontrivial():
    res = nontriviality_check(_table(lambda t: np.full_like(t, 0.5)))
    assert res.verdict is Triviality.NONTRIVIAL
    assert res.growth_exponent == pytest.approx(0.0, abs=1e-9)


def test_short_table_is_inconclusive():
    res = nontriviality_check(DistortionTable(E1, [0, 1, 2], [0, 1, 4]))
    assert res.verdict is Triviality.INCONCLUSIVE
    assert res.tails_used == 0


def test_one_sided_table_uses_one_tail():
    res = nontriviality_check(_table(lambda t: t ** 2 + 1, lo=0, hi=50, n=200))
    assert res.tails_used == 1 and res.verdict is Triviality.TRIVIAL
