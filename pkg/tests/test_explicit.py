import numpy as np
import pytest

from smforge.design import optimize_design
from smforge.explicit import (MappingError, MappingSet, RegionOfInterest, extract_mapping,
                              interpolate_output_mapping, optimize_surrogate, star_base_set,
                              surrogate_eval, surrogate_response, validate_surrogate)
from smforge.models import CountingModel
from smforge.optimize import OptimizerSettings
from smforge.response import ChannelSelector, make_grid
from smforge.specs import DesignSpec, SpecBand, objective, filter_spec

C_STAR = np.array([0.005, 0.02, -0.01, 0.015, 0.01, -0.02])
S12 = ChannelSelector(("S12",), "db")
EXTRACT = OptimizerSettings(max_iterations=200, convergence_tol=1e-12)


def affine_fine(coarse, scale=0.9, offset=0.05, shift=C_STAR):
    def fn(x):
        r = coarse(np.asarray(x) + shift)
        return S12.apply(r, scale * S12.values(r) + offset)
    return fn


def test_star_counts(region):
    assert len(star_base_set(region)) == 13
    assert len(star_base_set(region, include_corners=True)) == 77
    small = RegionOfInterest.around([1.0, 2.0], [0.1, 0.2])
    assert len(star_base_set(small, True)) == 9


def test_star_one_axis():
    pts = star_base_set(RegionOfInterest.around([5.0], [1.0])).points
    assert pts.ravel().tolist() == [5.0, 4.0, 6.0]


def test_star_points_lie_in_region(region):
    bs = star_base_set(region, True)
    assert all(region.contains(p) for p in bs.points)
    assert bs.kinds[:3] == ("reference", "star-", "star+")


def test_region_rejects_bad_boxes():
    with pytest.raises(ValueError):
        RegionOfInterest([1.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValueError):
        RegionOfInterest([1.0], [2.0], [3.0])


def test_identity_surrogate_matches_coarse(coarse, region, grid):
    ident = MappingSet.identity(6, grid)
    for x in region.random_points(10, 11):
        assert np.max(np.abs(surrogate_eval(x, ident, coarse) - S12.values(coarse(x)))) <= 1e-15


def test_output_scaling_and_offset(coarse, region, grid):
    x = region.reference
    y = S12.values(coarse(x))
    half = MappingSet(0.5 * np.ones(grid.m), np.eye(6), np.zeros(6), np.zeros(grid.m), grid)
    plus = MappingSet(np.ones(grid.m), np.eye(6), np.zeros(6), np.ones(grid.m), grid)
    assert np.array_equal(surrogate_eval(x, half, coarse), 0.5 * y)
    assert np.array_equal(surrogate_eval(x, plus, coarse), y + 1)


def test_invalid_mapped_point_carries_both(coarse, region, grid):
    bad = MappingSet(np.ones(grid.m), np.eye(6), np.full(6, -5.0), np.zeros(grid.m), grid)
    with pytest.raises(MappingError) as ei:
        surrogate_eval(region.reference, bad, coarse)
    assert np.array_equal(ei.value.x, region.reference)
    assert np.array_equal(ei.value.mapped, region.reference - 5.0)


def test_mapping_json_round_trip(grid):
    rng = np.random.default_rng(1)
    m = MappingSet(rng.normal(size=grid.m), rng.normal(size=(6, 6)), rng.normal(size=6),
                   rng.normal(size=grid.m), grid, ChannelSelector(("S11", "S12"), "ri"))
    back = MappingSet.from_dict(m.to_dict())
    assert np.array_equal(back.pack(), m.pack()) and back.grid == m.grid
    assert back.channel == m.channel


def test_self_match_returns_identity(coarse, region):
    base = star_base_set(region)
    fine = [coarse(x) for x in base.points]
    mapping, rep = extract_mapping(base, fine, coarse, channel=S12, settings=EXTRACT)
    assert np.max(np.abs(mapping.B - np.eye(6))) <= 1e-3
    assert np.max(rep.base_after) <= 1e-8


def test_input_shift_recovered(coarse, region):
    base = star_base_set(region)
    fine = [affine_fine(coarse, 1.0, 0.0)(x) for x in base.points]
    mapping, rep = extract_mapping(base, fine, coarse, channel=S12, settings=EXTRACT)
    assert np.max(np.abs(mapping.c - C_STAR)) <= 1e-3
    assert np.max(rep.base_after) <= 1e-6


def test_output_distortion_recovered(coarse, region):
    base = star_base_set(region)
    fine = [affine_fine(coarse, shift=np.zeros(6))(x) for x in base.points]
    mapping, _ = extract_mapping(base, fine, coarse, channel=S12, settings=EXTRACT)
    assert np.max(np.abs(mapping.A - 0.9)) <= 1e-3
    assert np.max(np.abs(mapping.d - 0.05)) <= 1e-3
    assert np.max(np.abs(mapping.B - np.eye(6))) <= 1e-3


def test_extraction_needs_matching_lists(coarse, region):
    base = star_base_set(region)
    with pytest.raises(ValueError, match="13 base points but 2"):
        extract_mapping(base, [coarse(region.reference)] * 2, coarse)


@pytest.fixture(scope="module")
def affine_case(geom, grid, region):
    from smforge.models import CoarseModel
    coarse = CoarseModel(geom, grid)
    fine = CountingModel(affine_fine(coarse), grid)
    base = star_base_set(region)
    mapping, rep = extract_mapping(base, [fine(x) for x in base.points], coarse,
                                   channel=S12, settings=EXTRACT)
    tests = region.random_points(4, 1234)
    validate_surrogate(mapping, tests, [fine(x) for x in tests], coarse, report=rep)
    return coarse, fine, mapping, rep


def test_affine_generalizes(affine_case):
    _, fine, _, rep = affine_case
    assert fine.counter.fine_evals == 17
    assert np.max(rep.test_surrogate) <= 0.01 * np.max(rep.test_coarse)
    assert np.max(rep.test_surrogate) <= 10 * np.max(rep.base_after)


def test_error_tables(affine_case):
    _, _, _, rep = affine_case
    lines = rep.error_table("test").splitlines()
    assert lines[0].split(",")[:2] == ["freq_ghz", "coarse_0"]
    assert len(lines) == 18 and len(lines[1].split(",")) == 1 + 2 * 4


def test_identity_validation_equals_coarse(coarse, region, grid, affine_case):
    _, fine, _, _ = affine_case
    pts = region.random_points(2, 5)
    rep = validate_surrogate(MappingSet.identity(6, grid), pts, [fine(x) for x in pts], coarse)
    assert np.array_equal(rep.test_coarse, rep.test_surrogate)
    with pytest.raises(ValueError, match="no test points"):
        validate_surrogate(MappingSet.identity(6, grid), [], [], coarse)


def test_interpolation(grid):
    A = np.arange(grid.m, dtype=float) * 2 + 1
    d = np.linspace(-1, 1, grid.m) ** 2
    m = MappingSet(A, np.eye(2), np.zeros(2), d, grid)
    same = interpolate_output_mapping(m, grid)
    assert np.array_equal(same.A, A) and np.array_equal(same.d, d)
    dense = interpolate_output_mapping(m, make_grid(8.0, 12.0, 0.125))
    assert np.array_equal(dense.A[::2], A)
    assert np.max(np.abs(dense.A[1::2] - (A[:-1] + A[1:]) / 2)) <= 1e-12
    assert np.max(np.abs(dense.d[1::2] - (d[:-1] + d[1:]) / 2)) <= 1e-12
    with pytest.raises(ValueError, match="beyond"):
        interpolate_output_mapping(m, make_grid(8.0, 12.5, 0.25))


def test_two_node_midpoint():
    g = make_grid(1.0, 2.0, 1.0)
    m = MappingSet([1.0, 3.0], np.eye(1), [0.0], [0.0, 0.0], g)
    assert interpolate_output_mapping(m, make_grid(1.0, 2.0, 0.5)).A[1] == 2.0


def test_identity_optimization_reduces_to_coarse(coarse, region, grid):
    st = OptimizerSettings(max_iterations=15, gradient_step=1e-7)
    a = optimize_surrogate(MappingSet.identity(6, grid), filter_spec(), region, st, coarse)
    b = optimize_design(coarse, filter_spec(), region.reference, region.bounds(), st)
    assert np.array_equal(a.minimizer, b.minimizer)
    assert a.objective_value == b.objective_value


def test_optimization_descends_when_satisfied(coarse, region, grid):
    loose = DesignSpec((SpecBand("S12", 11.9, 12.0, -3.0),))
    start = objective(coarse(region.reference), loose)
    assert start < 0
    rep = optimize_surrogate(MappingSet.identity(6, grid), loose, region,
                             OptimizerSettings(max_iterations=10, gradient_step=1e-7), coarse)
    assert rep.objective_value < 0 and rep.objective_value <= start
    assert region.contains(rep.minimizer)


def test_affine_design_confirmed_by_fine(affine_case, region):
    coarse, fine, mapping, rep = affine_case
    opt = optimize_surrogate(mapping, filter_spec(), region,
                             OptimizerSettings(max_iterations=60, gradient_step=1e-7), coarse)
    sur = objective(surrogate_response(opt.minimizer, mapping, coarse), filter_spec())
    fine_obj = objective(fine(opt.minimizer), filter_spec())
    if sur <= -np.max(rep.base_after):
        assert fine_obj <= 0
    # the surrogate predicts the fine level to within the extraction error
    assert abs(sur - fine_obj) <= 1e-3
