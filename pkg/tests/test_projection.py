import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilcbox import (AxisAssignment, ProjectionSpec, consecutive_assignment,
                    invert, project, project_all, swapped_assignment,
                    wbc_default_spec)
from ilcbox.projection import (ProjectionError, projection_bounds,
                               sequential_offsets)

WORKED = (5, 1, 1, 1, 2, 1, 3, 1, 1, 1)


def spec10(mode, **kw):
    return ProjectionSpec(mode=mode, assignment=consecutive_assignment(10), **kw)


def test_worked_example_fully_dynamic():
    poly = project(WORKED, spec10("ilc2_fully_dynamic"))
    assert poly.nodes == ((5, 1), (6, 2), (8, 3), (11, 4), (12, 5))


def test_worked_example_inverse():
    spec = spec10("ilc2_fully_dynamic")
    assert invert(project(WORKED, spec), spec) == WORKED


def test_worked_example_partial_dynamic():
    poly = project(WORKED, spec10("ilc2_partial_dynamic"))
    assert poly.nodes == ((5, 1), (6, 1), (8, 1), (11, 1), (12, 1))


def test_all_zero_case():
    for mode in ("ilc2_partial_dynamic", "ilc2_fully_dynamic"):
        poly = project((0,) * 10, spec10(mode))
        assert all(n == (0, 0) for n in poly.nodes)


def test_weighted_all_ones_equals_fully_dynamic():
    w = spec10("ilc2_weighted_dynamic", weights=(1.0,) * 10)
    f = spec10("ilc2_fully_dynamic")
    case = (3, 1, 4, 1, 5, 9, 2, 6, 5, 3)
    assert project(case, w).nodes == project(case, f).nodes


def test_single_node_polyline_inverts():
    spec = ProjectionSpec(mode="ilc2_fully_dynamic",
                          assignment=AxisAssignment((0,), (1,)))
    assert invert([(7.0, 3.0)], spec) == (7.0, 3.0)


def test_zero_weight_not_invertible():
    spec = spec10("ilc2_weighted_dynamic", weights=(1.0,) * 9 + (0.0,))
    poly = project(WORKED, spec)
    with pytest.raises(ProjectionError, match="zero weight"):
        invert(poly, spec)


def test_dimension_mismatch_errors():
    with pytest.raises(ProjectionError):
        project((1, 2, 3), spec10("ilc2_partial_dynamic"))


def test_prefix_sum_structure():
    case = (2, 7, 1, 8, 2, 8, 1, 8, 2, 8)
    spec = spec10("ilc2_fully_dynamic")
    nodes = project(case, spec).nodes
    xs = [0.0] + [x for x, _ in nodes]
    for k, (h, _) in enumerate(spec.assignment.pairs):
        assert xs[k + 1] - xs[k] == pytest.approx(case[h])


def test_partial_dynamic_y_is_raw_vertical():
    case = (2, 7, 1, 8, 2, 8, 1, 8, 2, 8)
    spec = spec10("ilc2_partial_dynamic")
    for (_, y), (_, v) in zip(project(case, spec).nodes, spec.assignment.pairs):
        assert y == case[v]


def test_monotone_x_for_nonnegative_data():
    rng = np.random.default_rng(4)
    spec = spec10("ilc2_fully_dynamic")
    for _ in range(50):
        case = tuple(rng.uniform(0, 10, size=10))
        xs = [x for x, _ in project(case, spec).nodes]
        assert all(b >= a for a, b in zip(xs, xs[1:]))


MODE_SPECS = {
    "ilc2_partial_dynamic": spec10("ilc2_partial_dynamic"),
    "ilc2_fully_dynamic": spec10("ilc2_fully_dynamic"),
    "ilc2_weighted_dynamic": spec10("ilc2_weighted_dynamic",
                                    weights=(0.5, 2.0, 1.5, 0.25, 3.0, 1.0, 0.75, 2.5, 1.25, 0.8)),
    "ilc2_static": spec10("ilc2_static"),
    "static_collocated": spec10("static_collocated"),
    "static_sequential": spec10("static_sequential",
                                coordinate_offsets=(0.0, 10.0, 20.0, 30.0, 40.0)),
    "static_generic": spec10("static_generic",
                             coordinate_offsets=(0.0, 5.0, 5.0, 17.0, 2.0)),
}


@pytest.mark.parametrize("mode", sorted(MODE_SPECS))
@settings(max_examples=40, deadline=None)
@given(case=st.lists(st.floats(min_value=-100, max_value=100,
                               allow_nan=False, allow_infinity=False),
                     min_size=10, max_size=10))
def test_round_trip_every_mode(mode, case):
    spec = MODE_SPECS[mode]
    back = invert(project(tuple(case), spec), spec)
    for a, b in zip(back, case):
        assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_duplicate_attribute_round_trip():
    spec = wbc_default_spec("ilc2_fully_dynamic")
    case = (5, 1, 1, 1, 2, 1, 3, 1, 1)  # 9-D, last attribute drawn twice
    poly = project(case, spec)
    assert len(poly.nodes) == 5
    assert invert(poly, spec) == case


def test_project_all_mirror(wbc):
    spec = wbc_default_spec()
    plain = project_all(wbc, spec, mirror="none")
    mirrored = project_all(wbc, spec, mirror="by_class")
    assert len(mirrored) == 683
    assert sum(1 for p in mirrored if p.render_side == 1) == 444
    for a, b in zip(plain, mirrored):
        assert a.nodes == b.nodes  # mirroring is render-only
    assert all(p.render_side == 1 for p in plain)


def test_mirror_requires_two_classes(pbc):
    with pytest.raises(ProjectionError, match="2 classes"):
        project_all(pbc, ProjectionSpec(mode="ilc2_partial_dynamic",
                                        assignment=consecutive_assignment(10)),
                    mirror="by_class")


def test_project_all_empty():
    from ilcbox.dataset import Dataset
    empty = Dataset("none", [], [])
    assert project_all(empty, spec10("ilc2_partial_dynamic")) == []


def test_assignment_validation():
    with pytest.raises(ProjectionError):
        AxisAssignment((0, 1), (2,))  # unequal lengths
    with pytest.raises(ProjectionError):
        AxisAssignment((0, 0), (0, 1))  # triple use
    with pytest.raises(ProjectionError):
        AxisAssignment((0, 1), (1, 2))  # undeclared duplicate


def test_sequential_offsets_monotone(wbc):
    spec = wbc_default_spec()
    offsets = sequential_offsets(wbc, spec.assignment)
    assert all(b >= a for a, b in zip(offsets, offsets[1:]))
    seq = ProjectionSpec(mode="static_sequential", assignment=spec.assignment,
                         coordinate_offsets=offsets)
    case = wbc.cases[0]
    assert invert(project(case, seq), seq) == pytest.approx(case.values)


def test_swapped_assignment_swaps_roles():
    a = consecutive_assignment(10)
    s = swapped_assignment(10)
    assert s.horizontal == a.vertical and s.vertical == a.horizontal


def test_bounds(wbc_partial_polylines):
    min_x, max_x, min_y, max_y = projection_bounds(wbc_partial_polylines)
    assert min_x >= 1 and max_x <= 50 and min_y >= 1 and max_y <= 10
