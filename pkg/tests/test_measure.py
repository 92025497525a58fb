import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergolab.errors import ValidationError
from ergolab.measure import (DiscreteSystem, PointMassMeasure, SetIndicator, is_invariant, load_measure,
                             load_system, measure_of, orbit_decomposition, preimage, system_to_json)

from conftest import fixture_path


def test_point_mass_basics():
    mu = PointMassMeasure(((0, 0.25), (2, 0.75)))
    assert mu.total_mass == 1.0
    assert mu.dense(3).tolist() == [0.25, 0.0, 0.75]
    assert mu.integrate(np.array([4.0, 100.0, 0.0])) == 1.0


@pytest.mark.parametrize("atoms, where", [
    (((0, 0.5), (0, 0.5)), "distinct"),
    (((0, -1.0),), "weight"),
    (((-1, 1.0),), "negative"),
])
def test_point_mass_rejects(atoms, where):
    with pytest.raises(ValidationError, match=where):
        PointMassMeasure(atoms)


def test_system_validation_locations():
    with pytest.raises(ValidationError) as exc:
        DiscreteSystem(3, [0, 1, 5])
    assert exc.value.location == "map[2]"
    with pytest.raises(ValidationError):
        DiscreteSystem(2, [0, 1], {"": [1, 2]})
    with pytest.raises(ValidationError):
        DiscreteSystem(2, [0, 1], {"phi": [1, 2, 3]})


def test_preimage_and_measure_of():
    sys = DiscreteSystem(4, [1, 2, 3, 3])
    s = SetIndicator.from_states(4, [3])
    assert preimage(sys, s).states() == [2, 3]
    assert preimage(sys, s, 2).states() == [1, 2, 3]
    mu = PointMassMeasure.uniform(range(4))
    assert measure_of(mu, preimage(sys, s, 3)) == 1.0


def test_orbit_decomposition():
    sys = DiscreteSystem(5, [1, 2, 3, 1, 4])
    assert orbit_decomposition(sys, 0) == ([0], [1, 2, 3])
    assert orbit_decomposition(sys, 4) == ([], [4])


def test_invariance():
    sys = DiscreteSystem(3, [1, 2, 0])
    assert is_invariant(sys, PointMassMeasure.uniform(range(3)))
    assert not is_invariant(sys, PointMassMeasure.dirac(0))


def test_json_round_trip(tmp_path):
    sys, mu = load_system(fixture_path("three_cycle.json"))
    doc = system_to_json(sys, mu)
    sys2, mu2 = load_system(doc)
    assert np.array_equal(sys.map_table, sys2.map_table)
    assert mu.atoms == mu2.atoms


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError) as exc:
        load_system(bad)
    assert exc.value.location == str(bad)
    with pytest.raises(ValidationError, match="n_states"):
        load_system({"map": [0]})
    with pytest.raises(ValidationError):
        load_measure({"measure": [[5, 1.0]]}, n_states=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n - 1), min_size=n,
                                                                           max_size=n))))
def test_preimage_composes(data):
    n, table = data
    sys = DiscreteSystem(n, table)
    s = SetIndicator.from_states(n, [0])
    assert preimage(sys, preimage(sys, s, 1), 2) == preimage(sys, s, 3)
    # pushing forward the uniform measure conserves mass
    mu = PointMassMeasure.uniform(range(n))
    assert abs(measure_of(mu, preimage(sys, SetIndicator.full(n), 4)) - 1.0) < 1e-12
