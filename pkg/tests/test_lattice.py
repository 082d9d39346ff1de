import json
import math

import numpy as np
import pytest

from latticeqc import (
    BasisConfig,
    MixedState,
    OccupationOverflowError,
    PureState,
    SiteOccupancy,
    classical,
    fidelity,
    level_count,
)


def test_config_basics():
    c = BasisConfig.from_counts([(2, 0, 0), (1, 0, 1)])
    assert c.L == 2
    assert c.sites[1] == SiteOccupancy(1, 0, 1)
    assert c.level_total("a") == 3
    assert c.level_total("p") == 1
    assert c.max_count() == 2
    assert c == BasisConfig.from_array(c.to_array())
    assert c.to_array().dtype == np.int64


def test_config_validation():
    with pytest.raises(ValueError):
        BasisConfig(())
    with pytest.raises(ValueError):
        BasisConfig.from_counts([(-1, 0, 0)])
    with pytest.raises(ValueError):
        BasisConfig.from_array(np.zeros((2, 2), dtype=int))


def test_config_translate_wraps():
    c = BasisConfig.from_counts([(1, 0, 0), (0, 0, 1), (2, 0, 0)])
    t = c.translate(1)
    assert t == BasisConfig.from_counts([(2, 0, 0), (1, 0, 0), (0, 0, 1)])
    assert c.translate(3) == c
    assert c.translate(-1) == c.translate(2)


def test_classical_respects_cutoff():
    classical([(6, 0, 0)])  # at the boundary is allowed
    with pytest.raises(OccupationOverflowError):
        classical([(7, 0, 0)])
    with pytest.raises(OccupationOverflowError):
        classical([(3, 0, 0)], m_max=2)


def test_pure_state_norm_gate():
    c1 = BasisConfig.from_counts([(1, 0, 0)])
    c2 = BasisConfig.from_counts([(0, 0, 1)])
    with pytest.raises(ValueError):
        PureState({c1: 0.7, c2: 0.7})
    # norm drift inside the tolerance window passes
    PureState({c1: math.sqrt(0.5) * (1 + 4e-11), c2: math.sqrt(0.5)})


def test_pure_state_prunes_tiny_terms():
    c1 = BasisConfig.from_counts([(1, 0, 0)])
    c2 = BasisConfig.from_counts([(0, 0, 1)])
    junk = BasisConfig.from_counts([(2, 0, 0)])
    s = PureState({c1: math.sqrt(0.5), c2: math.sqrt(0.5), junk: 1e-15})
    assert len(s.terms) == 2
    assert junk not in dict(s.terms)


def test_pure_state_canonical_order():
    a = BasisConfig.from_counts([(0, 0, 1)])
    b = BasisConfig.from_counts([(1, 0, 0)])
    s1 = PureState({a: math.sqrt(0.5), b: math.sqrt(0.5)})
    s2 = PureState({b: math.sqrt(0.5), a: math.sqrt(0.5)})
    assert s1.terms == s2.terms
    assert list(s1.terms) == sorted([a, b])


def test_pure_state_mixed_length_rejected():
    c1 = BasisConfig.from_counts([(1, 0, 0)])
    c2 = BasisConfig.from_counts([(1, 0, 0), (0, 0, 0)])
    with pytest.raises(ValueError):
        PureState({c1: math.sqrt(0.5), c2: math.sqrt(0.5)})


def test_level_count_deterministic_vs_not():
    st = classical([(1, 0, 1), (0, 0, 1)])
    val, det = level_count(st, "p")
    assert val == 2.0 and det
    c1 = BasisConfig.from_counts([(1, 0, 1)])
    c2 = BasisConfig.from_counts([(1, 0, 0)])
    sup = MixedState([(1.0, PureState({c1: math.sqrt(0.5), c2: math.sqrt(0.5)}))])
    val, det = level_count(sup, "p")
    assert val == pytest.approx(0.5)
    assert not det


def test_mixed_state_weight_gate_and_merge():
    s = classical([(1, 0, 0)]).branches[0][1]
    with pytest.raises(ValueError):
        MixedState([(0.6, s), (0.6, s)])
    m = MixedState([(0.5, s), (0.5, s)])
    assert len(m.branches) == 1
    assert m.branches[0][0] == pytest.approx(1.0)
    assert m.is_classical
    assert m.sole_config() == BasisConfig.from_counts([(1, 0, 0)])


def test_mixed_state_branch_order_is_canonical():
    s1 = classical([(2, 0, 0)]).branches[0][1]
    s2 = classical([(0, 0, 1)]).branches[0][1]
    m1 = MixedState([(0.25, s1), (0.75, s2)])
    m2 = MixedState([(0.75, s2), (0.25, s1)])
    assert [w for w, _ in m1.branches] == [w for w, _ in m2.branches]


def test_sole_config_requires_single_classical_branch():
    c1 = BasisConfig.from_counts([(1, 0, 0)])
    c2 = BasisConfig.from_counts([(0, 0, 1)])
    sup = MixedState([(1.0, PureState({c1: math.sqrt(0.5), c2: math.sqrt(0.5)}))])
    with pytest.raises(ValueError):
        sup.sole_config()


def test_fidelity_pure_overlap():
    c1 = BasisConfig.from_counts([(1, 0, 0)])
    c2 = BasisConfig.from_counts([(0, 0, 1)])
    x = MixedState([(1.0, PureState({c1: 1.0}))])
    y = MixedState([(1.0, PureState({c1: math.sqrt(0.5), c2: math.sqrt(0.5)}))])
    assert fidelity(x, x) == pytest.approx(1.0)
    assert fidelity(x, y) == pytest.approx(0.5)
    # global phase is invisible
    z = MixedState([(1.0, PureState({c1: 1j}))])
    assert fidelity(x, z) == pytest.approx(1.0)


def test_fidelity_dimension_mismatch():
    x = classical([(1, 0, 0)])
    y = classical([(1, 0, 0), (0, 0, 0)])
    with pytest.raises(ValueError):
        fidelity(x, y)


def test_fidelity_paired_vs_strict():
    s1 = classical([(2, 0, 0)]).branches[0][1]
    s2 = classical([(0, 0, 1)]).branches[0][1]
    m = MixedState([(0.5, s1), (0.5, s2)])
    assert fidelity(m, m, mode="paired") == pytest.approx(1.0)
    assert fidelity(m, m, mode="strict") == pytest.approx(1.0)
    other = MixedState([(0.25, s1), (0.75, s2)])
    with pytest.raises(ValueError):
        fidelity(m, other, mode="paired")  # weights differ


def test_json_round_trip_is_exact():
    c1 = BasisConfig.from_counts([(1, 0, 1), (0, 0, 0)])
    c2 = BasisConfig.from_counts([(0, 1, 0), (1, 0, 0)])
    amp = math.sqrt(1 / 3) + 1j * math.sqrt(2 / 3)
    s = PureState({c1: amp.real, c2: 1j * amp.imag})
    m = MixedState([(1.0, s)])
    blob = json.dumps(m.to_json_obj())
    back = MixedState.from_json_obj(json.loads(blob))
    assert back.branches[0][0] == m.branches[0][0]
    assert back.branches[0][1].terms == m.branches[0][1].terms  # bit-exact


def test_config_json_round_trip():
    c = BasisConfig.from_counts([(2, 1, 0), (0, 0, 3)])
    assert BasisConfig.from_json_obj(c.to_json_obj()) == c


def test_state_translate_moves_every_level():
    st = classical([(1, 0, 1), (0, 2, 0), (0, 0, 0)])
    out = st.translate(1)
    assert out.sole_config() == BasisConfig.from_counts(
        [(0, 0, 0), (1, 0, 1), (0, 2, 0)]
    )
    assert st.translate(0).sole_config() == st.sole_config()
