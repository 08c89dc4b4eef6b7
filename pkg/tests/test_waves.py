import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowfast.errors import InvalidInputError, InvasionInfeasibleError
from slowfast.kinetics import ModelParams, coexistence_state
from slowfast.waves import tw_eigen_analysis, tw_jacobian, tw_min_speed

P = ModelParams(0.5, 0.22, 3.0, 0.38, 1.0, d=1.0)


def test_min_speed_values():
    assert tw_min_speed(P) == pytest.approx(1.07, abs=0.01)
    assert tw_min_speed(P.replace(delta=0.3)) == pytest.approx(1.211, abs=0.01)
    assert tw_min_speed(P, epsilon=0.0) == 0.0


def test_min_speed_infeasible():
    with pytest.raises(InvasionInfeasibleError):
        tw_min_speed(P.replace(delta=0.7))
    with pytest.raises(InvalidInputError):
        tw_min_speed(P, epsilon=-1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3), st.floats(0.01, 0.5), st.floats(0.01, 1.0), st.floats(0.1, 5))
def test_min_speed_scales_with_sqrt_eps_d(a, frac, eps, d):
    delta = frac / (1 + a)
    p = ModelParams(a, 0.2, 3.0, delta, eps, d=d)
    c = tw_min_speed(p)
    assert c == pytest.approx(math.sqrt(eps * d) * tw_min_speed(p.replace(epsilon=1.0, d=1.0)), rel=1e-12)


def test_min_speed_is_linear_spreading_speed():
    # at c_min the predator linearization at (1, 0) has a double real root
    p = P.replace(delta=0.3)
    c = tw_min_speed(p)
    eigs = np.linalg.eigvals(tw_jacobian(p, c, 1.0, 0.0))
    pred = [z for z in eigs if abs(z + c / (2 * p.d)) < 1e-4]
    assert len(pred) == 2
    assert max(abs(z.imag) for z in pred) < 1e-4


def test_eigenvalues_and_types():
    a = tw_eigen_analysis(P)
    assert a.wave_type == "non_monotone"
    z = a.selected_pair[1]
    assert z.real == pytest.approx(-1.22, abs=0.01)
    assert z.imag == pytest.approx(0.423, abs=0.01)
    b = tw_eigen_analysis(P.replace(delta=0.3))
    assert b.wave_type == "periodic"
    z = b.selected_pair[1]
    assert z.real == pytest.approx(0.034, abs=0.005)
    assert z.imag == pytest.approx(0.405, abs=0.005)
    c = tw_eigen_analysis(P.replace(delta=0.6))
    assert c.wave_type == "monotone"


def test_jacobian_entries():
    p = P.replace(delta=0.3)
    u, v = coexistence_state(p)
    J = tw_jacobian(p, 1.2, u, v)
    assert J[0, 1] == -1 and J[2, 3] == -1
    assert J[1, 1] == -1.2 and J[3, 3] == pytest.approx(-1.2 / p.d)
    assert np.trace(J) == pytest.approx(-1.2 * (1 + 1 / p.d))


def test_infeasible_coexistence():
    a = tw_eigen_analysis(P.replace(delta=0.7), c=1.0)
    assert a.eig_Qstar is None and a.wave_type is None
    with pytest.raises(InvasionInfeasibleError):
        tw_eigen_analysis(P.replace(delta=0.7))
    with pytest.raises(InvalidInputError):
        tw_eigen_analysis(P, c=-1.0)
