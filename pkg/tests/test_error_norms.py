import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latticeqc import (displacement_error, energy_error, fit_convergence_order, generate_square_lattice,
                       split_errors)
from latticeqc.error_norms import ErrorNormError

MODEL = generate_square_lattice(3, 3)
N = MODEL.n_nodes

fields = arrays(np.float64, (N, 2), elements=st.floats(-10, 10, allow_nan=False))


def test_trivial_cases():
    u = np.arange(2 * N, dtype=float).reshape(N, 2)
    assert displacement_error(u, u) == 0.0
    assert displacement_error(u, np.zeros_like(u)) == pytest.approx(1.0)
    assert displacement_error(u, 1.1 * u) == pytest.approx(0.1)
    assert energy_error(MODEL, u, 0.5 * u) == pytest.approx(0.5)
    # a rigid shift changes the displacement norm but not the strut differences
    assert energy_error(MODEL, u, u + [3.0, -1.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ErrorNormError):
        displacement_error(np.zeros_like(u), u)
    with pytest.raises(ErrorNormError):
        energy_error(MODEL, u, u[:-1])


@settings(max_examples=60, deadline=None)
@given(fields, fields, fields)
def test_error_axioms(a, b, c):
    if not (np.any(a) and np.any(np.diff(a, axis=0))):
        return
    e_ab = displacement_error(a, b)
    assert e_ab >= 0
    # triangle inequality with a common normalization
    assert e_ab <= displacement_error(a, c) + displacement_error(c, b, u_norm=a) + 1e-12
    try:
        u_ab = energy_error(MODEL, a, b)
    except ErrorNormError:
        return
    assert u_ab <= energy_error(MODEL, a, c) + energy_error(MODEL, c, b, u_norm=a) + 1e-12


@settings(max_examples=40, deadline=None)
@given(fields, fields, fields)
def test_split_errors_satisfy_triangle_inequalities(fr, fs, rr):
    try:
        rep = split_errors(fr, fs, rr, MODEL)
    except ErrorNormError:
        return
    assert rep.triangle_ok_disp and rep.triangle_ok_energy
    assert set(rep.as_dict()) >= {"e_disp", "e_U_sam", "triangle_ok_disp"}


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(1e-4, 10.0))
def test_power_law_fit_recovers_order(p, c):
    h = np.array([24.0, 16.0, 12.0, 8.0])
    fit = fit_convergence_order(h, c * h ** p)
    assert fit.order == pytest.approx(p, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)
    assert fit.predict(10.0) == pytest.approx(c * 10.0 ** p, rel=1e-8)


def test_fit_rejects_bad_input():
    with pytest.raises(ErrorNormError):
        fit_convergence_order([1, 2], [1, 2])
    with pytest.raises(ErrorNormError):
        fit_convergence_order([1, 2, 3], [1, 0, 2])
