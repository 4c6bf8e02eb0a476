import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillwalsh.discriminant import discriminant_recursive
from hillwalsh.excitation import (
    BUILTINS,
    Constant,
    Cosine,
    CosineSum,
    HillProblem,
    SampledTable,
    SquareWave,
)
from hillwalsh.oracles import (
    constant_coeff_delta,
    delta_power_expansion_check,
    expansion_terms,
    integral_recursion,
    integral_table,
    lyapunov_terms,
    monodromy,
    monodromy_delta,
    piecewise_constant_delta,
    propagator,
    step_levels,
)

TWO_PI = 2 * math.pi
FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


# -- monodromy -------------------------------------------------------------

def test_free_particle_monodromy():
    res = monodromy(HillProblem(0.0, 0.0, 3.0), 64)
    assert np.allclose(res.m, [[1.0, 3.0], [0.0, 1.0]], atol=1e-14)
    assert res.trace == pytest.approx(2.0)


def test_harmonic_full_turn():
    res = monodromy(HillProblem(1.0, 0.0), 1 << 12)
    assert res.trace == pytest.approx(2.0, abs=1e-10)
    assert res.det == pytest.approx(1.0, abs=1e-12)


def test_multipliers_solve_characteristic_polynomial():
    res = monodromy(HillProblem(0.3, 1.2, TWO_PI, CosineSum()), 1 << 10)
    r1, r2 = res.multipliers
    assert r1 * r2 == pytest.approx(1.0, abs=1e-12)
    assert r1 + r2 == pytest.approx(res.trace, abs=1e-12)


def test_mathieu_fixture():
    rec = fixture("mathieu_monodromy")
    pr = HillProblem(rec["problem"]["alpha"], rec["problem"]["beta"])
    res = monodromy(pr, rec["order"])
    assert res.trace == pytest.approx(rec["delta"], rel=1e-10)
    assert abs(res.det - 1.0) < 1e-10


def test_fourth_order_halving():
    pr = HillProblem(1.3, 0.9)
    d = [monodromy(pr, n).trace for n in (128, 256, 512)]
    ratio = abs(d[0] - d[1]) / abs(d[1] - d[2])
    assert 13.0 < ratio < 19.0


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_det_is_one(name):
    # entries stay moderate on this box; in strongly unstable regions
    # |M| ~ 1e6 and cancellation in det alone costs ~1e-5
    for a in (-1.0, 0.5, 2.0, 4.0):
        for b in (-2.0, 0.0, 2.0):
            res = monodromy(HillProblem(a, b, TWO_PI, BUILTINS[name]), 1 << 14)
            assert abs(res.det - 1.0) < 1e-8


def test_batched_monodromy_matches_single():
    alphas = np.array([-0.5, 0.3, 1.7])
    got = monodromy_delta(Cosine(), TWO_PI, alphas, 0.8, 512)
    single = [monodromy(HillProblem(a, 0.8), 512).trace for a in alphas]
    assert np.allclose(got, single, rtol=1e-12)


def test_monodromy_validation():
    with pytest.raises(ValueError):
        monodromy(HillProblem(1, 1), 32)


# -- closed forms ----------------------------------------------------------

def test_constant_coeff_examples():
    assert constant_coeff_delta(0.0, 5.0) == 2.0
    assert constant_coeff_delta(0.25, TWO_PI) == pytest.approx(-2.0)
    assert constant_coeff_delta(-1.0, 1.0) == pytest.approx(2 * math.cosh(1.0))
    with pytest.raises(ValueError):
        constant_coeff_delta(1.0, 0.0)


def test_propagator_is_symplectic():
    for q in (-3.0, 0.0, 2.5):
        assert np.linalg.det(propagator(q, 0.7)) == pytest.approx(1.0)


def test_piecewise_single_and_split():
    assert piecewise_constant_delta([(0.7, 3.0)]) == pytest.approx(constant_coeff_delta(0.7, 3.0))
    assert piecewise_constant_delta([(1.0, 1.5), (1.0, 1.5)]) == pytest.approx(
        piecewise_constant_delta([(1.0, 3.0)]))
    with pytest.raises(ValueError):
        piecewise_constant_delta([(1.0, 0.0)])


def test_meissner_fixture_and_monodromy():
    rec = fixture("meissner_exact")
    pr = HillProblem(1.0, 0.5, TWO_PI, SquareWave())
    exact = piecewise_constant_delta(step_levels(pr))
    assert exact == pytest.approx(rec["delta"], rel=1e-11)
    assert abs(monodromy(pr, 1 << 12).trace - exact) < 1e-8


def test_table_excitation_exact_vs_monodromy():
    ex = SampledTable(values=(1.0, -0.5, 2.0, 0.0, -1.0, 0.5, 1.5, -2.0))
    pr = HillProblem(0.6, 0.7, TWO_PI, ex)
    exact = piecewise_constant_delta(step_levels(pr))
    assert abs(monodromy(pr, 1 << 12).trace - exact) < 1e-8
    # the table is sampled verbatim, so the recursion converges to the same value
    assert abs(discriminant_recursive(pr, 14).delta - exact) < 1e-2


def test_step_levels_requires_steps():
    with pytest.raises(TypeError):
        step_levels(HillProblem(1, 1))


# -- Lyapunov series -------------------------------------------------------

def test_lyapunov_zero():
    lt = lyapunov_terms(HillProblem(0.0, 0.0), 3)
    assert lt.terms == [2.0, 0.0, 0.0, 0.0]
    assert lt.delta == 2.0


@pytest.mark.parametrize("alpha", [0.0625, 0.3, -0.2])
def test_lyapunov_constant_identities(alpha):
    tau = TWO_PI
    lt = lyapunov_terms(HillProblem(alpha, 0.0, tau), 3)
    assert lt.terms[1] == pytest.approx(alpha * tau**2, rel=1e-12)
    assert lt.terms[2] == pytest.approx(alpha**2 * tau**4 / 12, rel=1e-12)
    assert lt.terms[3] == pytest.approx(alpha**3 * tau**6 / 360, rel=1e-12)


def test_lyapunov_mathieu_next_term_bound():
    pr = HillProblem(0.05, 0.05)
    lt = lyapunov_terms(pr, 3)
    assert abs(lt.partial_sums[3] - monodromy(pr, 1 << 14).trace) < abs(lt.terms[3])


def test_lyapunov_step_excitation_quadrature_converges():
    pr = HillProblem(0.03, 0.02, TWO_PI, SquareWave())
    coarse = lyapunov_terms(pr, 2, 64).terms
    fine = lyapunov_terms(pr, 2, 256).terms
    assert coarse[1] == pytest.approx(fine[1], rel=1e-12)  # panels align with the jump
    assert coarse[2] == pytest.approx(fine[2], rel=1e-3)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.002, 0.03), st.floats(-1.0, 1.0), st.sampled_from(sorted(BUILTINS)))
def test_alternating_sandwich(alpha, ratio, name):
    # small positive q: partial sums bracket the true discriminant
    ex = BUILTINS[name]
    peak = float(np.max(np.abs(ex.phase(np.linspace(0, 1, 1025)))))
    beta = ratio * alpha / peak * 0.9
    pr = HillProblem(alpha, beta, TWO_PI, ex)
    lt = lyapunov_terms(pr, 3, 64)
    a = lt.terms
    assume_decreasing = a[1] > a[2] > a[3] > 0
    if not assume_decreasing:
        return
    true = monodromy(pr, 1 << 12).trace
    assert 2 - a[1] <= true <= 2 - a[1] + a[2]


def test_lyapunov_validation():
    with pytest.raises(ValueError):
        lyapunov_terms(HillProblem(1, 1), 4)
    with pytest.raises(ValueError):
        lyapunov_terms(HillProblem(1, 1), 2, quad_points=16)


# -- delta-power expansion -------------------------------------------------

def test_expansion_free():
    rep = delta_power_expansion_check(HillProblem(0.0, 0.0), 4, 3)
    assert rep["delta_expansion"] == 2.0
    assert rep["A"] == [2.0, 0.0, 0.0, 0.0]


def _polynomial_recursion(table, n, order):
    """Oracle: run the integral recursions on polynomials in delta, truncated."""
    zero = np.zeros(order + 1)
    one = zero.copy()
    one[0] = 1.0

    def shift(poly, coef):  # coef * delta * poly
        out = np.zeros_like(poly)
        out[1:] = coef * poly[:-1]
        return out

    s = [one.copy()]
    z = [one.copy()]
    for m in range(1, n + 1):
        acc_s = zero.copy()
        acc_z = zero.copy()
        for i in range(m):
            acc_s += shift(s[i], table[m + 1, i + 1])
            acc_z += shift(z[i], (m - i) * table[i + 2, i + 1])
        s.append(one - acc_s)
        z.append(one - acc_z)
    return s[n], z[n]


@pytest.mark.parametrize("k", [2, 3])
def test_expansion_terms_match_polynomial_recursion(k):
    pr = HillProblem(0.7, 0.9)
    n = (1 << k) - 1
    table = integral_table(pr, k)
    s_poly, z_poly = _polynomial_recursion(table, n, 3)
    s_terms, z_terms = expansion_terms(table, 1.0, n, 3)
    for j in range(1, 4):
        assert s_terms[j - 1] == pytest.approx((-1) ** j * s_poly[j], rel=1e-10, abs=1e-12)
        assert z_terms[j - 1] == pytest.approx((-1) ** j * z_poly[j], rel=1e-10, abs=1e-12)


def test_expansion_complete_at_small_order():
    # with 4 samples no product has more than 3 factors: order 3 is exact
    rep = delta_power_expansion_check(HillProblem(0.4, 0.3), 2, 3)
    assert rep["gap_expansion_vs_integral"] < 1e-12


def test_expansion_first_term_converges():
    alpha = 0.0625
    pr = HillProblem(alpha, 0.0, TWO_PI, Constant(1.0))
    gaps = [abs(delta_power_expansion_check(pr, k, 1)["A"][1] - alpha * TWO_PI**2)
            for k in (4, 6)]
    assert gaps[1] < gaps[0] / 3


def test_expansion_mathieu_report():
    rep = delta_power_expansion_check(HillProblem(0.2, 0.5), 6, 2)
    assert set(rep) >= {"delta_expansion", "delta_integral_recursion", "delta_recursive",
                        "gap_expansion_vs_integral", "gap_expansion_vs_recursive"}
    # no bound is claimed for fixed k; for small q more terms must help
    small = HillProblem(0.05, 0.05)
    gaps = [delta_power_expansion_check(small, 6, o)["gap_expansion_vs_integral"]
            for o in (1, 2, 3)]
    assert gaps[0] > gaps[1] > gaps[2]
    with pytest.raises(ValueError):
        delta_power_expansion_check(HillProblem(0.2, 0.5), 7, 2)


def test_integral_recursion_free():
    s, z = integral_recursion(HillProblem(0.0, 0.0), 5)
    assert np.all(s == 1.0) and np.all(z == 1.0)
