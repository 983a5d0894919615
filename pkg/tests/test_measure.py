import numpy as np
import pytest

from few.ga import GaConfig
from few.innermin import InnerMinConfig, grid_oracle
from few.measure import MeasureOptions, Verdict, check_convexity, check_lu_invariance, compute_few_measure
from few.qops import PAULI
from few.states import (
    DensityMatrix,
    bell_state,
    maximally_mixed,
    random_local_unitaries,
    random_separable,
    werner,
)
from few.witness import TracelessObservable
from oracles import bell_diagonal_min, ppt_distance, werner_family_max

I2, X, Y, Z = PAULI
SMALL = GaConfig(pop_size=40, generations=6, seed=1)
SMALL_INNER = InnerMinConfig(100, 3)
MID = GaConfig(pop_size=200, generations=50, seed=3)
INNER = InnerMinConfig(400, 5)


def _check_invariants(res):
    assert res.e_value >= 0
    assert res.e_value == pytest.approx(max(0.0, res.best_fitness), abs=1e-12)
    assert res.witness.mu == res.mu
    assert np.allclose(res.witness.matrix, res.best_z.matrix - res.mu * np.eye(len(res.best_z.matrix)), atol=1e-12)
    if res.verdict is Verdict.CERTIFIED:
        assert res.e_value > 0 and res.verification.passed


def test_maximally_mixed_is_undetected():
    res = compute_few_measure(maximally_mixed((2, 2)), SMALL, SMALL_INNER)
    _check_invariants(res)
    assert res.e_value == 0 and res.verdict is Verdict.UNDETECTED


def test_random_separable_is_zero():
    for seed in range(3):
        res = compute_few_measure(random_separable((2, 2), 16, rng=seed), SMALL, SMALL_INNER)
        _check_invariants(res)
        assert res.e_value == 0 and res.verdict is Verdict.UNDETECTED


def test_bell_small_budget_invariants():
    res = compute_few_measure(bell_state(0, 0), SMALL, SMALL_INNER)
    _check_invariants(res)
    assert res.verdict is Verdict.CERTIFIED
    assert res.to_json()["verdict"] == "EntanglementCertified"


def test_bell_diagonal_minimum_formula():
    rng = np.random.default_rng(0)
    for _ in range(3):
        c = rng.normal(size=3)
        c /= 2 * np.linalg.norm(c)
        tau = np.zeros((4, 4))
        tau[1, 1], tau[2, 2], tau[3, 3] = c
        assert grid_oracle(TracelessObservable(tau, (2, 2)), (2, 2), 41) == pytest.approx(bell_diagonal_min(c), abs=2e-3)


@pytest.mark.parametrize("F", [0.3, 0.5, 0.6, 0.75, 0.9, 1.0])
def test_werner_closed_form_matches_family_grid(F):
    assert werner_family_max(F) == pytest.approx(max(0.0, 2 * (F - 0.5) / np.sqrt(3)), abs=5e-4)


@pytest.mark.parametrize("F", [0.6, 0.75, 1.0])
def test_werner_closed_form_matches_ppt_distance(F):
    assert ppt_distance(werner(F).matrix) == pytest.approx(2 * (F - 0.5) / np.sqrt(3), abs=1e-4)


def test_werner_075_near_closed_form():
    res = compute_few_measure(werner(0.75), MID, INNER)
    _check_invariants(res)
    assert res.e_value == pytest.approx(2 * 0.25 / np.sqrt(3), abs=0.03)


def test_random_states_bracket_exact_value():
    rng = np.random.default_rng(31)
    for _ in range(2):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        m = 0.7 * np.outer(psi, psi.conj()) + 0.3 * (a @ a.conj().T) / np.trace(a @ a.conj().T).real
        rho = DensityMatrix(m, (2, 2))
        exact = ppt_distance(rho.matrix)
        res = compute_few_measure(rho, MID, INNER)
        _check_invariants(res)
        assert res.e_value <= exact + 1e-4
        assert res.upper_bound >= exact - 1e-4
        assert res.e_value >= exact - 0.01


def test_lu_identity_same_seed_is_exact():
    e0, e1, delta = check_lu_invariance(bell_state(0, 0), [I2, I2], SMALL, SMALL_INNER, rotated_seed=SMALL.seed)
    assert delta == 0.0 and e0 == e1


def test_convexity_lambda_zero():
    lhs, rhs, ok = check_convexity(bell_state(0, 0), werner(0.8), 0.0, SMALL, SMALL_INNER)
    assert lhs == rhs and ok


def test_pure_ga_is_a_lower_bound_on_random_state():
    rng = np.random.default_rng(31)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = 0.3 * (a @ a.conj().T) / np.trace(a @ a.conj().T).real + 0.7 * bell_state(1, 1).matrix
    rho = DensityMatrix(m, (2, 2))
    res = compute_few_measure(rho, SMALL, SMALL_INNER, MeasureOptions(refine_iters=0))
    assert res.e_value <= ppt_distance(rho.matrix) + 1e-4


def test_lu_rotated_bell():
    us = random_local_unitaries((2, 2), rng=2)
    e0, e1, delta = check_lu_invariance(bell_state(0, 0), us, MID, INNER)
    assert delta <= 0.03
