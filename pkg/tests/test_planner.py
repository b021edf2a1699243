import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import ELLS, EPS, demo
from s2pc.encoding import FixedPointSpec
from s2pc.planner import (ClosedLoopModel, PlanError, brunovsky_transform, check_assumptions, contraction_bounds,
                          floor_log2, fraction_bits_lower_bound, fraction_bits_lower_bound_noD,
                          modulus_bits_lower_bound, plan)


def toy_model(A=None, Cp=None, D=0.0, rho_plant=0.5):
    A = np.zeros((2, 2)) if A is None else A
    return ClosedLoopModel(rho_plant * np.eye(2), [[1.0], [0.0]], [[1.0, 0.0]] if Cp is None else Cp, [0.0, 0.0],
                           A, [[0.0], [0.0]], [[0.0, 0.0]], [[D]], [0.0, 0.0])


def test_floor_log2():
    assert floor_log2(Fraction(1)) == 0
    assert floor_log2(Fraction(3, 2)) == 0
    assert floor_log2(Fraction(1, 3)) == -2
    assert floor_log2(Fraction(2**100)) == 100
    assert floor_log2(Fraction(2**100 - 1)) == 99


def test_assumptions_zero_controller():
    rep = check_assumptions(toy_model(), FixedPointSpec(12, 4))
    assert rep.ok and rep.failures() == []


def test_marginal_stability_fails():
    rep = check_assumptions(toy_model(rho_plant=1.0), FixedPointSpec(12, 4))
    assert not rep.stable
    assert any("closed-loop stability" in f for f in rep.failures())


def test_fixed_point_failure_reported():
    rep = check_assumptions(toy_model(A=np.diag([0.1, 0.0])), FixedPointSpec(12, 4))
    assert not rep.fixed_point_ok and not rep.ok


def test_contraction_examples():
    assert contraction_bounds(np.zeros((2, 2))) == pytest.approx((1.05, 0.5))
    c, g = contraction_bounds(0.5 * np.eye(3))
    assert g == pytest.approx(0.75) and c == pytest.approx(1.05)
    assert all(0.5**t <= c * g**t for t in range(200))
    R = np.array([[0.0, -0.9], [0.9, 0.0]])
    c, g = contraction_bounds(R, horizon=300)
    assert g == pytest.approx(0.95)
    for t in range(300):
        assert np.linalg.norm(np.linalg.matrix_power(R, t), 2) <= c * g**t * (1 + 1e-12)


def test_contraction_unstable():
    with pytest.raises(PlanError) as ei:
        contraction_bounds(np.eye(2))
    assert ei.value.kind == "stability"


def test_modulus_bound_degenerate():
    # chi0 = 0, Gamma = 0, Cp = 0: alpha = beta = 3/2
    m = toy_model(Cp=[[0.0, 0.0]])
    c, g = 1.05, 0.5
    k, ell, lam = 40, 32, 80
    want = k + lam + 2 + math.floor(math.log2(2 * 1.5 * 1.5 * c / (1 - g)))
    assert modulus_bits_lower_bound(m, k, ell, lam, c, g) == want


def test_noD_bound_example():
    # n=2, m=p=1, c/(1-gamma)=1, eps=1, k-ell=0 -> log2(sqrt(2)+2)
    need, raw = fraction_bits_lower_bound_noD(toy_model(), 1.0, 0.5, 0.5, 0)
    assert raw == pytest.approx(math.log2(math.sqrt(2) + 2))
    assert need == 2


def test_eps_halving_adds_one_bit():
    m = demo("demo-pid").model()
    _, r1 = fraction_bits_lower_bound(m, 2**-10, 3.0, 0.9)
    _, r2 = fraction_bits_lower_bound(m, 2**-11, 3.0, 0.9)
    assert r2 - r1 == pytest.approx(1.0)
    _, r1 = fraction_bits_lower_bound_noD(m, 2**-10, 3.0, 0.9, 8)
    _, r2 = fraction_bits_lower_bound_noD(m, 2**-11, 3.0, 0.9, 8)
    assert r2 - r1 == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["demo-pid", "demo-fourtank"])
def test_demo_plans(name):
    cfg = demo(name)
    for ell in ELLS:
        res = plan(EPS, 80, 8, cfg.model(), ell=ell, modulus_bits=256, horizon=50)
        assert res.q.bit_length == 256 and res.modulus_bound < 256
        assert res.kappa == 174


def test_pid_auto_plan():
    cfg = demo("demo-pid")
    res = plan(EPS, 80, 8, cfg.model(), horizon=50)
    assert res.ell_rule == "general" and res.ell <= 32
    assert res.q.q > 2**res.modulus_bound
    tighter = plan(2**-20, 80, 8, cfg.model(), horizon=50)
    assert tighter.ell > res.ell
    assert demo("demo-fourtank").model().D.any() == False  # noqa: E712
    assert plan(EPS, 80, 8, demo("demo-fourtank").model(), horizon=50).ell_rule == "noD"


def test_infinite_eps_gives_ell_one():
    m = toy_model()
    assert plan(math.inf, 8, 4, m).ell == 1


def test_unstable_plan():
    with pytest.raises(PlanError) as ei:
        plan(EPS, 80, 8, toy_model(rho_plant=1.2))
    assert ei.value.kind == "stability"


def test_small_modulus_refused():
    with pytest.raises(PlanError):
        plan(EPS, 80, 8, demo("demo-pid").model(), ell=32, modulus_bits=128)


# --- block companion form ----------------------------------------------------------

def test_companion_is_fixed_point():
    a = [0.1, -0.2, 0.3]
    A = np.array([[0, 0, a[0]], [1, 0, a[1]], [0, 1, a[2]]], dtype=float)
    C = np.array([[0.0, 0.0, 1.0]])
    f = brunovsky_transform(A, C)
    assert f.indices == (3,)
    perm = np.abs(f.P) > 0.5
    assert (perm.sum(axis=0) == 1).all() and (perm.sum(axis=1) == 1).all()
    assert np.allclose(np.abs(f.P), perm, atol=1e-12)
    assert np.allclose(f.A.astype(float), A, atol=1e-12)


def random_observable(rng, n, m, p=1):
    while True:
        A = rng.normal(size=(n, n))
        A *= 0.9 / max(abs(np.linalg.eigvals(A)))
        C = rng.normal(size=(m, n))
        obs = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(n)])
        if np.linalg.matrix_rank(obs) == n and np.linalg.matrix_rank(C) == m:
            return A, rng.normal(size=(n, p)), C, rng.normal(size=(m, p))


def test_structure_random_4x2():
    rng = np.random.default_rng(0)
    A, B, C, D = random_observable(rng, 4, 2)
    f = brunovsky_transform(A, C, B, D)
    A2, C2 = f.A.astype(float), f.C.astype(float)
    assert sum(f.indices) == 4
    pub = f.A_mask != 2
    assert np.allclose(A2[pub], f.A_mask[pub], atol=1e-9)
    # check the structure on the unsnapped similarity transform, too
    Pt = f.P.T
    raw = np.linalg.solve(Pt, A @ Pt)
    assert np.abs(raw[pub] - f.A_mask[pub]).max() < 1e-9
    assert np.abs((C @ Pt)[f.C_mask != 2] - f.C_mask[f.C_mask != 2]).max() < 1e-9
    assert f.secret_count() == int((f.A_mask == 2).sum()) + 4 + int((f.C_mask == 2).sum()) + 2


def simulate(A, B, C, D, x0, ys):
    x, out = np.asarray(x0, dtype=float), []
    for y in ys:
        out.append(C @ x + D @ y)
        x = A @ x + B @ y
    return np.array(out)


@pytest.mark.parametrize("seed", range(5))
def test_transform_reproduces_output(seed):
    rng = np.random.default_rng(100 + seed)
    n, p = int(rng.integers(1, 7)), int(rng.integers(1, 3))
    m = int(rng.integers(1, min(n, 3) + 1))
    A, B, C, D = random_observable(rng, n, m, p)
    f = brunovsky_transform(A, C, B, D)
    x0 = rng.normal(size=n)
    ys = rng.normal(size=(100, p))
    u = simulate(A, B, C, D, x0, ys)
    u2 = simulate(f.A.astype(float), f.B.astype(float), f.C.astype(float), f.D.astype(float), f.transform_state(x0), ys)
    assert np.abs(u - u2).max() < 1e-9


def test_exact_transform_on_dyadic_input():
    cfg = demo("demo-fourtank")
    res = plan(EPS, 80, 8, cfg.model(), ell=32, modulus_bits=256)
    m = res.model
    f = brunovsky_transform(m.A, m.C, m.B, m.D, exact=True)
    assert f.indices == (2, 2)
    assert all(isinstance(v, Fraction) for v in f.A.ravel())


def test_unobservable_rejected():
    with pytest.raises(PlanError):
        brunovsky_transform(np.diag([0.5, 0.5]), [[1.0, 0.0]])
    with pytest.raises(PlanError):
        brunovsky_transform(np.eye(2) * 0.5, [[1.0, 0.0], [2.0, 0.0]])
