import numpy as np
import pytest
from scipy import linalg

from impact_curve.model import (
    AssumptionError,
    AttackMap,
    ControllerModel,
    PlantModel,
    attack_map_for,
    build_attack_map,
    closed_loop_under_attack,
    is_observable,
    psd_sqrt,
    riccati_residual,
    simulate_attack,
    spectral_radius,
    steady_state_kalman,
)


def scalar_loop():
    plant = PlantModel(A=[[0.5]], B=[[1.0]], C=[[1.0]])
    ctrl = ControllerModel(K=[[0.2]], L=[[0.1]], Sigma_r=[[1.0]])
    return plant, ctrl


# -- spectral radius ---------------------------------------------------------


def test_spectral_radius_examples(example1):
    assert spectral_radius(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius(np.diag([0.3, -0.9])) == pytest.approx(0.9, abs=1e-12)
    # characteristic polynomial of the example plant: l^2 - 0.96 l + 0.2089
    roots = np.roots([1.0, -0.96, 0.2089])
    assert spectral_radius(example1[0].A) == pytest.approx(max(abs(roots)), abs=1e-8)


def test_spectral_radius_complex_pair():
    rot = np.array([[0.0, -0.8], [0.8, 0.0]])
    assert spectral_radius(rot) == pytest.approx(0.8, abs=1e-12)


# -- constructors --------------------------------------------------------------


def test_plant_defaults():
    plant = PlantModel(A=[[0.5, 0.0], [0.1, 0.2]], B=[[1.0], [0.0]], C=[[1.0, 0.0]])
    assert np.array_equal(plant.Sigma_w, np.zeros((2, 2)))
    assert np.array_equal(plant.Sigma_v, np.eye(1))
    assert (plant.n, plant.q, plant.m) == (2, 1, 1)


def test_plant_rejects_unstable_a():
    with pytest.raises(AssumptionError, match="rho"):
        PlantModel(A=[[1.1]], B=[[1.0]], C=[[1.0]])


def test_plant_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        PlantModel(A=[[0.5]], B=[[1.0], [2.0]], C=[[1.0]])
    with pytest.raises(ValueError):
        PlantModel(A=[[0.5, 0.0], [0.0, 0.5]], B=[[1.0], [1.0]], C=[[1.0]])


def test_plant_rejects_indefinite_noise():
    with pytest.raises(ValueError):
        PlantModel(A=[[0.5]], B=[[1.0]], C=[[1.0]], Sigma_w=[[-1.0]])


def test_controller_requires_spd_residual_covariance():
    with pytest.raises(ValueError):
        ControllerModel(K=[[0.2]], L=[[0.1]], Sigma_r=[[0.0]])


def test_assumption_guards_name_the_failing_matrix():
    plant = PlantModel(A=[[0.5]], B=[[1.0]], C=[[1.0]])
    with pytest.raises(AssumptionError, match="A - BK"):
        closed_loop_under_attack(plant, ControllerModel(K=[[-0.8]], L=[[0.1]], Sigma_r=[[1.0]]))
    with pytest.raises(AssumptionError, match="A - LC"):
        closed_loop_under_attack(plant, ControllerModel(K=[[0.2]], L=[[1.6]], Sigma_r=[[1.0]]))


# -- steady-state Kalman predictor -----------------------------------------------


def test_kalman_memoryless_plant():
    plant = PlantModel(A=[[0.0]], B=[[1.0]], C=[[1.0]], Sigma_w=[[0.7]], Sigma_v=[[0.3]])
    L, Se, Sr = steady_state_kalman(plant)
    assert Se[0, 0] == pytest.approx(0.7, abs=1e-14)
    assert L[0, 0] == pytest.approx(0.0, abs=1e-14)
    assert Sr[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_kalman_without_process_noise(example1):
    L, Se, Sr = steady_state_kalman(example1[0])
    assert np.allclose(Se, 0.0, atol=1e-14)
    assert np.allclose(Sr, np.eye(1), atol=1e-14)


def test_kalman_example_plant_with_noise(example1):
    base = example1[0]
    plant = PlantModel(A=base.A, B=base.B, C=base.C, Sigma_w=0.1 * np.eye(2), Sigma_v=0.5 * np.eye(1))
    L, Se, Sr = steady_state_kalman(plant)
    assert riccati_residual(plant, Se) < 1e-10
    # independent oracle: the discrete algebraic Riccati equation of the dual problem
    P = linalg.solve_discrete_are(plant.A.T, plant.C.T, plant.Sigma_w, plant.Sigma_v)
    assert np.allclose(Se, P, atol=1e-10)
    assert np.allclose(Sr, plant.C @ P @ plant.C.T + plant.Sigma_v, atol=1e-10)
    assert np.allclose(L, plant.A @ P @ plant.C.T @ np.linalg.inv(Sr), atol=1e-10)
    assert spectral_radius(plant.A - L @ plant.C) < 1


def test_kalman_random_systems_match_dare():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, m = rng.integers(1, 5), rng.integers(1, 3)
        A = rng.standard_normal((n, n))
        A *= 0.9 / spectral_radius(A)
        C = rng.standard_normal((m, n))
        W = rng.standard_normal((n, n))
        V = rng.standard_normal((m, m))
        plant = PlantModel(A=A, B=np.ones((n, 1)), C=C, Sigma_w=W @ W.T + 0.01 * np.eye(n), Sigma_v=V @ V.T + 0.1 * np.eye(m))
        _, Se, _ = steady_state_kalman(plant)
        P = linalg.solve_discrete_are(A.T, C.T, plant.Sigma_w, plant.Sigma_v)
        assert np.allclose(Se, P, atol=1e-9 * max(1.0, np.abs(P).max()))
        assert riccati_residual(plant, Se) < 1e-9 * max(1.0, np.abs(P).max())


def test_kalman_requires_observability():
    plant = PlantModel(A=[[0.5, 0.0], [0.0, 0.4]], B=[[1.0], [1.0]], C=[[1.0, 0.0]], Sigma_w=np.eye(2))
    assert not is_observable(plant.A, plant.C)
    with pytest.raises(AssumptionError, match="observable"):
        steady_state_kalman(plant)


# -- closed loop and attack map ---------------------------------------------------


def test_closed_loop_scalar_example():
    F, G = closed_loop_under_attack(*scalar_loop())
    assert np.allclose(F, [[0.3, 0.2], [0.0, 0.5]], atol=1e-15)
    assert np.allclose(G, [[0.0], [-0.1]], atol=1e-15)


def test_closed_loop_example_system(example1):
    plant, ctrl = example1
    F, G = closed_loop_under_attack(plant, ctrl)
    assert F.shape == (4, 4)
    assert np.allclose(F[:2, :2], plant.A - plant.B @ ctrl.K)
    assert np.allclose(F[:2, 2:], plant.B @ ctrl.K)
    assert np.allclose(F[2:, :2], 0.0)
    assert np.allclose(F[2:, 2:], plant.A)
    assert spectral_radius(F) < 1


def test_closed_loop_zero_input_matrix():
    plant = PlantModel(A=[[0.5, 0.1], [0.0, 0.3]], B=np.zeros((2, 1)), C=[[1.0, 0.0]])
    ctrl = ControllerModel(K=[[0.4, 0.2]], L=[[0.2], [0.0]], Sigma_r=[[1.0]])
    F, _ = closed_loop_under_attack(plant, ctrl)
    assert np.allclose(F[:2, :2], plant.A)
    assert np.allclose(F[2:, 2:], plant.A)
    assert np.allclose(F[:2, 2:], 0.0)


def test_attack_map_scalar_examples():
    plant, ctrl = scalar_loop()
    one = attack_map_for(plant, ctrl, 1)
    assert np.array_equal(one.H, [[0.0]])
    two = attack_map_for(plant, ctrl, 2)
    assert np.allclose(two.H, [[-0.02, 0.0]], atol=1e-15)
    F, G = closed_loop_under_attack(plant, ctrl)
    traj = simulate_attack(F, G, np.eye(1), [1.0, 0.0], 2)
    assert traj[2, 0] == pytest.approx(-0.02, abs=1e-15)


def test_attack_map_rejects_zero_horizon():
    F, G = closed_loop_under_attack(*scalar_loop())
    with pytest.raises(ValueError):
        build_attack_map(F, G, np.eye(1), 0)


def test_attack_map_block_norms():
    rng = np.random.default_rng(5)
    H = rng.standard_normal((3, 8))
    amap = AttackMap(H=H, N=4, m=2, sigma_r_sqrt=np.eye(2))
    for i in range(3):
        for j in range(4):
            assert amap.block_norms[i, j] == pytest.approx(np.linalg.norm(H[i, 2 * j:2 * j + 2]), abs=1e-12)
    with pytest.raises(ValueError):
        AttackMap(H=H, N=3, m=2, sigma_r_sqrt=np.eye(2))


def test_simulation_equivalence_random_systems(random_loop):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n, m, N = int(rng.integers(1, 5)), int(rng.integers(1, 3)), int(rng.integers(1, 21))
        plant, ctrl = random_loop(rng, n, m)
        R = rng.standard_normal((m, m))
        ctrl = ControllerModel(K=ctrl.K, L=ctrl.L, Sigma_r=R @ R.T + 0.2 * np.eye(m))
        amap = attack_map_for(plant, ctrl, N)
        F, G = closed_loop_under_attack(plant, ctrl)
        a = rng.standard_normal(N * m)
        traj = simulate_attack(F, G, psd_sqrt(ctrl.Sigma_r), a, N)
        worst = max(worst, float(np.max(np.abs(amap.H @ a - traj[N, :n]))))
    assert worst <= 1e-9


def test_simulation_equivalence_three_state_many_attacks(random_loop):
    rng = np.random.default_rng(7)
    plant, ctrl = random_loop(rng, 3, 1)
    amap = attack_map_for(plant, ctrl, 10)
    F, G = closed_loop_under_attack(plant, ctrl)
    for _ in range(100):
        a = rng.standard_normal(10)
        traj = simulate_attack(F, G, np.eye(1), a, 10)
        assert np.max(np.abs(amap.H @ a - traj[10, :3])) <= 1e-9


def test_psd_sqrt_clips_negative_eigenvalues():
    S = psd_sqrt([[4.0, 0.0], [0.0, -1e-14]])
    assert np.allclose(S, [[2.0, 0.0], [0.0, 0.0]])
    R = np.array([[2.0, 0.5], [0.5, 1.0]])
    root = psd_sqrt(R)
    assert np.allclose(root @ root, R, atol=1e-14)
    assert np.allclose(root, root.T)

