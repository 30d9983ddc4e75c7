"""Plant, observer-based controller and the attack-to-state map.

Under a stealthy sensor attack that cancels the residual and replaces it with
``r_a[k] = Sigma_r^(1/2) a[k]``, the stacked state ``z = [x_a; e_a]`` evolves as

    z[k+1] = F z[k] + G r_a[k],   F = [[A - BK, BK], [0, A]],   G = [[0], [-L]].

``build_attack_map`` collapses ``N`` steps of this recursion into the matrix
``H`` with ``x_a[N] = H a`` for the stacked attack ``a = [a[0]; ...; a[N-1]]``.
"""

from dataclasses import dataclass, field

import numpy as np

PSD_TOL = 1e-10


class AssumptionError(ValueError):
    """A model violates one of the stability/observability assumptions."""


def _as_matrix(value, name):
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} contains non-finite entries")
    return mat


def _check_psd(mat, name):
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() < -PSD_TOL:
        raise ValueError(f"{name} must be positive semidefinite")


def spectral_radius(mat):
    """Largest eigenvalue modulus of a square matrix."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Sigma_w: np.ndarray = None
    Sigma_v: np.ndarray = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        B = _as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {B.shape}")
        C = _as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {C.shape}")
        m = C.shape[0]
        Sw = np.zeros((n, n)) if self.Sigma_w is None else _as_matrix(self.Sigma_w, "Sigma_w")
        Sv = np.eye(m) if self.Sigma_v is None else _as_matrix(self.Sigma_v, "Sigma_v")
        if Sw.shape != (n, n):
            raise ValueError(f"Sigma_w must be {n}x{n}")
        if Sv.shape != (m, m):
            raise ValueError(f"Sigma_v must be {m}x{m}")
        _check_psd(Sw, "Sigma_w")
        _check_psd(Sv, "Sigma_v")
        rho = spectral_radius(A)
        if rho >= 1.0:
            raise AssumptionError(
                f"rho(A) = {rho:.6g} >= 1: the attacked estimation error grows without bound"
            )
        for name, val in (("A", A), ("B", B), ("C", C), ("Sigma_w", Sw), ("Sigma_v", Sv)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.B.shape[1]

    @property
    def m(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class ControllerModel:
    K: np.ndarray
    L: np.ndarray
    Sigma_r: np.ndarray

    def __post_init__(self):
        K = _as_matrix(self.K, "K")
        L = _as_matrix(self.L, "L")
        Sr = _as_matrix(self.Sigma_r, "Sigma_r")
        m = L.shape[1]
        if Sr.shape != (m, m):
            raise ValueError(f"Sigma_r must be {m}x{m} to match L, got {Sr.shape}")
        if not np.allclose(Sr, Sr.T, atol=1e-12):
            raise ValueError("Sigma_r must be symmetric")
        if np.linalg.eigvalsh(Sr).min() <= 0:
            raise ValueError("Sigma_r must be positive definite")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Sigma_r", Sr)


@dataclass(frozen=True)
class AttackMap:
    """Terminal-state response ``x_a[N] = H a`` with per-step row blocks.

    ``block_norms[i, j]`` is the Euclidean norm of row ``i`` of ``H``
    restricted to column block ``j`` (the entries multiplying ``a[j]``).
    """

    H: np.ndarray
    N: int
    m: int
    sigma_r_sqrt: np.ndarray
    block_norms: np.ndarray = field(init=False)

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if self.N < 1 or self.m < 1:
            raise ValueError("N and m must be positive")
        if H.shape[1] != self.N * self.m:
            raise ValueError(f"H must have N*m = {self.N * self.m} columns, got {H.shape[1]}")
        blocks = H.reshape(H.shape[0], self.N, self.m)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "sigma_r_sqrt", np.atleast_2d(np.asarray(self.sigma_r_sqrt, float)))
        object.__setattr__(self, "block_norms", np.linalg.norm(blocks, axis=2))

    @property
    def n(self):
        return self.H.shape[0]

    def block(self, row, step):
        return self.H[row, step * self.m:(step + 1) * self.m]


def observability_matrix(A, C):
    n = A.shape[0]
    rows = [C]
    for _ in range(n - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def is_observable(A, C):
    return np.linalg.matrix_rank(observability_matrix(A, C)) == A.shape[0]


def steady_state_kalman(plant, tol=1e-12, max_iter=1_000_000):
    """Steady-state Kalman predictor by fixed-point Riccati iteration.

    Iterates ``S <- A S A' + Sigma_w - A S C' (C S C' + Sigma_v)^-1 C S A'``
    from ``S = Sigma_w`` until successive iterates differ by less than ``tol``
    in max-abs entry.

    Returns:
        (L, Sigma_e, Sigma_r) with ``L = A S C' (C S C' + Sigma_v)^-1`` and
        ``Sigma_r = C S C' + Sigma_v``.
    """
    A, C, Sw, Sv = plant.A, plant.C, plant.Sigma_w, plant.Sigma_v
    if not is_observable(A, C):
        raise AssumptionError("(A, C) is not observable")
    S = Sw.copy()
    for _ in range(max_iter):
        innov = C @ S @ C.T + Sv
        gain = A @ S @ C.T @ np.linalg.inv(innov)
        S_next = A @ S @ A.T + Sw - gain @ innov @ gain.T
        S_next = 0.5 * (S_next + S_next.T)
        if np.max(np.abs(S_next - S)) < tol:
            S = S_next
            break
        S = S_next
    else:
        raise RuntimeError(f"Riccati iteration did not converge in {max_iter} iterations")
    Sigma_r = C @ S @ C.T + Sv
    L = A @ S @ C.T @ np.linalg.inv(Sigma_r)
    return L, S, Sigma_r


def riccati_residual(plant, Sigma_e):
    """Max-abs residual of the predictor Riccati equation at ``Sigma_e``."""
    A, C, Sw, Sv = plant.A, plant.C, plant.Sigma_w, plant.Sigma_v
    innov = C @ Sigma_e @ C.T + Sv
    rhs = A @ Sigma_e @ A.T + Sw - A @ Sigma_e @ C.T @ np.linalg.solve(innov, C @ Sigma_e @ A.T)
    return float(np.max(np.abs(rhs - Sigma_e)))


def check_assumptions(plant, ctrl):
    """Raise ``AssumptionError`` unless A - BK and A - LC are Schur stable."""
    if ctrl.K.shape != (plant.q, plant.n):
        raise ValueError(f"K must be {plant.q}x{plant.n}, got {ctrl.K.shape}")
    if ctrl.L.shape != (plant.n, plant.m):
        raise ValueError(f"L must be {plant.n}x{plant.m}, got {ctrl.L.shape}")
    rho_k = spectral_radius(plant.A - plant.B @ ctrl.K)
    if rho_k >= 1.0:
        raise AssumptionError(f"rho(A - BK) = {rho_k:.6g} >= 1")
    rho_l = spectral_radius(plant.A - ctrl.L @ plant.C)
    if rho_l >= 1.0:
        raise AssumptionError(f"rho(A - LC) = {rho_l:.6g} >= 1")


def closed_loop_under_attack(plant, ctrl, check=True):
    """Return ``(F, G)`` of the attacked closed loop in ``[x_a; e_a]`` coordinates."""
    if check:
        check_assumptions(plant, ctrl)
    elif ctrl.L.shape != (plant.n, plant.m) or ctrl.K.shape != (plant.q, plant.n):
        raise ValueError("controller gains do not match plant dimensions")
    n = plant.n
    BK = plant.B @ ctrl.K
    F = np.block([[plant.A - BK, BK], [np.zeros((n, n)), plant.A]])
    G = np.vstack([np.zeros((n, plant.m)), -ctrl.L])
    return F, G


def psd_sqrt(mat, clip=1e-12):
    """Symmetric square root with eigenvalues below ``clip`` set to zero."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    w, V = np.linalg.eigh(0.5 * (mat + mat.T))
    w = np.where(w < clip, 0.0, w)
    return (V * np.sqrt(w)) @ V.T


def build_attack_map(F, G, Sigma_r_sqrt, N):
    """Stack ``N`` steps of the attacked loop into ``H`` (plant rows only).

    Column block ``j`` of ``H`` is the ``x_a`` part of ``F^(N-1-j) G Sigma_r^(1/2)``.
    """
    if N < 1:
        raise ValueError("attack horizon N must be >= 1")
    F = np.asarray(F, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    S = np.atleast_2d(np.asarray(Sigma_r_sqrt, dtype=float))
    n2 = F.shape[0]
    if F.shape != (n2, n2) or n2 % 2 or G.shape[0] != n2:
        raise ValueError("F must be 2n x 2n and G must have 2n rows")
    m = G.shape[1]
    if S.shape != (m, m):
        raise ValueError(f"Sigma_r_sqrt must be {m}x{m}")
    n = n2 // 2
    blocks = [None] * N
    power_times_input = G @ S
    for j in range(N - 1, -1, -1):
        blocks[j] = power_times_input[:n]
        power_times_input = F @ power_times_input
    return AttackMap(H=np.hstack(blocks), N=N, m=m, sigma_r_sqrt=S)


def simulate_attack(F, G, Sigma_r_sqrt, a, N):
    """Step the attacked loop from zero state; returns the ``(N+1, 2n)`` trajectory."""
    F = np.asarray(F, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    S = np.atleast_2d(np.asarray(Sigma_r_sqrt, dtype=float))
    m = G.shape[1]
    a = np.asarray(a, dtype=float).reshape(N, m)
    z = np.zeros((N + 1, F.shape[0]))
    for k in range(N):
        z[k + 1] = F @ z[k] + G @ (S @ a[k])
    return z


def attack_map_for(plant, ctrl, N):
    """Convenience: closed loop + PSD square root of Sigma_r + ``H``."""
    F, G = closed_loop_under_attack(plant, ctrl)
    return build_attack_map(F, G, psd_sqrt(ctrl.Sigma_r), N)


def example1_system():
    """The two-state, single-sensor benchmark loop with noise set aside.

    ``Sigma_w = 0`` and ``Sigma_v = 1`` give ``Sigma_r = 1``; the gains are
    taken as given rather than recomputed.
    """
    plant = PlantModel(
        A=[[0.84, 0.23], [-0.47, 0.12]],
        B=[[0.07], [0.23]],
        C=[[1.0, 0.0]],
        Sigma_w=np.zeros((2, 2)),
        Sigma_v=np.eye(1),
    )
    ctrl = ControllerModel(K=[[1.85, 0.96]], L=[[0.25], [-0.18]], Sigma_r=np.eye(1))
    return plant, ctrl
