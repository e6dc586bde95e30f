"""Dense brute-force checks of the two-level construction on small instances.

Everything here materializes operators as dense arrays, independently of
the matrix-free code in :mod:`contact_tlamg.twolevel`, so the two can be
compared. Instances are capped at ``MAX_ORACLE_DOFS`` unknowns.

Deviations are reported relative to the size of the terms being compared
(Frobenius norms), so one tolerance serves every instance. Comparisons of
matrices that vanish exactly use a fixed scale built from their factors.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .coarse_amg import AmgConfig
from .exceptions import ConfigError, NonConvergedEig
from .saddle import SaddleSystem
from .twolevel import (
    CfSplit,
    CoarseSolverKind,
    InterpolationKind,
    RestrictionKind,
    TwoLevelConfig,
    TwoLevelPreconditioner,
    apply_interpolation,
    apply_restriction,
    build_cf_split,
    smoother_exactF_apply,
)

logger = logging.getLogger(__name__)

MAX_ORACLE_DOFS = 400


def _fro(X: np.ndarray) -> float:
    return float(np.linalg.norm(X))


def _rel(X: np.ndarray, Y: np.ndarray) -> float:
    scale = max(_fro(X), _fro(Y), np.finfo(float).tiny)
    return _fro(X - Y) / scale


def dense_operator(apply: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of a linear map given by its action, one unit vector at a time."""
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(np.asarray(apply(e), dtype=float).ravel())
    return np.column_stack(cols) if cols else np.zeros((0, 0))


# ---------------------------------------------------------------------------
# Snapshot
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DenseSnapshot:
    A: np.ndarray
    split: CfSplit
    eps: float
    A_CC: np.ndarray
    A_CF: np.ndarray
    A_FC: np.ndarray
    A_FF: np.ndarray
    S: np.ndarray
    D: np.ndarray
    M: np.ndarray
    K_SS: np.ndarray
    K_SN: np.ndarray
    P: np.ndarray
    P_hat: np.ndarray
    R_hat: np.ndarray
    P_tilde: np.ndarray
    R_tilde: np.ndarray
    Q: np.ndarray
    BF_inv: np.ndarray
    Bs_inv: np.ndarray
    Bjac_inv: np.ndarray
    D_CC: np.ndarray
    S_tilde: np.ndarray

    @classmethod
    def from_system(cls, sys: SaddleSystem, eps: float = 0.0, max_dofs: int = MAX_ORACLE_DOFS) -> "DenseSnapshot":
        if sys.n > max_dofs:
            raise ConfigError(f"dense oracle is limited to {max_dofs} unknowns, system has {sys.n}")
        split = build_cf_split(sys)
        A = sys.A.toarray()
        C, F, r = split.C, split.F, sys.ranges
        A_CC, A_CF, A_FC, A_FF = A[C, C], A[C, F], A[F, C], A[F, F]
        D, M = sys.D.toarray(), sys.M.toarray()
        K_SS, K_SN = A[r["S"], r["S"]], A[r["S"], r["N"]]
        nN = split.n_interior
        nC, nF = split.n_coarse, split.n_fine

        S = A_CC - A_CF @ np.linalg.solve(A_FF, A_FC)
        P = np.linalg.solve(D, M)
        if eps > 0.0:
            P = np.where(np.abs(P) > eps, P, 0.0)

        P_tilde = np.zeros((sys.n, nC))
        P_tilde[C, :] = np.eye(nC)
        P_tilde[r["S"], nN:] = P
        if eps == 0.0:
            P_hat = np.vstack([np.eye(nC), -np.linalg.solve(A_FF, A_FC)])
            R_hat = np.hstack([np.eye(nC), -np.linalg.solve(A_FF.T, A_CF.T).T])
        else:
            # ideal transfers evaluated with the dropped P
            P_hat = P_tilde.copy()
            DinvT = np.linalg.inv(D).T
            P_hat[r["L"], :nN] = -DinvT @ K_SN
            P_hat[r["L"], nN:] = -DinvT @ K_SS @ P
            R_hat = P_hat.T.copy()

        Q = np.zeros((sys.n, nF))
        Q[F, :] = np.eye(nF)
        BF_inv = Q @ np.linalg.inv(A_FF) @ Q.T

        d_cc = np.diag(A_CC).copy()
        S_tilde = A_FF - A_FC @ (A_CF / d_cc[:, None])
        Bs = np.block([[np.diag(d_cc), A_CF], [A_FC, A_FF]])
        Bs_inv = np.linalg.inv(Bs)

        jac_diag = np.diag(A).copy()
        jac_diag[r["L"]] = 1.0
        Bjac_inv = np.diag(1.0 / jac_diag)

        logger.debug(f"[Oracle] dense snapshot of {sys.name or 'system'}: n={sys.n}, |C|={nC}, |F|={nF}")
        return cls(A=A, split=split, eps=eps, A_CC=A_CC, A_CF=A_CF, A_FC=A_FC, A_FF=A_FF, S=S, D=D, M=M,
                   K_SS=K_SS, K_SN=K_SN, P=P, P_hat=P_hat, R_hat=R_hat, P_tilde=P_tilde,
                   R_tilde=P_tilde.T.copy(), Q=Q, BF_inv=BF_inv, Bs_inv=Bs_inv, Bjac_inv=Bjac_inv,
                   D_CC=d_cc, S_tilde=S_tilde)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def smoother_inverse(self, kind: str) -> np.ndarray:
        table = {"exactf": self.BF_inv, "ssimple": self.Bs_inv, "jac": self.Bjac_inv,
                 "none": np.zeros_like(self.A)}
        if kind not in table:
            raise ConfigError(f"unknown smoother {kind!r}")
        return table[kind]

    def two_level_inverse(self, smoother: str = "exactf", P: Optional[np.ndarray] = None,
                          R: Optional[np.ndarray] = None, coarse_inv: Optional[np.ndarray] = None) -> np.ndarray:
        """Dense M^-1 = B^-1 + P G_H^-1 R (I - A B^-1) of one pre-smoothed cycle."""
        P = self.P_hat if P is None else P
        R = self.R_hat if R is None else R
        if coarse_inv is None:
            coarse_inv = np.linalg.inv(R @ self.A @ P)
        B = self.smoother_inverse(smoother)
        return B + P @ coarse_inv @ R @ (np.eye(self.n) - self.A @ B)


# ---------------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------------
def check_compatibility(snap: DenseSnapshot) -> float:
    """max of ||R^ A Q|| / ||A Q|| and ||Q^T A P^|| / ||Q^T A||."""
    AQ = snap.A @ snap.Q
    QtA = snap.Q.T @ snap.A
    left = _fro(snap.R_hat @ AQ) / _fro(AQ)
    right = _fro(QtA @ snap.P_hat) / _fro(QtA)
    return max(left, right)


def check_galerkin(snap: DenseSnapshot, A_H: Optional[np.ndarray] = None) -> float:
    """R^ A P^ = R^ A P~ = S (and = A_H when given)."""
    ideal = snap.R_hat @ snap.A @ snap.P_hat
    mixed = snap.R_hat @ snap.A @ snap.P_tilde
    devs = [_rel(ideal, snap.S), _rel(mixed, snap.S)]
    if A_H is not None:
        devs.append(_rel(np.asarray(A_H), snap.S))
    return max(devs)


def check_aff_inverse(snap: DenseSnapshot) -> float:
    """Dense A_FF^-1 against [[0, D^-1], [D^-T, -D^-T K_SS D^-1]]."""
    Dinv = np.linalg.inv(snap.D)
    nS = snap.split.n_slave
    closed = np.zeros_like(snap.A_FF)
    closed[:nS, nS:] = Dinv
    closed[nS:, :nS] = Dinv.T
    closed[nS:, nS:] = -Dinv.T @ snap.K_SS @ Dinv
    return _rel(np.linalg.inv(snap.A_FF), closed)


def check_residual_formula(snap: DenseSnapshot, x_s: np.ndarray, b: np.ndarray) -> float:
    """One cycle from smoothed vector x_s with exact coarse solve: actual residual vs the closed form."""
    C, F = snap.split.C, snap.split.F
    f = b - snap.A @ x_s
    e_H = np.linalg.solve(snap.S, snap.R_hat @ f)
    r_actual = b - snap.A @ (x_s + snap.P_hat @ e_H)

    W = np.linalg.solve(snap.A_FF.T, snap.A_CF.T).T  # A_CF A_FF^-1
    xc, xf = x_s[C], x_s[F]
    r_formula = np.concatenate([
        W @ b[F] - snap.A_CF @ xf - W @ (snap.A_FC @ xc),
        b[F] - snap.A_FF @ xf - snap.A_FC @ xc,
    ])
    scale = max(_fro(b), _fro(snap.A @ x_s), np.finfo(float).tiny)
    return _fro(r_actual - r_formula) / scale


def error_propagation(snap: DenseSnapshot, smoother: str = "exactf", P: Optional[np.ndarray] = None,
                      R: Optional[np.ndarray] = None,
                      coarse_inv: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(I - P G^-1 R A)(I - B^-1 A) and the reversed product."""
    P = snap.P_hat if P is None else P
    R = snap.R_hat if R is None else R
    if coarse_inv is None:
        coarse_inv = np.linalg.inv(R @ snap.A @ P)
    I = np.eye(snap.n)
    coarse = I - P @ coarse_inv @ R @ snap.A
    smooth = I - snap.smoother_inverse(smoother) @ snap.A
    return coarse @ smooth, smooth @ coarse


def check_direct_method(snap: DenseSnapshot, smoother: str = "exactf") -> float:
    """Largest entry of either error-propagation ordering (0 for an exact direct method)."""
    pre, post = error_propagation(snap, smoother)
    return float(max(np.abs(pre).max(), np.abs(post).max()))


def check_additive_form(snap: DenseSnapshot, P: Optional[np.ndarray] = None,
                         R: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Compare the additive iteration matrix with the block-factored M and both multiplicative orderings.

    Returns deviations keyed ``m_form``, ``pre`` and ``post``. With ideal
    transfers every one of these matrices vanishes, so deviations are taken
    against ||I - P A_H^-1 R A|| * ||I - B_F^-1 A||, which bounds both
    products, and never against the operands alone.
    """
    P = snap.P_hat if P is None else P
    R = snap.R_hat if R is None else R
    n, nC = snap.n, snap.split.n_coarse
    A_H = R @ snap.A @ P
    I = np.eye(n)
    coarse_term = P @ np.linalg.solve(A_H, R @ snap.A)
    smooth_term = snap.BF_inv @ snap.A
    additive = I - coarse_term - smooth_term

    R_CF, P_FC = R[:, nC:], P[nC:, :]
    upper = np.eye(n)
    upper[:nC, nC:] = -R_CF
    lower = np.eye(n)
    lower[nC:, :nC] = -P_FC
    middle = sla.block_diag(A_H, snap.A_FF)
    M = upper @ middle @ lower
    m_form = I - np.linalg.solve(M, snap.A)

    pre, post = error_propagation(snap, "exactf", P, R, np.linalg.inv(A_H))
    forms = {"m_form": m_form, "pre": pre, "post": post}
    scale = max(_fro(I - coarse_term) * _fro(I - smooth_term), _fro(additive),
                *(_fro(X) for X in forms.values()))
    return {key: _fro(X - additive) / scale for key, X in forms.items()}


def check_e_block(snap: DenseSnapshot, P: Optional[np.ndarray] = None,
                  R: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Rebuild A from [[I, -R_CF], [0, I]] [[A_H, E_CF], [E_FC, A_FF]] [[I, 0], [-P_FC, I]].

    Returns (reconstruction deviation, ||E_CF|| / ||A_CF||). Defaults to the
    simplified-interpolation / ideal-restriction pair.
    """
    P = snap.P_tilde if P is None else P
    R = snap.R_hat if R is None else R
    n, nC = snap.n, snap.split.n_coarse
    R_CF, P_FC = R[:, nC:], P[nC:, :]
    A_H = R @ snap.A @ P
    E_FC = snap.A_FC + snap.A_FF @ P_FC
    E_CF = snap.A_CF + R_CF @ snap.A_FF
    upper = np.eye(n)
    upper[:nC, nC:] = -R_CF
    lower = np.eye(n)
    lower[nC:, :nC] = -P_FC
    rebuilt = upper @ np.block([[A_H, E_CF], [E_FC, snap.A_FF]]) @ lower
    return _rel(rebuilt, snap.A), _fro(E_CF) / _fro(snap.A_CF)


@dataclass(frozen=True)
class ResidualBound:
    residual: float
    bound: float
    delta: float

    @property
    def holds(self) -> bool:
        return self.residual <= self.bound * (1.0 + 1e-10)


def check_residual_bound(snap: DenseSnapshot, delta: float, setting: str = "f_only",
                         rng: Optional[np.random.Generator] = None) -> ResidualBound:
    """One exact-coarse cycle after a smoother whose inner F-residual has 1-norm ``delta``.

    ``setting`` is ``"f_only"`` (x_C = 0, A_FF x_F = b_F - r) or
    ``"ssimple"`` (S~ q = b_F - A_FC D_CC^-1 b_C - r).
    """
    rng = rng or np.random.default_rng(0)
    C, F = snap.split.C, snap.split.F
    b = rng.standard_normal(snap.n)
    w = rng.standard_normal(snap.split.n_fine)
    w *= delta / np.abs(w).sum()

    x_s = np.zeros(snap.n)
    if setting == "f_only":
        x_s[F] = np.linalg.solve(snap.A_FF, b[F] - w)
        inner = b[F] - snap.A_FF @ x_s[F]
    elif setting == "ssimple":
        p = b[C] / snap.D_CC
        rhs = b[F] - snap.A_FC @ p
        q = np.linalg.solve(snap.S_tilde, rhs - w)
        x_s[F] = q
        x_s[C] = p - (snap.A_CF @ q) / snap.D_CC
        inner = rhs - snap.S_tilde @ q
    else:
        raise ConfigError(f"unknown residual-bound setting {setting!r}")

    f = b - snap.A @ x_s
    e_H = np.linalg.solve(snap.S, snap.R_hat @ f)
    r = b - snap.A @ (x_s + snap.P_hat @ e_H)
    W = np.linalg.solve(snap.A_FF.T, snap.A_CF.T).T
    C_const = 1.0 + np.abs(W).sum(axis=0).max()
    measured = float(np.abs(inner).sum())
    return ResidualBound(residual=float(np.abs(r).sum()), bound=float(C_const * measured), delta=measured)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------
def _eigvals(X: np.ndarray) -> np.ndarray:
    try:
        return sla.eigvals(X)
    except sla.LinAlgError as e:
        raise NonConvergedEig(str(e)) from e


def spectrum_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance in the optimal one-to-one matching of two eigenvalue multisets."""
    a, b = np.asarray(a), np.asarray(b)
    if a.size != b.size:
        raise ConfigError(f"spectra of different sizes: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def check_spectrum_matching(snap: DenseSnapshot, coarse_inv: np.ndarray) -> Dict[str, float]:
    """eig(M^-1 A) against {1}^|F| + eig(G_H^-1 S) for the ideal and the simplified interpolation.

    ``coarse_inv`` is the dense matrix of a fixed linear coarse solve G_H^-1.
    """
    expected = np.concatenate([np.ones(snap.split.n_fine), _eigvals(coarse_inv @ snap.S)])
    out = {}
    for name, P in (("ideal", snap.P_hat), ("simplified", snap.P_tilde)):
        Minv = snap.two_level_inverse("exactf", P=P, R=snap.R_hat, coarse_inv=coarse_inv)
        MA = Minv @ snap.A
        out[name] = spectrum_distance(_eigvals(MA), expected)
        out[f"{name}_norm"] = _fro(MA)
    logger.info(f"[Oracle] spectrum distances: ideal {out['ideal']:.2e}, simplified {out['simplified']:.2e}")
    return out


def defective_tolerance(operator_norm: float, floor: float = 1e-6) -> float:
    """Attainable eigenvalue accuracy when the unit eigenvalue has Jordan blocks of size 2.

    Simplified interpolation leaves a nilpotent coupling into the multiplier
    rows. A backward error of eps * ||M^-1 A|| against a coupling of size
    ||M^-1 A|| splits those eigenvalues by up to sqrt(eps) * ||M^-1 A||.
    """
    return max(floor, 10.0 * np.sqrt(np.finfo(float).eps) * operator_norm)


# ---------------------------------------------------------------------------
# Matrix-free fidelity
# ---------------------------------------------------------------------------
def check_matrix_free(snap: DenseSnapshot, pc: TwoLevelPreconditioner, n_vectors: int = 20,
                      seed: int = 0) -> Dict[str, float]:
    """Matrix-free restriction, interpolation and exact F-smoother against dense operators.

    ``snap`` must be built with the drop tolerance of ``pc``.
    """
    rng = np.random.default_rng(seed)
    tr = pc.transfers
    R = snap.R_hat if tr.restriction is RestrictionKind.IDEAL else snap.R_tilde
    P = snap.P_hat if tr.interpolation is InterpolationKind.IDEAL else snap.P_tilde
    worst = {"restriction": 0.0, "interpolation": 0.0, "exact_f": 0.0}
    for _ in range(n_vectors):
        f = rng.standard_normal(snap.n)
        e_H = rng.standard_normal(snap.split.n_coarse)
        worst["restriction"] = max(worst["restriction"], _rel(apply_restriction(pc, f), R @ f))
        worst["interpolation"] = max(worst["interpolation"], _rel(apply_interpolation(pc, e_H), P @ e_H))
        worst["exact_f"] = max(worst["exact_f"], _rel(smoother_exactF_apply(pc, f), snap.BF_inv @ f))
    return worst


# ---------------------------------------------------------------------------
# Full battery
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.tolerance

    def to_dict(self) -> dict:
        return {"check": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


IDENTITY_TOL = 1e-12
DIRECT_TOL = 1e-10
SPECTRUM_TOL = 1e-8
SPECTRUM_AMG_TOL = 1e-6


def run_all_checks(sys: SaddleSystem, amg_config: Optional[AmgConfig] = None,
                   seed: int = 0) -> List[CheckResult]:
    """Every dense identity, bound and spectrum statement on one small system.

    The default AMG keeps a few levels even on tiny coarse operators so the
    AMG spectrum check is not a disguised direct solve.
    """
    amg_config = amg_config or AmgConfig(max_coarse=16)
    rng = np.random.default_rng(seed)
    snap = DenseSnapshot.from_system(sys)
    nC = snap.split.n_coarse
    results: List[CheckResult] = []

    def add(name: str, value: float, tol: float) -> None:
        results.append(CheckResult(name, float(value), tol))

    exact = TwoLevelPreconditioner.setup(sys, TwoLevelConfig(
        interpolation=InterpolationKind.IDEAL, approx_eps=0.0, coarse=CoarseSolverKind.DIRECT))

    add("compatibility", check_compatibility(snap), IDENTITY_TOL)
    add("galerkin", check_galerkin(snap, exact.A_H.toarray()), IDENTITY_TOL)
    add("aff_inverse", check_aff_inverse(snap), IDENTITY_TOL)
    x_s = rng.standard_normal(snap.n)
    b = rng.standard_normal(snap.n)
    add("residual_formula", check_residual_formula(snap, x_s, b), IDENTITY_TOL)
    add("direct_method", check_direct_method(snap, "exactf"), DIRECT_TOL)
    r = b - snap.A @ exact.apply(b)
    add("direct_method_apply", _fro(r) / _fro(b), DIRECT_TOL)

    for pair, (P, R) in (("ideal", (snap.P_hat, snap.R_hat)), ("simplified", (snap.P_tilde, snap.R_hat))):
        additive = check_additive_form(snap, P, R)
        # post-smoothed ordering matches only when Q^T A P = 0
        keys = ("m_form", "pre", "post") if pair == "ideal" else ("m_form", "pre")
        add(f"additive_form[{pair}]", max(additive[k] for k in keys), IDENTITY_TOL)
    recon, e_cf = check_e_block(snap)
    add("e_block_reconstruction", recon, IDENTITY_TOL)
    add("e_block_cf_vanishes", e_cf, IDENTITY_TOL)

    for setting in ("f_only", "ssimple"):
        for delta in (1e-2, 1e-6):
            bound = check_residual_bound(snap, delta=delta, setting=setting, rng=rng)
            add(f"residual_bound[{setting},{delta:g}]", bound.residual / bound.bound, 1.0 + 1e-10)

    amg_pc = TwoLevelPreconditioner.setup(sys, TwoLevelConfig(
        interpolation=InterpolationKind.IDEAL, approx_eps=0.0, amg=amg_config))
    coarse_invs = {
        "exact": (np.linalg.inv(snap.S), SPECTRUM_TOL),
        "diagonal": (np.diag(1.0 / np.diag(snap.S)), SPECTRUM_TOL),
        "amg": (dense_operator(amg_pc.coarse_solve, nC), SPECTRUM_AMG_TOL),
    }
    for gh, (coarse_inv, tol) in coarse_invs.items():
        spectra = check_spectrum_matching(snap, coarse_inv)
        add(f"spectrum_ideal[{gh}]", spectra["ideal"], tol)
        add(f"spectrum_simplified[{gh}]", spectra["simplified"],
            max(tol, defective_tolerance(spectra["simplified_norm"])))

    for interp in InterpolationKind:
        pc = TwoLevelPreconditioner.setup(sys, TwoLevelConfig(
            interpolation=interp, approx_eps=0.0, coarse=CoarseSolverKind.DIRECT))
        worst = check_matrix_free(snap, pc, seed=seed)
        add(f"matrix_free[{interp.value}]", max(worst.values()), IDENTITY_TOL)

    failed = [c.name for c in results if not c.passed]
    if failed:
        logger.warning(f"[Oracle] {sys.name or 'system'}: {len(failed)} checks failed: {', '.join(failed)}")
    else:
        logger.info(f"[Oracle] {sys.name or 'system'}: all {len(results)} checks passed")
    return results
