"""Canonical reduction of the Gaussian regression prediction problem.

Observed data follow y ~ N_n(X beta, sigma^2 I) and the prediction target
follows ytilde ~ N_m(Xtilde beta, sigma^2 I).  This module rotates the
problem into canonical coordinates in which the sufficient statistics are
an l-vector V with diagonal covariance D (l = min(k, m)), an auxiliary
(k - l)-vector V* with identity covariance, and an independent residual
sum of squares S.  The future observation then has mean Q theta with Q
column-orthonormal, which is the form the density and risk modules work in.

Two constructions are used.  When m >= k a nonsingular matrix M
simultaneously diagonalizes (X'X)^{-1} and Xtilde'Xtilde.  When m < k an
orthogonal matrix diagonalizes the covariance of Xtilde beta_hat and the
coefficient space is completed with a whitened complement that is
uncorrelated with it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "RankDeficiencyError",
    "RegressionData",
    "SufficientStats",
    "CanonicalProblem",
    "CanonicalObservation",
    "CanonicalParams",
    "replication_rng",
    "sufficient_statistics",
    "canonicalize",
    "as1_design",
    "as1_problem",
    "to_canonical",
    "params_to_canonical",
    "simulate_observation",
    "invariant_report",
    "problem_to_dict",
    "problem_from_dict",
    "load_design",
]

COND_WARN_THRESHOLD = 1e12

# Stream tags for the counter-based generator; each consumer of randomness
# gets its own 2^192-draw slice of the keyed counter space, so streams
# sharing a (seed, rep) key never overlap.
STREAM_OBSERVATION = 0
STREAM_DIVERGENCE = 1
STREAM_NORMALIZATION = 2
STREAM_IDENTITY = 3
STREAM_DESIGN = 4

_U64 = (1 << 64) - 1


class RankDeficiencyError(ValueError):
    """Design matrix rank deficient beyond tolerance."""


def replication_rng(master_seed: int, rep_index: int = 0, stream: int = STREAM_OBSERVATION) -> Generator:
    """Counter-based generator keyed by (master_seed, rep_index).

    Distinct (seed, rep) pairs map to distinct Philox keys, so replications
    are reproducible independently of execution order and may run
    concurrently without coordination.  ``stream`` separates independent
    uses of the same key (observation sampling, inner divergence draws,
    normalization draws) by offsetting the counter.
    """
    key = ((int(master_seed) & _U64) << 64) | (int(rep_index) & _U64)
    return Generator(Philox(key=key, counter=int(stream) << 192))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RegressionData:
    """Raw regression inputs: design X (n x k), response y, future design Xtilde (m x k)."""

    X: np.ndarray
    y: np.ndarray
    Xtilde: np.ndarray

    def __post_init__(self):
        X = _freeze(self.X)
        y = _freeze(self.y).ravel()
        Xt = _freeze(np.atleast_2d(self.Xtilde))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "Xtilde", Xt)
        n, k = X.shape
        if not (n > k >= 1):
            raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
        if y.shape != (n,):
            raise ValueError("y length must match rows of X")
        if Xt.shape[1] != k:
            raise ValueError("Xtilde must have the same number of columns as X")
        for name, a in (("X", X), ("y", y), ("Xtilde", Xt)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.linalg.matrix_rank(X) < k:
            raise RankDeficiencyError("X is rank deficient")
        m = Xt.shape[0]
        if np.linalg.matrix_rank(Xt) < min(m, k):
            raise RankDeficiencyError("Xtilde is rank deficient")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.Xtilde.shape[0]


@dataclass(frozen=True)
class SufficientStats:
    """Least squares estimate and residual sum of squares."""

    beta_hat_u: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "beta_hat_u", _freeze(self.beta_hat_u).ravel())
        object.__setattr__(self, "s", float(self.s))
        if self.s < 0:
            raise ValueError("residual sum of squares must be nonnegative")


@dataclass(frozen=True)
class CanonicalProblem:
    """Reduced geometry of the prediction problem.

    ``d`` holds the diagonal of D (nonincreasing, positive), ``Q`` is the
    m x l column-orthonormal mean map of the future observation, and
    ``coef_transform`` is the k x k matrix T with (V; V*) = T beta_hat and
    (theta; mu) = T beta.  Case "I" (m >= k) stores the simultaneous
    diagonalizer ``M``; case "II" (m < k) stores the rotation ``P``, the
    whitener ``P_star`` and the complement rows ``Xtilde_star``.
    """

    n: int
    k: int
    m: int
    d: np.ndarray
    Q: np.ndarray
    case: str
    coef_transform: np.ndarray
    M: np.ndarray | None = None
    P: np.ndarray | None = None
    P_star: np.ndarray | None = None
    Xtilde_star: np.ndarray | None = None
    cond_xtx: float = 1.0
    conditioning_warning: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "d", _freeze(self.d).ravel())
        object.__setattr__(self, "Q", _freeze(self.Q))
        object.__setattr__(self, "coef_transform", _freeze(self.coef_transform))
        for name in ("M", "P", "P_star", "Xtilde_star"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _freeze(val))
        if self.case not in ("I", "II"):
            raise ValueError("case must be 'I' or 'II'")
        l = self.l
        if self.d.shape != (l,) or np.any(self.d <= 0):
            raise ValueError("d must be a positive l-vector")
        if np.any(np.diff(self.d) > 0):
            raise ValueError("d must be nonincreasing")
        if self.Q.shape != (self.m, l):
            raise ValueError("Q must be m x l")
        if np.abs(self.Q.T @ self.Q - np.eye(l)).max() > 1e-8:
            raise ValueError("Q must have orthonormal columns")

    @property
    def l(self) -> int:
        return min(self.k, self.m)

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.d)


@dataclass(frozen=True)
class CanonicalObservation:
    """Sufficient statistics in canonical coordinates: V, V*, S."""

    v: np.ndarray
    v_star: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "v", _freeze(self.v).ravel())
        object.__setattr__(self, "v_star", _freeze(self.v_star).ravel())
        object.__setattr__(self, "s", float(self.s))
        if self.s < 0:
            raise ValueError("s must be nonnegative")


@dataclass(frozen=True)
class CanonicalParams:
    """Canonical parameters: theta (l-vector), mu ((k-l)-vector), precision eta."""

    theta: np.ndarray
    mu: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _freeze(self.theta).ravel())
        object.__setattr__(self, "mu", _freeze(self.mu).ravel())
        object.__setattr__(self, "eta", float(self.eta))
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def sigma2(self) -> float:
        return 1.0 / self.eta


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def sufficient_statistics(data: RegressionData) -> SufficientStats:
    """Least squares coefficients and residual sum of squares.

    Solves the normal equations through a Cholesky factorization of X'X.
    """
    X, y = data.X, data.y
    xtx = X.T @ X
    try:
        cf = cho_factor(xtx)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rank guard above
        raise RankDeficiencyError("X'X is singular") from exc
    beta = cho_solve(cf, X.T @ y)
    resid = y - X @ beta
    return SufficientStats(beta_hat_u=beta, s=float(resid @ resid))


def _fix_column_signs(U: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the first nonzero entry is positive."""
    U = U.copy()
    for j in range(U.shape[1]):
        col = U[:, j]
        scale = np.abs(col).max()
        nz = np.flatnonzero(np.abs(col) > 1e-12 * scale)
        if nz.size and col[nz[0]] < 0:
            U[:, j] = -col
    return U


def _sorted_eigh(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition, eigenvalues nonincreasing, stable ties."""
    w, U = np.linalg.eigh(0.5 * (G + G.T))
    order = np.argsort(-w, kind="stable")
    return w[order], _fix_column_signs(U[:, order])


def canonicalize(X: np.ndarray, Xtilde: np.ndarray, cond_threshold: float = COND_WARN_THRESHOLD) -> CanonicalProblem:
    """Reduce the design pair (X, Xtilde) to canonical form.

    Parameters
    ----------
    X : (n, k) array
        Observed design, full column rank.
    Xtilde : (m, k) array
        Future design, rank min(m, k).
    cond_threshold : float
        Condition number of X'X above which a conditioning warning is
        attached to the result (the reduction still runs).

    Returns
    -------
    CanonicalProblem
        Case "I" when m >= k, case "II" otherwise.
    """
    X = np.asarray(X, dtype=float)
    Xtilde = np.atleast_2d(np.asarray(Xtilde, dtype=float))
    n, k = X.shape
    m = Xtilde.shape[0]
    if Xtilde.shape[1] != k:
        raise ValueError("Xtilde must have k columns")
    if not (n > k >= 1):
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficiencyError("X is rank deficient")
    if np.linalg.matrix_rank(Xtilde) < min(m, k):
        raise RankDeficiencyError("Xtilde is rank deficient")

    xtx = X.T @ X
    cond = float(np.linalg.cond(xtx))
    warning = None
    if cond > cond_threshold:
        warning = f"condition number of X'X is {cond:.3e}, above {cond_threshold:.1e}"
    cf = cho_factor(xtx)
    xtx_inv = cho_solve(cf, np.eye(k))
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)

    if m >= k:
        # Simultaneous diagonalization: with R'R = Xtilde'Xtilde and
        # G = R (X'X)^{-1} R' = U Delta U', the matrix M = R'U satisfies
        # M'(X'X)^{-1}M = Delta and MM' = Xtilde'Xtilde.
        at = Xtilde.T @ Xtilde
        L = np.linalg.cholesky(at)
        R = L.T
        G = R @ xtx_inv @ R.T
        d, U = _sorted_eigh(G)
        M = R.T @ U
        # Q = Xtilde (M')^{-1}; solve M Q' = Xtilde'.
        Q = np.linalg.solve(M, Xtilde.T).T
        return CanonicalProblem(
            n=n, k=k, m=m, d=d, Q=Q, case="I",
            coef_transform=M.T, M=M,
            cond_xtx=cond, conditioning_warning=warning,
        )

    # Case II: rotate the future mean space, then complete the coefficient
    # space with rows orthogonal to it under the (X'X)^{-1} inner product.
    B = Xtilde @ xtx_inv @ Xtilde.T
    d, P = _sorted_eigh(B)
    _, _, vt = np.linalg.svd(Xtilde @ xtx_inv)
    xts = _fix_column_signs(vt[m:].T).T  # (k - m) orthonormal rows spanning the null space
    Kmat = xts @ xtx_inv @ xts.T
    kw, kU = _sorted_eigh(Kmat)
    P_star = kU @ np.diag(kw**-0.5) @ kU.T  # symmetric whitener: P*' K P* = I
    transform = np.vstack([P.T @ Xtilde, P_star.T @ xts])
    return CanonicalProblem(
        n=n, k=k, m=m, d=d, Q=P, case="II",
        coef_transform=transform, P=P, P_star=P_star, Xtilde_star=xts,
        cond_xtx=cond, conditioning_warning=warning,
    )


def as1_design(Xtilde: np.ndarray, N: int) -> np.ndarray:
    """Replicated design: N stacked copies of Xtilde, so X'X = N Xtilde'Xtilde."""
    Xtilde = np.atleast_2d(np.asarray(Xtilde, dtype=float))
    if N < 1:
        raise ValueError("N must be a positive integer")
    return np.tile(Xtilde, (int(N), 1))


def as1_problem(Xtilde: np.ndarray, N: int) -> CanonicalProblem:
    """Canonical problem for the replicated design, with D = I/N held exactly.

    Under X = (Xtilde; ...; Xtilde) every eigenvalue of the canonical
    covariance equals 1/N, M is the symmetric square root of Xtilde'Xtilde
    and Q is the polar factor of Xtilde.  Building these in closed form
    keeps D exact instead of passing through a generic eigensolve.
    """
    Xtilde = np.atleast_2d(np.asarray(Xtilde, dtype=float))
    m, k = Xtilde.shape
    if m < k:
        raise ValueError("replicated design requires m >= k")
    if np.linalg.matrix_rank(Xtilde) < k:
        raise RankDeficiencyError("Xtilde is rank deficient")
    if N < 1:
        raise ValueError("N must be a positive integer")
    U, sv, Vt = np.linalg.svd(Xtilde, full_matrices=False)
    M = Vt.T @ np.diag(sv) @ Vt
    Q = U @ Vt  # polar factor Xtilde (Xtilde'Xtilde)^{-1/2}, exactly orthonormal
    d = np.full(k, 1.0 / N)
    n = m * int(N)
    cond = float((sv.max() / sv.min()) ** 2)
    warning = None
    if cond > COND_WARN_THRESHOLD:
        warning = f"condition number of X'X is {cond:.3e}, above {COND_WARN_THRESHOLD:.1e}"
    return CanonicalProblem(
        n=n, k=k, m=m, d=d, Q=Q, case="I",
        coef_transform=M.T, M=M, cond_xtx=cond, conditioning_warning=warning,
    )


def to_canonical(problem: CanonicalProblem, stats: SufficientStats) -> CanonicalObservation:
    """Map (beta_hat, S) into canonical coordinates."""
    beta = stats.beta_hat_u
    if beta.shape != (problem.k,):
        raise ValueError(f"beta_hat has length {beta.shape[0]}, expected k={problem.k}")
    w = problem.coef_transform @ beta
    l = problem.l
    return CanonicalObservation(v=w[:l], v_star=w[l:], s=stats.s)


def params_to_canonical(problem: CanonicalProblem, beta: np.ndarray, sigma2: float) -> CanonicalParams:
    """Map (beta, sigma2) into canonical coordinates."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape != (problem.k,):
        raise ValueError(f"beta has length {beta.shape[0]}, expected k={problem.k}")
    w = problem.coef_transform @ beta
    l = problem.l
    return CanonicalParams(theta=w[:l], mu=w[l:], eta=1.0 / sigma2)


def simulate_observation(
    problem: CanonicalProblem,
    params: CanonicalParams,
    seed: int,
    rep_index: int = 0,
) -> CanonicalObservation:
    """Draw one canonical observation: V, V* Gaussian, eta*S chi-square.

    Deterministic given (seed, rep_index); distinct replication indices use
    independent Philox keys and can be drawn concurrently.
    """
    l = problem.l
    if params.theta.shape != (l,) or params.mu.shape != (problem.k - l,):
        raise ValueError("params dimensions do not match problem")
    rng = replication_rng(seed, rep_index, stream=STREAM_OBSERVATION)
    eta = params.eta
    v = params.theta + np.sqrt(problem.d / eta) * rng.standard_normal(l)
    v_star = params.mu + np.sqrt(1.0 / eta) * rng.standard_normal(problem.k - l)
    s = rng.gamma((problem.n - problem.k) / 2.0, 2.0) / eta
    return CanonicalObservation(v=v, v_star=v_star, s=s)


# ---------------------------------------------------------------------------
# Invariant checking and serialization
# ---------------------------------------------------------------------------


def invariant_report(problem: CanonicalProblem, X: np.ndarray, Xtilde: np.ndarray) -> dict:
    """Numeric residuals of the defining equations of a canonical problem.

    Returns a dict with one entry per invariant: {"value": gap, "tol": tol,
    "pass": bool}, plus an overall "all_pass" flag.
    """
    X = np.asarray(X, dtype=float)
    Xtilde = np.atleast_2d(np.asarray(Xtilde, dtype=float))
    xtx_inv = np.linalg.inv(X.T @ X)
    l = problem.l
    checks: dict[str, dict] = {}

    def add(name, value, tol):
        checks[name] = {"value": float(value), "tol": float(tol), "pass": bool(value <= tol)}

    add("q_orthonormality", np.abs(problem.Q.T @ problem.Q - np.eye(l)).max(), 1e-10)
    add("d_nonincreasing", max(0.0, float(np.max(np.diff(problem.d), initial=0.0))), 0.0)
    if problem.case == "I":
        M = problem.M
        at = Xtilde.T @ Xtilde
        add("mm_matches_xtxt", np.linalg.norm(M @ M.T - at) / np.linalg.norm(at), 1e-8)
        G = M.T @ xtx_inv @ M
        scale = np.abs(np.diag(G)).max()
        off = np.abs(G - np.diag(np.diag(G))).max() / scale
        add("m_diagonalizes", off, 1e-8)
        add("d_matches_eigenvalues", np.abs(np.diag(G) - problem.d).max() / scale, 1e-8)
    else:
        P, xts, P_star = problem.P, problem.Xtilde_star, problem.P_star
        G = P.T @ (Xtilde @ xtx_inv @ Xtilde.T) @ P
        scale = np.abs(np.diag(G)).max()
        off = np.abs(G - np.diag(np.diag(G))).max() / scale if l > 1 else 0.0
        add("p_diagonalizes", off, 1e-8)
        add("d_matches_eigenvalues", np.abs(np.diag(G) - problem.d).max() / scale, 1e-8)
        add("complement_uncorrelated", np.abs(Xtilde @ xtx_inv @ xts.T).max(), 1e-8)
        add("complement_whitened", np.abs(P_star.T @ (xts @ xtx_inv @ xts.T) @ P_star - np.eye(problem.k - l)).max(), 1e-8)
    checks["all_pass"] = all(c["pass"] for c in checks.values() if isinstance(c, dict))
    return checks


def problem_to_dict(problem: CanonicalProblem) -> dict:
    """JSON-ready dict with matrices as row-major nested lists."""
    out = {
        "n": problem.n,
        "k": problem.k,
        "m": problem.m,
        "l": problem.l,
        "case": problem.case,
        "d": problem.d.tolist(),
        "Q": problem.Q.tolist(),
        "coef_transform": problem.coef_transform.tolist(),
        "cond_xtx": problem.cond_xtx,
        "conditioning_warning": problem.conditioning_warning,
    }
    for name in ("M", "P", "P_star", "Xtilde_star"):
        val = getattr(problem, name)
        out[name] = None if val is None else val.tolist()
    return out


def problem_from_dict(doc: dict) -> CanonicalProblem:
    def arr(key, allow_none=False):
        val = doc.get(key)
        if val is None:
            if allow_none:
                return None
            raise ValueError(f"problem document is missing '{key}'")
        return np.asarray(val, dtype=float)

    return CanonicalProblem(
        n=int(doc["n"]), k=int(doc["k"]), m=int(doc["m"]),
        d=arr("d"), Q=arr("Q"), case=doc["case"],
        coef_transform=arr("coef_transform"),
        M=arr("M", allow_none=True), P=arr("P", allow_none=True),
        P_star=arr("P_star", allow_none=True), Xtilde_star=arr("Xtilde_star", allow_none=True),
        cond_xtx=float(doc.get("cond_xtx", 1.0)),
        conditioning_warning=doc.get("conditioning_warning"),
    )


def load_design(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read (X, Xtilde, y) from a JSON document or X from a dense CSV.

    JSON documents carry keys "X" and "Xtilde" (row-major nested lists) and
    optionally "y".  A path ending in .csv is read as the X matrix alone.
    """
    if path.endswith(".csv"):
        X = np.atleast_2d(np.loadtxt(path, delimiter=","))
        return X, None, None
    with open(path) as fh:
        doc = json.load(fh)
    X = np.asarray(doc["X"], dtype=float)
    Xtilde = np.asarray(doc["Xtilde"], dtype=float) if "Xtilde" in doc else None
    y = np.asarray(doc["y"], dtype=float) if "y" in doc else None
    return X, Xtilde, y
