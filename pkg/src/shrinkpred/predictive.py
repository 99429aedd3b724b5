"""Generalized Bayes predictive densities for the canonical problem.

Three density constructions are provided for the future observation
ytilde ~ N_m(Q theta, I/eta):

* the best invariant density (Bayes under the right invariant prior
  pi(theta, mu, eta) = 1/eta), a multivariate t once normalized;
* the hierarchical shrinkage density for divergence index alpha < 1, which
  factors as the best invariant kernel times a second polynomial kernel
  centered at a shrunken mean;
* the plug-in normal at alpha = 1, whose mean and variance shrink the
  unbiased estimators by the data-adaptive factor nu/(nu + 1 + W).

Densities are evaluated in the log domain.  The shrinkage density has no
closed-form constant and is normalized by self-normalized importance
sampling with the best invariant t as proposal (the extra kernel only adds
tail decay, so the proposal dominates the target).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import cho_factor, cho_solve
from scipy.special import betaln, gammaln

from .bounds import a_of_nu, nu_limits, nu_of_prior, rescale_C_for_positivity
from .canonical import (
    STREAM_NORMALIZATION,
    CanonicalObservation,
    CanonicalProblem,
    replication_rng,
)

__all__ = [
    "DegenerateObservationError",
    "UnreliableNormalizationError",
    "PriorSpec",
    "ShrinkageComponents",
    "NormalizationCertificate",
    "PredictiveDensity",
    "PluginEstimate",
    "shrinkage_components",
    "log_best_invariant",
    "best_invariant_normalizer",
    "best_invariant_density",
    "log_shrinkage_bayes",
    "shrinkage_bayes_density",
    "normalize_density",
    "plugin_bayes_estimators",
    "plugin_density",
    "umvu_estimators",
    "stein_variance",
    "stein_variance_star",
    "alpha_limit_check",
    "lemma_identity_residual",
    "beta_integral_identity",
    "log_marginal_kernel",
]

MIN_ESS_FRACTION = 0.05
PD_EIGENVALUE_RATIO = 1e-12


class DegenerateObservationError(ValueError):
    """Residual sum of squares is zero; scale-dependent densities are undefined."""


class UnreliableNormalizationError(RuntimeError):
    """Importance-sampling effective sample size fell below the guard threshold."""


def _check_alpha(alpha: float, allow_one: bool = False) -> float:
    alpha = float(alpha)
    if not -1.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [-1, 1]")
    if not allow_one and alpha == 1.0:
        raise ValueError("alpha = 1 is not supported here; use the plug-in path")
    return alpha


def _check_s(obs: CanonicalObservation) -> float:
    if obs.s <= 0:
        raise DegenerateObservationError("observation has s = 0")
    return obs.s


def _points(y, m: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or batch of points to shape (N, m)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if y.shape != (m,):
            raise ValueError(f"point has dimension {y.shape[0]}, expected {m}")
        return y[None, :], True
    if y.ndim == 2 and y.shape[1] == m:
        return y, False
    raise ValueError(f"points must have shape (m,) or (N, {m})")


class _SpdFactor:
    """Cholesky factorization of a symmetric positive definite matrix.

    Rejects matrices whose smallest eigenvalue falls below
    PD_EIGENVALUE_RATIO times the largest.
    """

    def __init__(self, mat: np.ndarray):
        mat = 0.5 * (mat + mat.T)
        w = np.linalg.eigvalsh(mat)
        if w[0] <= PD_EIGENVALUE_RATIO * w[-1]:
            raise np.linalg.LinAlgError("matrix is not positive definite within tolerance")
        self.mat = mat
        self._cf = cho_factor(mat, lower=True)
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self._cf[0]))))

    def quad(self, resid: np.ndarray) -> np.ndarray:
        """Quadratic forms r' A^{-1} r for rows r of resid, shape (N, m)."""
        sol = cho_solve(self._cf, resid.T)
        return np.einsum("ij,ji->i", resid, sol)

    def chol_lower(self) -> np.ndarray:
        return np.tril(self._cf[0])


# ---------------------------------------------------------------------------
# Prior and estimate types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the hierarchical shrinkage prior.

    ``c`` scales the prior covariance componentwise (c_i >= 1; a larger c_i
    shrinks component i less), ``a`` is the common exponent of the
    precision and mixing densities, and ``gamma_prior`` scales the prior on
    the auxiliary mean.  Problem dimensions are captured so the derived
    quantities nu and b_of_alpha are self-contained.
    """

    c: np.ndarray
    a: float
    gamma_prior: float
    n: int
    k: int
    m: int

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        l = min(self.k, self.m)
        if c.shape != (l,):
            raise ValueError(f"c must have length l = {l}")
        if np.any(c < 1):
            raise ValueError("entries of c must be >= 1")
        if not self.a > -self.k / 2.0 - 1.0:
            raise ValueError("a must exceed -k/2 - 1")
        if self.gamma_prior < 1:
            raise ValueError("gamma_prior must be >= 1")
        if self.n <= self.k:
            raise ValueError("need n > k")

    @property
    def l(self) -> int:
        return min(self.k, self.m)

    @property
    def nu(self) -> float:
        return nu_of_prior(self.k, self.a, self.n)

    def b_of_alpha(self, alpha: float) -> float:
        alpha = _check_alpha(alpha, allow_one=True)
        return (1.0 - alpha) * self.m / 4.0 + (self.n - self.k) / 2.0 - 1.0

    @classmethod
    def from_problem(
        cls,
        problem: CanonicalProblem,
        c: np.ndarray | float | None = None,
        a: float | None = None,
        nu: float | None = None,
        gamma_prior: float = 1.0,
    ) -> "PriorSpec":
        if c is None:
            c_arr = np.ones(problem.l)
        else:
            c_arr = np.broadcast_to(np.asarray(c, dtype=float), (problem.l,)).copy()
        if (a is None) == (nu is None):
            raise ValueError("specify exactly one of a or nu")
        if a is None:
            a = a_of_nu(problem.k, nu, problem.n)
        return cls(c=c_arr, a=float(a), gamma_prior=float(gamma_prior),
                   n=problem.n, k=problem.k, m=problem.m)

    @classmethod
    def minimax_default(cls, problem: CanonicalProblem, gamma_prior: float = 1.0) -> "PriorSpec":
        """C = g0*I with g0 the positivity rescale, nu at the domination cap."""
        c0 = np.ones(problem.l)
        g0 = rescale_C_for_positivity(problem.d, c0, problem.m, problem.n, problem.k)
        c = g0 * c0
        nb = nu_limits(problem.d, c, problem.m, problem.n, problem.k)
        return cls.from_problem(problem, c=c, nu=nb.nu_max, gamma_prior=gamma_prior)


@dataclass(frozen=True)
class ShrinkageComponents:
    """Matrices of the two-kernel factorization of the shrinkage density."""

    sigma_u: np.ndarray
    theta_hat_b: np.ndarray
    sigma_b: np.ndarray
    r: float

    def __post_init__(self):
        for name in ("sigma_u", "sigma_b"):
            mat = np.asarray(getattr(self, name), dtype=float)
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
            w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
            if w[0] <= PD_EIGENVALUE_RATIO * w[-1]:
                raise ValueError(f"{name} is not positive definite")
        v = np.asarray(self.theta_hat_b, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "theta_hat_b", v)
        if self.r < 0:
            raise ValueError("r must be nonnegative")


@dataclass(frozen=True)
class PluginEstimate:
    """Plug-in mean and variance estimates with the shrinkage statistic W."""

    theta_hat: np.ndarray
    sigma2_hat: float
    w: float

    def __post_init__(self):
        th = np.asarray(self.theta_hat, dtype=float).ravel()
        th.setflags(write=False)
        object.__setattr__(self, "theta_hat", th)
        if not self.sigma2_hat > 0:
            raise ValueError("sigma2_hat must be positive")
        if self.w < 0:
            raise ValueError("w must be nonnegative")


@dataclass(frozen=True)
class NormalizationCertificate:
    """Provenance of a density's normalizing constant."""

    method: str  # "closed_form" or "importance_sampled"
    n_samples: int | None = None
    seed: int | None = None
    std_error: float = 0.0

    def __post_init__(self):
        if self.method not in ("closed_form", "importance_sampled"):
            raise ValueError("unknown normalization method")


@dataclass(frozen=True)
class PredictiveDensity:
    """Evaluable log density: log p(y) = log_unnormalized(y) + log_norm_const."""

    log_unnormalized: Callable[[np.ndarray], np.ndarray]
    log_norm_const: float
    certificate: NormalizationCertificate
    m: int
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None
    plugin: PluginEstimate | None = None

    def log_density(self, y) -> np.ndarray | float:
        pts, single = _points(y, self.m)
        out = self.log_unnormalized(pts) + self.log_norm_const
        return float(out[0]) if single else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler is None:
            raise ValueError("density has no sampler")
        return self.sampler(rng, size)


# ---------------------------------------------------------------------------
# Shrinkage factorization
# ---------------------------------------------------------------------------


def shrinkage_components(
    problem: CanonicalProblem,
    prior: PriorSpec,
    alpha: float,
    v: np.ndarray,
) -> ShrinkageComponents:
    """Covariances, shrunken mean and residual of the two-kernel factorization.

    With c2 = 2/(1 - alpha):
      sigma_u   = c2 I + Q diag(d) Q'
      theta_b   = (C - I)(C + (1-alpha)D/2)^{-1} v        (componentwise)
      sigma_b   = c2 I + Q diag((c-1) d / (c + (1-alpha)d/2)) Q'
      r         = sum_i v_i^2 ((1-alpha)d_i/2 + 1) / (d_i (c_i + (1-alpha)d_i/2))
    """
    alpha = _check_alpha(alpha)
    v = np.asarray(v, dtype=float).ravel()
    d, c, Q, m = problem.d, prior.c, problem.Q, problem.m
    if v.shape != (problem.l,):
        raise ValueError("v must have length l")
    c2 = 2.0 / (1.0 - alpha)
    half = (1.0 - alpha) / 2.0
    sigma_u = c2 * np.eye(m) + (Q * d) @ Q.T
    theta_b = (c - 1.0) / (c + half * d) * v
    sigma_b = c2 * np.eye(m) + (Q * ((c - 1.0) * d / (c + half * d))) @ Q.T
    r = float(v @ ((half * d + 1.0) / (d * (c + half * d)) * v))
    return ShrinkageComponents(sigma_u=sigma_u, theta_hat_b=theta_b, sigma_b=sigma_b, r=r)


def _sigma_u_factor(problem: CanonicalProblem, alpha: float) -> _SpdFactor:
    c2 = 2.0 / (1.0 - alpha)
    return _SpdFactor(c2 * np.eye(problem.m) + (problem.Q * problem.d) @ problem.Q.T)


def log_best_invariant(
    problem: CanonicalProblem,
    obs: CanonicalObservation,
    alpha: float,
    ytilde,
) -> float:
    """Unnormalized log of the best invariant density at ytilde."""
    alpha = _check_alpha(alpha)
    s = _check_s(obs)
    fac = _sigma_u_factor(problem, alpha)
    pts, single = _points(ytilde, problem.m)
    mean = problem.Q @ obs.v
    expo = -problem.m / 2.0 - (problem.n - problem.k) / (1.0 - alpha)
    out = expo * np.log(fac.quad(pts - mean) + s)
    return float(out[0]) if single else out


def best_invariant_normalizer(problem: CanonicalProblem, obs: CanonicalObservation, alpha: float) -> float:
    """Log constant that normalizes the best invariant kernel.

    The normalized density is multivariate t with 2(n-k)/(1-alpha) degrees
    of freedom, location Qv and scale matrix (s/dof) sigma_u.
    """
    alpha = _check_alpha(alpha)
    s = _check_s(obs)
    m, q = problem.m, problem.n - problem.k
    nu_a = 2.0 * q / (1.0 - alpha)
    fac = _sigma_u_factor(problem, alpha)
    return float(
        gammaln((nu_a + m) / 2.0)
        - gammaln(nu_a / 2.0)
        - (m / 2.0) * math.log(math.pi)
        - 0.5 * fac.logdet
        + (nu_a / 2.0) * math.log(s)
    )


def best_invariant_density(problem: CanonicalProblem, obs: CanonicalObservation, alpha: float) -> PredictiveDensity:
    """Normalized best invariant density with a multivariate-t sampler."""
    alpha = _check_alpha(alpha)
    s = _check_s(obs)
    m, q = problem.m, problem.n - problem.k
    fac = _sigma_u_factor(problem, alpha)
    mean = problem.Q @ obs.v
    expo = -m / 2.0 - q / (1.0 - alpha)
    nu_a = 2.0 * q / (1.0 - alpha)
    log_nc = float(
        gammaln((nu_a + m) / 2.0) - gammaln(nu_a / 2.0)
        - (m / 2.0) * math.log(math.pi) - 0.5 * fac.logdet + (nu_a / 2.0) * math.log(s)
    )
    scale_chol = math.sqrt(s / nu_a) * fac.chol_lower()

    def log_unnorm(pts: np.ndarray) -> np.ndarray:
        return expo * np.log(fac.quad(pts - mean) + s)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, m)) @ scale_chol.T
        g = rng.chisquare(nu_a, size)
        return mean + z / np.sqrt(g / nu_a)[:, None]

    return PredictiveDensity(
        log_unnormalized=log_unnorm,
        log_norm_const=log_nc,
        certificate=NormalizationCertificate(method="closed_form"),
        m=m,
        sampler=sampler,
    )


def _shrinkage_log_unnorm(
    problem: CanonicalProblem,
    prior: PriorSpec,
    obs: CanonicalObservation,
    alpha: float,
) -> Callable[[np.ndarray], np.ndarray]:
    """Unnormalized log shrinkage density as a batch evaluator."""
    s = _check_s(obs)
    comp = shrinkage_components(problem, prior, alpha, obs.v)
    fac_u = _SpdFactor(comp.sigma_u)
    fac_b = _SpdFactor(comp.sigma_b)
    mean_u = problem.Q @ obs.v
    mean_b = problem.Q @ comp.theta_hat_b
    m, q = problem.m, problem.n - problem.k
    expo_u = -m / 2.0 - q / (1.0 - alpha)
    expo_b = -(problem.k + 2.0 * prior.a + 2.0) / (1.0 - alpha)
    # The auxiliary term vanishes when m >= k since v_star is empty.
    vstar_term = float(obs.v_star @ obs.v_star) / prior.gamma_prior
    offset = comp.r + vstar_term + s

    def log_unnorm(pts: np.ndarray) -> np.ndarray:
        lu = expo_u * np.log(fac_u.quad(pts - mean_u) + s)
        lb = expo_b * np.log(fac_b.quad(pts - mean_b) + offset)
        return lu + lb

    return log_unnorm


def log_shrinkage_bayes(
    problem: CanonicalProblem,
    prior: PriorSpec,
    obs: CanonicalObservation,
    alpha: float,
    ytilde,
) -> float:
    """Unnormalized log of the hierarchical shrinkage density at ytilde."""
    alpha = _check_alpha(alpha)
    evaluator = _shrinkage_log_unnorm(problem, prior, obs, alpha)
    pts, single = _points(ytilde, problem.m)
    out = evaluator(pts)
    return float(out[0]) if single else out


def normalize_density(
    log_unnormalized: Callable[[np.ndarray], np.ndarray],
    proposal: PredictiveDensity,
    n_samples: int,
    seed: int,
    rep_index: int = 0,
) -> PredictiveDensity:
    """Normalize a density by importance sampling against a known proposal.

    The proposal must be normalized, samplable and dominate the target.
    Raises UnreliableNormalizationError when the effective sample size
    drops below MIN_ESS_FRACTION of n_samples.
    """
    if proposal.sampler is None:
        raise ValueError("proposal must be samplable")
    n_samples = int(n_samples)
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = replication_rng(seed, rep_index, stream=STREAM_NORMALIZATION)
    ys = proposal.sample(rng, n_samples)
    logw = log_unnormalized(ys) - proposal.log_density(ys)
    shift = float(np.max(logw))
    w = np.exp(logw - shift)
    zbar = float(np.mean(w))
    ess = float(w.sum() ** 2 / (w @ w))
    if ess < MIN_ESS_FRACTION * n_samples:
        raise UnreliableNormalizationError(
            f"effective sample size {ess:.1f} of {n_samples} is below the 5% guard"
        )
    rel_se = float(np.std(w, ddof=1) / math.sqrt(n_samples) / zbar)
    return PredictiveDensity(
        log_unnormalized=log_unnormalized,
        log_norm_const=-(shift + math.log(zbar)),
        certificate=NormalizationCertificate(
            method="importance_sampled", n_samples=n_samples, seed=int(seed), std_error=rel_se
        ),
        m=proposal.m,
    )


def shrinkage_bayes_density(
    problem: CanonicalProblem,
    prior: PriorSpec,
    obs: CanonicalObservation,
    alpha: float,
    n_samples: int = 100_000,
    seed: int = 0,
    rep_index: int = 0,
) -> PredictiveDensity:
    """Importance-sampling normalized shrinkage density."""
    alpha = _check_alpha(alpha)
    log_unnorm = _shrinkage_log_unnorm(problem, prior, obs, alpha)
    proposal = best_invariant_density(problem, obs, alpha)
    return normalize_density(log_unnorm, proposal, n_samples, seed, rep_index)


# ---------------------------------------------------------------------------
# Plug-in estimators and density (alpha = 1)
# ---------------------------------------------------------------------------


def plugin_bayes_estimators(
    problem: CanonicalProblem,
    prior: PriorSpec,
    obs: CanonicalObservation,
) -> PluginEstimate:
    """Shrinkage plug-in estimates of theta and sigma^2 at alpha = 1.

    W = (V' C^{-1} D^{-1} V + |V*|^2 / gamma) / S; both estimators shrink
    by nu/(nu + 1 + W).
    """
    s = _check_s(obs)
    d, c = problem.d, prior.c
    v, v_star = obs.v, obs.v_star
    w = float(v @ (v / (c * d)) + v_star @ v_star / prior.gamma_prior) / s
    nu = prior.nu
    f = nu / (nu + 1.0 + w)
    theta = (1.0 - f / c) * v
    sigma2 = (1.0 - f) * s / (problem.n - problem.k)
    return PluginEstimate(theta_hat=theta, sigma2_hat=sigma2, w=w)


def umvu_estimators(obs: CanonicalObservation, n: int, k: int) -> PluginEstimate:
    """Unbiased baseline: theta_hat = V, sigma2_hat = S/(n-k).

    The no-shrinkage limit corresponds to W at infinity, which is what the
    estimate records.
    """
    s = _check_s(obs)
    return PluginEstimate(theta_hat=obs.v, sigma2_hat=s / (n - k), w=math.inf)


def stein_variance(obs: CanonicalObservation, d: np.ndarray, n: int, k: int) -> float:
    """Stein variance estimate min(S/(n-k), (V'D^{-1}V + S)/(l + n - k))."""
    s = _check_s(obs)
    d = np.asarray(d, dtype=float).ravel()
    l = obs.v.size
    if d.shape != (l,):
        raise ValueError("d must match the length of v")
    return float(min(s / (n - k), (obs.v @ (obs.v / d) + s) / (l + n - k)))


def stein_variance_star(obs: CanonicalObservation, n: int, k: int) -> float:
    """Variance estimate pooling the auxiliary statistic: min(S/(n-k), (|V*|^2 + S)/(n - l))."""
    s = _check_s(obs)
    if obs.v_star.size == 0:
        raise ValueError("v_star is empty; the pooled variant needs m < k")
    l = obs.v.size
    return float(min(s / (n - k), (obs.v_star @ obs.v_star + s) / (n - l)))


def plugin_density(est: PluginEstimate, problem: CanonicalProblem) -> PredictiveDensity:
    """Normal density N_m(Q theta_hat, sigma2_hat I) with closed-form constant."""
    mean = problem.Q @ est.theta_hat
    m = problem.m
    sigma2 = est.sigma2_hat
    log_nc = -m / 2.0 * math.log(2.0 * math.pi * sigma2)

    def log_unnorm(pts: np.ndarray) -> np.ndarray:
        r = pts - mean
        return -0.5 * np.einsum("ij,ij->i", r, r) / sigma2

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return mean + math.sqrt(sigma2) * rng.standard_normal((size, m))

    return PredictiveDensity(
        log_unnormalized=log_unnorm,
        log_norm_const=log_nc,
        certificate=NormalizationCertificate(method="closed_form"),
        m=m,
        sampler=sampler,
        plugin=est,
    )


def alpha_limit_check(
    problem: CanonicalProblem,
    prior: PriorSpec,
    obs: CanonicalObservation,
    points,
    alpha_sequence,
    n_samples: int = 400_000,
    seed: int = 0,
) -> np.ndarray:
    """Gap between the normalized shrinkage log density and the plug-in normal.

    Returns an array of shape (len(alpha_sequence), n_points) with
    |log p_alpha(y) - log plugin(y)|.  The sequence must increase toward 1.
    """
    alphas = [float(a) for a in alpha_sequence]
    if any(a >= 1.0 for a in alphas):
        raise ValueError("all alphas must be < 1")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha_sequence must be increasing")
    pts, _ = _points(np.atleast_2d(points), problem.m)
    target = plugin_density(plugin_bayes_estimators(problem, prior, obs), problem)
    ref = target.log_density(pts)
    gaps = np.empty((len(alphas), pts.shape[0]))
    for i, alpha in enumerate(alphas):
        dens = shrinkage_bayes_density(problem, prior, obs, alpha, n_samples=n_samples, seed=seed, rep_index=i)
        gaps[i] = np.abs(dens.log_density(pts) - ref)
    return gaps


# ---------------------------------------------------------------------------
# Identity machinery
# ---------------------------------------------------------------------------


def lemma_identity_residual(F, D_star, Q, ytilde, v) -> tuple[float, float]:
    """Both sides of the quadratic-form rearrangement used in the derivations.

    F and D_star are the diagonals of diagonal matrices, Q has orthonormal
    columns.  Returns (lhs, rhs) where lhs is the direct quadratic form and
    rhs its completed-square re-expression; they agree to rounding error.
    """
    F = np.asarray(F, dtype=float).ravel()
    ds = np.asarray(D_star, dtype=float).ravel()
    Q = np.asarray(Q, dtype=float)
    y = np.asarray(ytilde, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    l = F.size
    if ds.shape != (l,) or v.shape != (l,) or Q.shape != (y.size, l):
        raise ValueError("inconsistent dimensions")
    if np.abs(Q.T @ Q - np.eye(l)).max() > 1e-8:
        raise ValueError("Q must have orthonormal columns")
    g = 1.0 + ds * (1.0 - F)
    if np.any(np.abs(g) < 1e-12):
        raise np.linalg.LinAlgError("I + D*(I - F) is singular")

    t = Q.T @ y + v / ds
    lhs = float(y @ y + v @ (v / ds) - t @ (F / (1.0 + 1.0 / ds) * t))

    loc = Q @ (F / g * v)
    mat = np.eye(y.size) + (Q * (F * ds / g)) @ Q.T
    resid = y - loc
    quad = float(resid @ np.linalg.solve(mat, resid))
    rhs = quad + float(v @ ((ds + 1.0) * (1.0 - F) / (ds * g) * v))
    return lhs, rhs


def beta_integral_identity(a_exp: float, b_exp: float, w: float) -> tuple[float, float]:
    """Quadrature and closed form of int_0^1 t^a (1-t)^b (1 + w t)^{-(a+b+2)} dt.

    At exponent a + b + 2 the integral collapses to
    Be(a+1, b+1) / (w+1)^{a+1}.  Returns (quadrature, closed_form).
    """
    if a_exp <= -1 or b_exp <= -1:
        raise ValueError("exponents must exceed -1")
    if w <= -1:
        raise ValueError("w must exceed -1")
    g_exp = a_exp + b_exp + 2.0
    val, _ = integrate.quad(
        lambda lam: lam**a_exp * (1.0 - lam) ** b_exp * (1.0 + w * lam) ** (-g_exp),
        0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200,
    )
    closed = math.exp(betaln(a_exp + 1.0, b_exp + 1.0) - (a_exp + 1.0) * math.log(w + 1.0))
    return float(val), closed


def log_marginal_kernel(
    v: np.ndarray,
    v_star: np.ndarray,
    s: float,
    d: np.ndarray,
    c: np.ndarray,
    gamma_prior: float,
    a: float,
    n: int,
    k: int,
) -> float:
    """Log marginal kernel of (V, V*, S) under the shrinkage prior at alpha = 1.

    Up to a constant: -(n-k)/2 log s - (k/2 + a + 1) log(V'C^{-1}D^{-1}V +
    |V*|^2/gamma + s).  Its gradient reproduces the plug-in estimators.
    """
    v = np.asarray(v, dtype=float).ravel()
    v_star = np.asarray(v_star, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if s <= 0:
        raise DegenerateObservationError("s must be positive")
    u = float(v @ (v / (c * d)) + v_star @ v_star / gamma_prior)
    return -(n - k) / 2.0 * math.log(s) - (k / 2.0 + a + 1.0) * math.log(u + s)
