"""Gaussian-cluster rule antecedents.

Each rule owns a multivariate Gaussian over the encoder latent: a center
and a covariance stored through an unconstrained lower-triangular factor
L with cov = L L^T + eps I, which stays positive definite under
unconstrained gradient updates.  Rule activations are softmax-normalized
negated squared Mahalanobis distances, so memberships always form a unit
partition.  The Bhattacharyya distance between clusters feeds the
overlap regularizer.

Plain-array functions operate on :class:`GaussianCluster` objects (used
by tests, export, and initialization); the ``*_graph`` functions build
the same math on the differentiation graph from stacked parameter
tensors (C, D) and (C, D, D).
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .exceptions import PositiveDefinitenessError, ShapeError

COV_EPS = 1e-6  # diagonal jitter floor for every covariance
OVERLAP_FLOOR = 1e-8  # division floor used by the overlap loss


@dataclass
class GaussianCluster:
    """Center and covariance factor of one antecedent fuzzy set."""

    center: np.ndarray
    factor: np.ndarray
    eps: float = COV_EPS

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.factor = np.asarray(self.factor, dtype=np.float64)
        d = self.center.shape[0]
        if self.center.ndim != 1 or self.factor.shape != (d, d):
            raise ShapeError(
                f"GaussianCluster: center {self.center.shape} vs factor {self.factor.shape}"
            )

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        L = np.tril(self.factor)
        return L @ L.T + self.eps * np.eye(self.dim)

    @classmethod
    def from_covariance(cls, center, covariance, eps=COV_EPS):
        """Factorize a target covariance (must exceed the eps floor)."""
        covariance = np.asarray(covariance, dtype=np.float64)
        d = covariance.shape[0]
        try:
            L = np.linalg.cholesky(covariance - eps * np.eye(d))
        except np.linalg.LinAlgError as exc:
            raise PositiveDefinitenessError(
                f"covariance is not positive definite above the {eps} floor"
            ) from exc
        return cls(np.asarray(center, dtype=np.float64), L, eps)


def mahalanobis_sq(z, cluster: GaussianCluster) -> float:
    """(z - mu)^T cov^-1 (z - mu), via solve against the Cholesky factor."""
    z = np.asarray(z, dtype=np.float64)
    diff = z - cluster.center
    try:
        chol = np.linalg.cholesky(cluster.covariance)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError("cluster covariance lost positive definiteness") from exc
    w = np.linalg.solve(chol, diff)
    return float(w @ w)


def squared_distances(z, clusters) -> np.ndarray:
    """Mahalanobis distances of latent rows to every cluster.

    z: (D,) or (S, D).  Returns (C,) or (S, C).
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zs = z[None, :] if single else z
    covs = np.stack([c.covariance for c in clusters])
    mus = np.stack([c.center for c in clusters])
    diffs = zs[:, None, :] - mus[None, :, :]
    try:
        sol = np.linalg.solve(covs, diffs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError("cluster covariance lost positive definiteness") from exc
    d2 = np.sum(diffs * sol, axis=-1)
    return d2[0] if single else d2


def memberships(z, clusters) -> np.ndarray:
    """Softmax of negated squared distances; rows sum to one."""
    d2 = squared_distances(z, clusters)
    neg = -d2
    shifted = neg - np.max(neg, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def hardmax_rule(z, clusters) -> int:
    """Index of the most activated rule; lowest index wins ties."""
    d2 = squared_distances(z, clusters)
    if d2.ndim != 1:
        raise ShapeError("hardmax_rule expects a single latent vector")
    return int(np.argmin(d2))


def bhattacharyya(a: GaussianCluster, b: GaussianCluster) -> float:
    """Bhattacharyya distance between two Gaussian clusters.

    1/8 (mu_a - mu_b)^T pooled^-1 (mu_a - mu_b)
      + 1/2 ln(det pooled / sqrt(det cov_a det cov_b)),
    pooled = (cov_a + cov_b) / 2.  Symmetric, zero iff parameters coincide.
    """
    ca, cb = a.covariance, b.covariance
    pooled = 0.5 * (ca + cb)
    dmu = a.center - b.center
    try:
        sol = np.linalg.solve(pooled, dmu)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError("pooled covariance is singular") from exc
    term1 = 0.125 * float(dmu @ sol)
    sign_p, ld_p = np.linalg.slogdet(pooled)
    sign_a, ld_a = np.linalg.slogdet(ca)
    sign_b, ld_b = np.linalg.slogdet(cb)
    if min(sign_p, sign_a, sign_b) <= 0:
        raise PositiveDefinitenessError("covariance determinant not positive")
    term2 = 0.5 * (ld_p - 0.5 * (ld_a + ld_b))
    return term1 + term2


def init_clusters(latents, n_rules, rng, init_std=0.5, eps=COV_EPS):
    """Warm-up initialization: centers drawn from observed latent vectors,
    isotropic covariance of scale ``init_std`` squared.

    Returns (centers (C, D), factors (C, D, D)) parameter arrays.
    """
    latents = np.asarray(latents, dtype=np.float64)
    n = latents.shape[0]
    replace = n < n_rules
    pick = rng.choice(n, size=n_rules, replace=replace)
    centers = latents[pick].copy()
    if replace:  # break exact duplicates so clusters stay distinguishable
        centers += rng.normal(scale=1e-3, size=centers.shape)
    d = latents.shape[1]
    scale = np.sqrt(init_std**2 - eps)
    factors = np.tile(scale * np.eye(d), (n_rules, 1, 1))
    return centers, factors


def clusters_from_params(centers, factors, eps=COV_EPS):
    """View stacked parameter arrays as a list of GaussianCluster."""
    return [GaussianCluster(c, f, eps) for c, f in zip(np.asarray(centers), np.asarray(factors))]


# ---------------------------------------------------------------------------
# graph-side versions (operate on parameter tensors, gradients flow)


def covariances_graph(factors, eps=COV_EPS):
    """factors: (C, D, D) tensor -> (C, D, D) covariance tensor L L^T + eps I."""
    d = factors.data.shape[-1]
    L = ad.mul(factors, np.tril(np.ones((d, d))))
    return ad.add(ad.matmul(L, ad.swapaxes(L, -1, -2)), eps * np.eye(d))


def memberships_graph(z, centers, covariances):
    """Memberships of a latent batch against every rule.

    z: (B, D); centers: (C, D); covariances: (C, D, D).
    Returns (psi (B, C), d2 (B, C), diffs (B, C, D)).
    """
    b = z.data.shape[0]
    c, d = centers.data.shape
    diffs = ad.sub(ad.reshape(z, (b, 1, d)), ad.reshape(centers, (1, c, d)))
    sol = ad.solve_vec(covariances, diffs)
    d2 = ad.tsum(ad.mul(diffs, sol), axis=-1)
    psi = ad.softmax(ad.neg(d2), axis=-1)
    return psi, d2, diffs


def bhattacharyya_pairs_graph(centers, covariances, idx_m, idx_n):
    """Bhattacharyya distances for the cluster pairs (idx_m[k], idx_n[k])."""
    mu_m, mu_n = centers[idx_m], centers[idx_n]
    cov_m, cov_n = covariances[idx_m], covariances[idx_n]
    pooled = ad.mul(ad.add(cov_m, cov_n), 0.5)
    dmu = ad.sub(mu_m, mu_n)
    quad = ad.tsum(ad.mul(dmu, ad.solve_vec(pooled, dmu)), axis=-1)
    term1 = ad.mul(quad, 0.125)
    ld = ad.logdet(covariances)
    term2 = ad.mul(ad.sub(ad.logdet(pooled), ad.mul(ad.add(ld[idx_m], ld[idx_n]), 0.5)), 0.5)
    return ad.add(term1, term2)
