"""Cauchy distribution mathematics for wind forecast errors.

Univariate distributions are stored by their scale ``sigma`` so that the
density, CDF and quantile read literally; multivariate distributions keep
the scale matrix in squared units. The bridge between the two is
``sigma = sqrt(a' S a)`` for a linear combination ``a``.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from ccrtd_cli.errors import (
    DegenerateDistributionError,
    DomainError,
    InvalidInputError,
    NotPositiveDefiniteError,
)

logger = logging.getLogger(__name__)

# Relative jitter added once when a Cholesky factorization fails
JITTER_RELATIVE = 1e-10
# Absolute jitter used when the matrix has zero trace
JITTER_FLOOR = 1e-12

SAMPLE_CHUNK_ROWS = 4096


@dataclass(frozen=True)
class UnivariateCauchy:
    """One-dimensional Cauchy law with location ``location`` and scale ``scale``."""

    location: float
    scale: float

    def __post_init__(self):
        if not np.isfinite(self.location):
            raise DomainError(f"location must be finite, got {self.location}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale}")

    @property
    def squared_scale(self) -> float:
        return self.scale**2


def cholesky_with_jitter(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(lower_factor, matrix_used)``.

    A failed factorization is retried once with
    ``max(1e-10 * trace / K, 1e-12) * I`` added to the diagonal.
    """
    matrix = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.cholesky(matrix), matrix
    except np.linalg.LinAlgError:
        pass

    dim = matrix.shape[0]
    jitter = max(JITTER_RELATIVE * np.trace(matrix) / dim, JITTER_FLOOR)
    jittered = matrix + jitter * np.eye(dim)
    try:
        factor = np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(
            f"scale matrix is not positive definite even with jitter {jitter:.3g}"
        ) from e
    logger.debug("Cholesky needed jitter %.3g", jitter)
    return factor, jittered


@dataclass(frozen=True, eq=False)
class MultivariateCauchy:
    """K-dimensional Cauchy law (multivariate t with one degree of freedom)."""

    location: np.ndarray
    scale_matrix: np.ndarray
    cholesky: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        location = np.array(self.location, dtype=float, ndmin=1)
        scale = np.array(self.scale_matrix, dtype=float, ndmin=2)
        dim = location.shape[0]
        if location.ndim != 1 or scale.shape != (dim, dim):
            raise InvalidInputError(
                f"location of length {dim} needs a {dim}x{dim} scale matrix, "
                f"got {scale.shape}"
            )
        if not (np.all(np.isfinite(location)) and np.all(np.isfinite(scale))):
            raise InvalidInputError("location and scale matrix must be finite")
        tolerance = 1e-12 * max(1.0, float(np.max(np.abs(scale))))
        if np.max(np.abs(scale - scale.T)) > tolerance:
            raise NotPositiveDefiniteError("scale matrix is not symmetric")

        factor, scale = cholesky_with_jitter(scale)
        for name, value in (
            ("location", location),
            ("scale_matrix", scale),
            ("cholesky", factor),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return self.location.shape[0]

    def marginal(self, k: int) -> UnivariateCauchy:
        return UnivariateCauchy(
            float(self.location[k]), float(np.sqrt(self.scale_matrix[k, k]))
        )

    def diagonal(self) -> "MultivariateCauchy":
        """Same marginals with the dependence between components removed."""
        return MultivariateCauchy(self.location, np.diag(np.diag(self.scale_matrix)))

    @classmethod
    def block_diagonal(cls, parts: list["MultivariateCauchy"]) -> "MultivariateCauchy":
        """Joint law with one shared mixing variable and block-diagonal scale."""
        return cls(
            np.concatenate([p.location for p in parts]),
            linalg.block_diag(*[p.scale_matrix for p in parts]),
        )


@dataclass(frozen=True, eq=False)
class FitResult:
    distribution: MultivariateCauchy
    log_likelihood: float
    iterations: int
    converged: bool
    log_likelihood_trace: tuple[float, ...] = ()


def pdf_uni(dist: UnivariateCauchy, x):
    z = (np.asarray(x, dtype=float) - dist.location) / dist.scale
    return 1.0 / (np.pi * dist.scale * (1.0 + z * z))


def _check_points(dist: MultivariateCauchy, x) -> np.ndarray:
    points = np.asarray(x, dtype=float)
    if points.shape[-1:] != (dist.dim,) or points.ndim > 2:
        raise InvalidInputError(
            f"expected points of dimension {dist.dim}, got shape {points.shape}"
        )
    return points


def _mahalanobis(dist: MultivariateCauchy, points: np.ndarray) -> np.ndarray:
    centered = np.atleast_2d(points) - dist.location
    solved = linalg.solve_triangular(dist.cholesky, centered.T, lower=True)
    return np.sum(solved * solved, axis=0)


def logpdf_multi(dist: MultivariateCauchy, x):
    points = _check_points(dist, x)
    p = dist.dim
    log_det = 2.0 * np.sum(np.log(np.diag(dist.cholesky)))
    log_norm = (
        special.gammaln((1.0 + p) / 2.0)
        - special.gammaln(0.5)
        - 0.5 * p * np.log(np.pi)
        - 0.5 * log_det
    )
    values = log_norm - 0.5 * (1.0 + p) * np.log1p(_mahalanobis(dist, points))
    return values if points.ndim == 2 else float(values[0])


def pdf_multi(dist: MultivariateCauchy, x):
    """Joint density of the multivariate Cauchy at one point or at rows of ``x``."""
    return np.exp(logpdf_multi(dist, x))


def cdf(dist: UnivariateCauchy, x):
    return np.arctan((np.asarray(x, dtype=float) - dist.location) / dist.scale) / np.pi + 0.5


def quantile(dist: UnivariateCauchy, probability):
    """Inverse CDF; ``probability`` must lie strictly inside (0, 1)."""
    prob = np.asarray(probability, dtype=float)
    if np.any(~((prob > 0.0) & (prob < 1.0))):
        raise DomainError(f"quantile probability must be in (0, 1), got {probability}")
    values = dist.location + dist.scale * np.tan(np.pi * (prob - 0.5))
    return float(values) if values.ndim == 0 else values


def linear_combination(dist: MultivariateCauchy, a) -> UnivariateCauchy:
    """Law of ``a' x``; Cauchy is closed under linear maps."""
    weights = np.asarray(a, dtype=float)
    if weights.shape != (dist.dim,):
        raise InvalidInputError(
            f"combination vector must have length {dist.dim}, got {weights.shape}"
        )
    if not np.any(weights):
        raise DegenerateDistributionError("combination vector is identically zero")
    squared = float(weights @ dist.scale_matrix @ weights)
    if squared <= 0.0:
        raise DegenerateDistributionError(
            f"combination has non-positive squared scale {squared:.3g}"
        )
    return UnivariateCauchy(float(weights @ dist.location), float(np.sqrt(squared)))


def antiderivative_x_pdf(dist: UnivariateCauchy, x):
    """Antiderivative of ``x * pdf(x)`` with the integration constant at zero."""
    z = (np.asarray(x, dtype=float) - dist.location) / dist.scale
    return dist.scale / (2.0 * np.pi) * np.log1p(z * z) + dist.location / np.pi * np.arctan(z)


def antiderivative_x2_pdf(dist: UnivariateCauchy, x):
    """Antiderivative of ``x**2 * pdf(x)`` with the integration constant at zero."""
    mu, sigma = dist.location, dist.scale
    offset = np.asarray(x, dtype=float) - mu
    z = offset / sigma
    return (
        sigma / np.pi * offset
        + (mu * mu - sigma * sigma) / np.pi * np.arctan(z)
        + mu * sigma / np.pi * np.log1p(z * z)
    )


def _sample_chunk(dist: MultivariateCauchy, seed: int, chunk: int) -> np.ndarray:
    rng = np.random.default_rng([seed, chunk])
    normals = rng.standard_normal((SAMPLE_CHUNK_ROWS, dist.dim))
    mixing = np.abs(rng.standard_normal(SAMPLE_CHUNK_ROWS))
    return dist.location + (normals @ dist.cholesky.T) / mixing[:, None]


def sample(dist: MultivariateCauchy, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """Draw ``n`` rows as ``mu + L z / |g|`` with z, g standard normal.

    Rows come in fixed chunks seeded by ``(seed, chunk)``, so row ``i`` depends
    only on ``(seed, i)`` whatever ``n`` or ``workers`` are.
    """
    if n < 1:
        raise InvalidInputError(f"sample count must be at least 1, got {n}")
    if seed < 0:
        raise InvalidInputError(f"seed must be non-negative, got {seed}")

    chunks = range(-(-n // SAMPLE_CHUNK_ROWS))
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda c: _sample_chunk(dist, seed, c), chunks))
    else:
        blocks = [_sample_chunk(dist, seed, c) for c in chunks]
    return np.concatenate(blocks, axis=0)[:n]


def _log_likelihood(dist: MultivariateCauchy, samples: np.ndarray) -> float:
    return float(np.sum(logpdf_multi(dist, samples)))


def fit_mv_cauchy(samples, tol: float = 1e-8, max_iter: int = 500) -> FitResult:
    """Maximum likelihood fit by EM for the multivariate t with nu = 1.

    Starts from the coordinate-wise median and a 1.4826 * MAD diagonal. The
    log-likelihood is non-decreasing across iterations.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n, dim = data.shape
    if n <= dim + 1:
        raise InvalidInputError(f"need more than {dim + 1} samples to fit, got {n}")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("samples must be finite")

    location = np.median(data, axis=0)
    mad = 1.4826 * np.median(np.abs(data - location), axis=0)
    dist = MultivariateCauchy(location, np.diag(mad**2))
    trace = [_log_likelihood(dist, data)]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        weights = (1.0 + dim) / (1.0 + _mahalanobis(dist, data))
        location = weights @ data / np.sum(weights)
        centered = data - location
        scale = (centered.T * weights) @ centered / n
        dist = MultivariateCauchy(location, 0.5 * (scale + scale.T))

        trace.append(_log_likelihood(dist, data))
        change = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), np.finfo(float).tiny)
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning("EM stopped after %d iterations without converging", iterations)
    return FitResult(dist, trace[-1], iterations, converged, tuple(trace))


def histogram_rmse(pdf: Callable, samples, bins: int) -> float:
    """RMS gap between ``pdf`` at bin centers and the density histogram of ``samples``."""
    values = np.asarray(samples, dtype=float).ravel()
    if bins < 2:
        raise InvalidInputError(f"need at least 2 bins, got {bins}")
    if values.size < 10:
        raise InvalidInputError(f"need at least 10 samples, got {values.size}")
    if np.ptp(values) == 0.0:
        raise InvalidInputError("samples span a zero-width range")

    density, edges = np.histogram(values, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    model = np.asarray(pdf(centers), dtype=float) * np.ones_like(centers)
    return float(np.sqrt(np.mean((model - density) ** 2)))
