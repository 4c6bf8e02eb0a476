"""Walsh functions in dyadic (Paley) order and the matrices built on them.

Row ``n`` of the Walsh matrix is the product of the Rademacher functions
selected by the bits of ``n`` (bit 0 picks the coarsest one), sampled on the
``2**k`` dyadic cells of ``[0, 1)``.  With this ordering
``w_n * w_m == w_{n ^ m}`` and the integration operator has the familiar
block recursion.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MAX_K = 20
# dense n x n helpers (walsh_matrix, integration_operator, ...) are capped lower
# than MAX_K; 2**16 squared doubles alone would need 32 GiB
MAX_DENSE_K = 13


class WalshSizeError(ValueError):
    """Order exponent or vector length outside the supported range."""


def _check_k(k, kmax=MAX_K):
    if not isinstance(k, (int, np.integer)) or k < 1 or k > kmax:
        raise WalshSizeError(f"order exponent k={k!r} outside [1, {kmax}]")
    return int(k)


def _bit_reverse(c: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(c)
    for j in range(k):
        out |= ((c >> j) & 1) << (k - 1 - j)
    return out


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x >>= 1
    return p


def walsh_value(n: int, t: float) -> int:
    """Value of ``w_n(t)`` on ``[0, 1)``, right-continuous at cell edges."""
    if n < 0:
        raise ValueError(f"sequency index must be non-negative, got {n}")
    if not 0.0 <= t < 1.0:
        raise ValueError(f"t={t} outside [0, 1)")
    sign = 1
    j = 0
    while n >> j:
        if (n >> j) & 1:
            # Rademacher r_{j+1}: sign of the (j+1)-th binary digit of t
            if int(t * (1 << (j + 1))) & 1:
                sign = -sign
        j += 1
    return sign


def walsh_matrix(k: int) -> np.ndarray:
    """Dyadic-ordered ``2**k x 2**k`` Walsh matrix with integer +-1 entries.

    Entry ``(n, c)`` is ``w_n`` on cell ``[c/2**k, (c+1)/2**k)``.  The matrix
    is symmetric and ``W @ W == 2**k * I``.
    """
    k = _check_k(k, MAX_DENSE_K)
    n = 1 << k
    idx = np.arange(n, dtype=np.int64)
    rev = _bit_reverse(idx, k)
    return (1 - 2 * _parity(idx[:, None] & rev[None, :])).astype(np.int64)


def dyadic_index(n: int, m: int) -> int:
    """Sequency of ``w_n * w_m`` (no-carry binary addition)."""
    return n ^ m


def integration_operator(k: int) -> np.ndarray:
    """Operational matrix of integration ``P`` for ``2**k`` Walsh functions.

    Built from ``P(0) = 1/2`` by
    ``P(j) = [[P(j-1), -I/2**(j+1)], [I/2**(j+1), 0]]``.
    """
    k = _check_k(k, MAX_DENSE_K)
    p = np.array([[0.5]])
    for j in range(1, k + 1):
        p = integration_operator_step(p, j)
    return p


def integration_operator_step(prev: np.ndarray, j: int) -> np.ndarray:
    """One step of the block recursion, ``P(j-1) -> P(j)``."""
    h = prev.shape[0]
    eye = np.eye(h) / 2.0 ** (j + 1)
    # + 0.0 turns the -0.0 entries of the negated identity block into 0.0
    return np.block([[prev, -eye], [eye, np.zeros((h, h))]]) + 0.0


@dataclass(frozen=True)
class PermutationFamily:
    """The ``2**k`` symmetric permutations with ``M(t) = [w, L1 w, L2 w, ...]``.

    ``lambdas[i]`` is an index map: ``(L_i v)[r] == v[lambdas[i][r]]``.  Here
    that is ``r ^ i``, so each map is its own inverse.
    """

    k: int
    lambdas: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return 1 << self.k

    def apply(self, i: int, v: np.ndarray) -> np.ndarray:
        return np.asarray(v)[self.lambdas[i]]

    def dense(self, i: int) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=np.int64)
        m[np.arange(self.n), self.lambdas[i]] = 1
        return m


def permutation_family(k: int) -> PermutationFamily:
    k = _check_k(k, MAX_DENSE_K)
    # block recursion: L_i doubles block-diagonally, L_{i+h} anti-diagonally
    maps = np.zeros((1, 1), dtype=np.int64)
    for j in range(k):
        h = 1 << j
        top = np.concatenate([maps, maps + h], axis=1)
        bottom = np.concatenate([maps + h, maps], axis=1)
        maps = np.concatenate([top, bottom], axis=0)
    return PermutationFamily(k=k, lambdas=maps)


def lambda_of_vector(gamma, family: PermutationFamily) -> np.ndarray:
    """Matrix whose column ``j`` is ``L_j @ gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (family.n,):
        raise WalshSizeError(
            f"vector of length {gamma.shape} does not match family size {family.n}"
        )
    return gamma[family.lambdas].T


@dataclass(frozen=True)
class WalshSeries:
    k: int
    coeffs: np.ndarray
    interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        if len(self.coeffs) != 1 << self.k:
            raise WalshSizeError(
                f"{len(self.coeffs)} coefficients for order 2**{self.k}"
            )

    def cell_values(self) -> np.ndarray:
        """Reconstructed step function, one value per dyadic cell."""
        return walsh_matrix(self.k).T @ self.coeffs


def walsh_series_coeffs(f: Callable, k: int) -> WalshSeries:
    """``a_n = int_0^1 f w_n dt`` by the midpoint rule on the dyadic cells."""
    k = _check_k(k, MAX_DENSE_K)
    n = 1 << k
    mids = (np.arange(n) + 0.5) / n
    vals = np.array([f(t) for t in mids], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("f returned non-finite values")
    return WalshSeries(k=k, coeffs=walsh_matrix(k) @ vals / n)


def similarity_scale(k: int) -> float:
    """``W^-1 P W == similarity_scale(k) * Pbar`` (checked against direct products)."""
    return 2.0 ** -_check_k(k)


def pbar_matrices(k: int):
    """Triangular forms of ``P`` and ``P^-1`` under the Walsh similarity.

    Returns ``(pbar, comp)`` with ``pbar = I/2 + Q + Q^2 + ...`` and
    ``comp = I/2 - Q + Q^2 - ...`` (``Q`` the upper shift).  Measured
    relations: ``W P W == pbar``, ``W P^-1 W == 2**(2k+2) * comp`` and
    ``pbar @ comp == I/4``.
    """
    k = _check_k(k, MAX_DENSE_K)
    n = 1 << k
    d = np.arange(n)[None, :] - np.arange(n)[:, None]
    pbar = np.where(d > 0, 1.0, 0.0) + np.where(d == 0, 0.5, 0.0)
    comp = np.where(d > 0, np.where(d % 2 == 0, 1.0, -1.0), 0.0) + np.where(
        d == 0, 0.5, 0.0
    )
    return pbar, comp


def dump_csv(matrix) -> str:
    """Plain comma-separated dump, one row per line, no header."""
    rows = [",".join(repr(float(x)) for x in row) for row in np.asarray(matrix)]
    return "\n".join(rows) + "\n"
