"""Discriminant of Hill's equation from Walsh-function sampling matrices.

Three routes to the same number:

* :func:`discriminant_recursive` -- the O(2**k) running-sum recursion for the
  last columns of the two triangular sampling matrices (the fast path);
* :func:`discriminant_triangular` -- build those triangular matrices densely
  and back-solve for their last columns;
* :func:`discriminant_direct` -- solve the dense Walsh-domain system with the
  integration operator and the permutation matrix of ``p``'s coefficients.

With ``delta = tau / 2**k`` and ``q_n = alpha + beta p_n`` the sampling
matrices are ``I + delta**2 diag(q) Pbar**2`` and
``I + delta**2 (alpha Pbar**2 + beta Pbar diag(p) Pbar)`` (inverted), and the
discriminant is the sum of both last columns.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .excitation import HillProblem, sample_p
from .walsh import (
    integration_operator,
    lambda_of_vector,
    permutation_family,
    similarity_scale,
    walsh_matrix,
)

SINGULAR_RTOL = 1e-12

RECURSIVE_K = (2, 20)
TRIANGULAR_K = (2, 12)
DIRECT_K = (2, 8)


class Method(str, enum.Enum):
    RECURSIVE = "recursive"
    TRIANGULAR = "triangular"
    DIRECT = "direct"
    MONODROMY = "monodromy"
    LYAPUNOV = "lyapunov"


class SingularityError(ArithmeticError):
    """A diagonal entry ``4 + delta**2 q_n`` of the sampling matrices vanishes."""

    def __init__(self, index, k, q_value):
        self.index = index
        self.k = k
        self.q_value = q_value
        super().__init__(
            f"alpha + beta*p_{index} = {q_value!r} is within rtol {SINGULAR_RTOL:g} "
            f"of -2**(2k+2)/tau**2 at k={k}; sampling matrices are singular"
        )


class NumericError(ArithmeticError):
    pass


@dataclass
class DiscriminantResult:
    delta: float
    method: Method
    order: int
    singular_flag: bool = False
    singular_index: Optional[int] = None
    info: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "delta": self.delta,
            "method": self.method.value,
            "order": self.order,
            "singular_flag": self.singular_flag,
            "singular_index": self.singular_index,
            **self.info,
        }


def _check_range(k, bounds, what):
    lo, hi = bounds
    if not isinstance(k, (int, np.integer)) or not lo <= k <= hi:
        raise ValueError(f"{what} supports k in [{lo}, {hi}], got {k!r}")


def _q_samples(problem: HillProblem, k: int) -> np.ndarray:
    return problem.alpha + problem.beta * sample_p(problem, k)


def singularity_guard(problem: HillProblem, k: int) -> Optional[int]:
    """First 1-based sample index where the sampling matrices become singular."""
    d2 = (problem.tau * similarity_scale(k)) ** 2
    q = _q_samples(problem, k)
    bad = np.flatnonzero(np.abs(4.0 + d2 * q) < SINGULAR_RTOL * 4.0)
    return int(bad[0]) + 1 if bad.size else None


def coefficients_psi_xi_mu(problem: HillProblem, k: int, h: int):
    """``(psi_h, xi_h, mu_h)`` for ``1 <= h <= 2**k - 1``."""
    n = 1 << k
    if not 1 <= h <= n - 1:
        raise ValueError(f"h={h} outside [1, {n - 1}]")
    p = sample_p(problem, k)
    a, b, tau = problem.alpha, problem.beta, problem.tau
    big = 4.0 ** (k + 1)
    p_h, p_h1 = p[n - h - 1], p[n - h]  # p_{2^k-h}, p_{2^k-h+1}
    denom = big + tau * tau * (a + b * p_h)
    if abs(denom) < SINGULAR_RTOL * big:
        raise SingularityError(n - h, k, a + b * p_h)
    return 4.0 * tau * tau / denom, a + b * p_h, a + 0.5 * b * (p_h + p_h1)


def _prepare(q, d2):
    """Per-step factors for the running-sum kernel.

    ``q`` holds ``q_1 .. q_m`` along axis 0 (extra axes are a batch).  Row
    ``n`` of the outputs belongs to coefficient index ``n``, i.e. sample
    ``q_{m-n}``.
    """
    qr = q[::-1]
    denom = 4.0 + d2 * qr
    psi = 4.0 * d2 / denom
    pxi = psi * qr
    mu = np.empty_like(qr)
    mu[0] = 0.0
    mu[1:] = 0.5 * (qr[1:] + qr[:-1])
    first = 4.0 / denom[0]
    return first, psi, pxi, mu, denom


def _run_kernel(first, psi, pxi, mu):
    # b_n = -psi_n xi_n sum_{i<n} S_i  (T holds the running sum of S)
    # c_n = -psi_n sum_{j<=n} mu_j Z_{j-1}  (Y holds that running sum); this is
    # the c-recursion with its double sum swapped, which avoids cancellation
    s = z = first
    t = y = 0.0
    for n in range(1, len(psi)):
        t = t + s
        s = s - pxi[n] * t
        y = y + mu[n] * z
        z = z - psi[n] * y
    return s, z


def delta_from_samples(q, d2):
    """Discriminant from samples ``q_1..q_m`` with squared step ``d2``.

    Works on a 1-D ``q`` (returns a float) or on ``q`` of shape ``(m, B)``
    (returns ``B`` values, NaN where the singularity guard trips).
    """
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        # singular entries are detected (and reported or masked) just below
        first, psi, pxi, mu, denom = _prepare(q, d2)
    if q.ndim == 1:
        bad = np.flatnonzero(np.abs(denom) < SINGULAR_RTOL * 4.0)
        if bad.size:
            m = len(q)
            idx = m - int(bad[-1])  # smallest sample index
            raise SingularityError(idx, None, float(q[idx - 1]))
        s, z = _run_kernel(float(first), psi.tolist(), pxi.tolist(), mu.tolist())
        return s + z
    bad = np.any(np.abs(denom) < SINGULAR_RTOL * 4.0, axis=0)
    with np.errstate(all="ignore"):
        s, z = _run_kernel(first, psi, pxi, mu)
        out = s + z
    out = np.where(bad, np.nan, out)
    return out


def discriminant_recursive(problem: HillProblem, k: int) -> DiscriminantResult:
    _check_range(k, RECURSIVE_K, "discriminant_recursive")
    idx = singularity_guard(problem, k)
    if idx is not None:
        raise SingularityError(idx, k, float(_q_samples(problem, k)[idx - 1]))
    d2 = (problem.tau * similarity_scale(k)) ** 2
    with np.errstate(over="raise"):
        try:
            delta = delta_from_samples(_q_samples(problem, k), d2)
        except FloatingPointError as exc:
            raise NumericError(f"running sums overflowed: {exc}") from exc
    if not math.isfinite(delta):
        raise NumericError(f"running sums overflowed (delta={delta})")
    return DiscriminantResult(delta, Method.RECURSIVE, k)


@dataclass
class RecursionState:
    """Every intermediate of the recursion, for inspection and tests."""

    k: int
    delta_step: float
    samples: np.ndarray
    b: np.ndarray
    c: np.ndarray
    S: np.ndarray
    Z: np.ndarray

    @property
    def delta(self):
        return float(self.S[-1] + self.Z[-1])


def recursion_state(problem: HillProblem, k: int) -> RecursionState:
    _check_range(k, RECURSIVE_K, "recursion_state")
    step = problem.tau * similarity_scale(k)
    p = sample_p(problem, k)
    q = problem.alpha + problem.beta * p
    first, psi, pxi, mu, _ = _prepare(q, step * step)
    n = len(q)
    b = np.empty(n)
    c = np.empty(n)
    S = np.empty(n)
    Z = np.empty(n)
    b[0] = c[0] = S[0] = Z[0] = first
    t = y = 0.0
    for i in range(1, n):
        t += S[i - 1]
        b[i] = -pxi[i] * t
        S[i] = S[i - 1] + b[i]
        y += mu[i] * Z[i - 1]
        c[i] = -psi[i] * y
        Z[i] = Z[i - 1] + c[i]
    return RecursionState(k, step, p, b, c, S, Z)


def discriminant_naive(problem: HillProblem, k: int) -> float:
    """The b/c recursions evaluated literally with nested loops (O(n**2)).

    Kept as the equivalence oracle for the running-sum kernel.
    """
    n = 1 << k
    p = sample_p(problem, k).tolist()
    a, beta, tau = problem.alpha, problem.beta, problem.tau
    big = 4.0 ** (k + 1)
    tau2 = tau * tau

    def sample(j):  # p_j, 1-based
        return p[j - 1]

    psi = [0.0] * n
    xi = [0.0] * n
    mu = [0.0] * n
    for h in range(1, n):
        xi[h] = a + beta * sample(n - h)
        psi[h] = 4.0 * tau2 / (big + tau2 * xi[h])
        mu[h] = a + 0.5 * beta * (sample(n - h) + sample(n - h + 1))
    b0 = big / (big + tau2 * (a + beta * sample(n)))
    b = [b0] + [0.0] * (n - 1)
    c = [b0] + [0.0] * (n - 1)
    S = [b0] + [0.0] * (n - 1)
    # mcum[j] = mu_1 + ... + mu_j
    mcum = [0.0] * n
    for j in range(1, n):
        mcum[j] = mcum[j - 1] + mu[j]
    for m in range(1, n):
        acc = 0.0
        for i in range(m):
            acc += S[i]
        b[m] = -psi[m] * xi[m] * acc
        S[m] = S[m - 1] + b[m]
        acc = 0.0
        for i in range(m):
            acc += c[i] * (mcum[m] - mcum[i])
        c[m] = -psi[m] * acc
    return sum(b) + sum(c)


def last_column_of_inverse(u) -> np.ndarray:
    """Last column of ``inv(U)`` for upper-triangular ``U``, bottom entry first solved.

    Returned top-to-bottom, i.e. ``[a_{n-1}, ..., a_1, a_0]``.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    if u.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    diag = np.abs(np.diag(u))
    scale = max(1.0, float(np.max(np.abs(u))))
    bad = np.flatnonzero(diag <= SINGULAR_RTOL * scale)
    if bad.size:
        raise SingularityError(int(bad[0]) + 1, None, float(u[bad[0], bad[0]]))
    x = np.zeros(n)
    x[n - 1] = 1.0 / u[n - 1, n - 1]
    for r in range(n - 2, -1, -1):
        x[r] = -np.dot(u[r, r + 1 :], x[r + 1 :]) / u[r, r]
    return x


def sampling_matrices_inv(problem: HillProblem, k: int, scale: float = 1.0):
    """The two upper-triangular matrices whose inverses are the sampling matrices.

    ``scale`` multiplies ``delta**2``; anything other than 1 is wrong and only
    exists to check that a bad constant is caught.
    """
    n = 1 << k
    p = sample_p(problem, k)
    a, b = problem.alpha, problem.beta
    d2 = (problem.tau * similarity_scale(k)) ** 2 * scale
    q = a + b * p
    gap = (np.arange(n)[None, :] - np.arange(n)[:, None]).astype(float)
    upper = gap > 0
    diag = 1.0 + d2 * q / 4.0
    u_b = np.where(upper, d2 * q[:, None] * gap, 0.0)
    # trapezoid partial sums: p_i/2 + p_{i+1} + ... + p_{j-1} + p_j/2
    trap = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]))])
    u_c = np.where(upper, d2 * (a * gap + b * (trap[None, :] - trap[:, None])), 0.0)
    np.fill_diagonal(u_b, diag)
    np.fill_diagonal(u_c, diag)
    return u_b, u_c


def discriminant_triangular(
    problem: HillProblem, k: int, scale: float = 1.0
) -> DiscriminantResult:
    _check_range(k, TRIANGULAR_K, "discriminant_triangular")
    idx = singularity_guard(problem, k)
    if idx is not None:
        raise SingularityError(idx, k, float(_q_samples(problem, k)[idx - 1]))
    u_b, u_c = sampling_matrices_inv(problem, k, scale)
    col_b = last_column_of_inverse(u_b)
    col_c = last_column_of_inverse(u_c)
    return DiscriminantResult(
        float(col_b.sum() + col_c.sum()), Method.TRIANGULAR, k
    )


def transition_sample(problem: HillProblem, k: int, n: int) -> float:
    """``x1(t_n) + x2'(t_n)`` at ``t_n = n tau / 2**k``.

    Column ``n`` of an upper-triangular inverse only involves the leading
    ``n x n`` block, so this is the kernel run on ``q_1 .. q_n``.
    """
    size = 1 << k
    if not 1 <= n <= size:
        raise ValueError(f"n={n} outside [1, {size}]")
    _check_range(k, RECURSIVE_K, "transition_sample")
    idx = singularity_guard(problem, k)
    if idx is not None and idx <= n:
        raise SingularityError(idx, k, float(_q_samples(problem, k)[idx - 1]))
    d2 = (problem.tau * similarity_scale(k)) ** 2
    return delta_from_samples(_q_samples(problem, k)[:n], d2)


def walsh_domain_system(problem: HillProblem, k: int):
    """``(A, P, W)`` with ``A = I + tau**2 (alpha I + beta L_r) P**2``.

    ``r`` are the Walsh coefficients of the step function holding ``p_n`` on
    cell ``n``, so ``W^-1 L_r W`` is exactly ``diag(p_1..p_N)``.
    """
    n = 1 << k
    w = walsh_matrix(k).astype(float)
    pmat = integration_operator(k)
    r = w @ sample_p(problem, k) / n
    lam = lambda_of_vector(r, permutation_family(k))
    a = np.eye(n) + problem.tau**2 * (
        problem.alpha * np.eye(n) + problem.beta * lam
    ) @ pmat @ pmat
    return a, pmat, w


def discriminant_direct(problem: HillProblem, k: int) -> DiscriminantResult:
    _check_range(k, DIRECT_K, "discriminant_direct")
    idx = singularity_guard(problem, k)
    if idx is not None:
        raise SingularityError(idx, k, float(_q_samples(problem, k)[idx - 1]))
    a, pmat, w = walsh_domain_system(problem, k)
    cond = float(np.linalg.cond(a))
    if not math.isfinite(cond) or cond > 1e12:
        raise NumericError(f"Walsh-domain system is ill-conditioned (cond={cond:.3g})")
    w_end = w[:, -1]  # w(t) on the last cell, i.e. at t = tau
    x1 = np.linalg.solve(a, w_end)[0]
    x2 = (pmat @ np.linalg.solve(a, np.linalg.solve(pmat, w_end)))[0]
    return DiscriminantResult(
        float(x1 + x2), Method.DIRECT, k, info={"condition": cond}
    )
