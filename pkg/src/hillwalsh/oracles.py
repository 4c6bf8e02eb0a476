"""Independent ways to get the discriminant, used to check the Walsh paths.

* :func:`monodromy` integrates the fundamental matrix over one period with
  fixed-step RK4 (steps forced onto the jumps of step excitations);
* :func:`constant_coeff_delta` / :func:`piecewise_constant_delta` are exact
  closed forms and propagator products;
* :func:`lyapunov_terms` evaluates the first terms of the alternating
  multiple-integral series ``2 - A1 + A2 - A3 + ...`` by quadrature;
* :func:`delta_power_expansion_check` expands the integral form of the
  running sums in powers of ``delta = tau / 2**k``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .discriminant import discriminant_recursive
from .excitation import HillProblem

MIN_STEPS = 64


class IntegrationError(ArithmeticError):
    pass


@dataclass
class MonodromyResult:
    m: np.ndarray
    trace: float
    det: float
    multipliers: tuple
    steps: int

    @property
    def delta(self):
        return self.trace


def _segments(excitation, steps):
    """Split ``[0, 1)`` at the jumps and share ``steps`` out proportionally."""
    cuts = sorted(set(b for b in excitation.breakpoints() if 0.0 < b < 1.0))
    edges = [0.0] + cuts + [1.0]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        out.append((lo, hi, max(1, int(round(steps * (hi - lo))))))
    return out


def _ordered_product(r):
    """``r[n-1] @ ... @ r[1] @ r[0]`` by pairwise reduction."""
    while len(r) > 1:
        tail = r[-1:] if len(r) % 2 else None
        if tail is not None:
            r = r[:-1]
        r = r[1::2] @ r[0::2]
        if tail is not None:
            r = np.concatenate([r, tail])
    return r[0]


def _system(q):
    a = np.zeros(np.shape(q) + (2, 2))
    a[..., 0, 1] = 1.0
    a[..., 1, 0] = -q
    return a


def _rk4_step_matrices(q0, qm, q1, h):
    # RK4 applied to z' = A(t) z is z -> R z with R built from the stage matrices
    a0, am, a1 = _system(q0), _system(qm), _system(q1)
    eye = np.eye(2)
    k1 = a0
    k2 = am @ (eye + 0.5 * h * k1)
    k3 = am @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def monodromy_matrix(excitation, tau, alpha, beta, steps):
    """Monodromy matrices for (broadcast) ``alpha``/``beta`` arrays.

    Returns an array of shape ``broadcast(alpha, beta).shape + (2, 2)`` and
    the number of steps actually taken.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    batch = np.broadcast(alpha, beta).shape
    mats = []
    total = 0
    for lo, hi, n in _segments(excitation, steps):
        total += n
        h = (hi - lo) * tau / n
        s0 = lo + (hi - lo) * np.arange(n) / n
        s1 = lo + (hi - lo) * np.arange(1, n + 1) / n
        sm = 0.5 * (s0 + s1)
        if excitation.piecewise_constant:
            # constant on the segment; avoid the jump sitting on its right edge
            mid = float(excitation.phase(0.5 * (lo + hi)))
            p0 = pm = p1 = np.full(n, mid)
        else:
            p0, pm, p1 = (np.asarray(excitation.phase(s), dtype=float) for s in (s0, sm, s1))
        expand = (slice(None),) + (None,) * len(batch)
        q0 = alpha + beta * p0[expand]
        qm = alpha + beta * pm[expand]
        q1 = alpha + beta * p1[expand]
        r = _rk4_step_matrices(q0, qm, q1, h)
        mats.append(_ordered_product(r))
    m = mats[0]
    for seg in mats[1:]:
        m = seg @ m
    if not np.all(np.isfinite(m)):
        raise IntegrationError("fundamental matrix blew up during integration")
    return m, total


def monodromy(problem: HillProblem, steps: int = 1 << 14) -> MonodromyResult:
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}, got {steps}")
    m, total = monodromy_matrix(
        problem.excitation, problem.tau, problem.alpha, problem.beta, steps
    )
    trace = float(m[0, 0] + m[1, 1])
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    root = np.sqrt(complex(trace * trace - 4.0))
    rho = ((trace + root) / 2.0, (trace - root) / 2.0)
    return MonodromyResult(m=m, trace=trace, det=det, multipliers=rho, steps=total)


def monodromy_delta(excitation, tau, alpha, beta, steps=1 << 12):
    """Traces of the monodromy matrices over an ``alpha``/``beta`` batch."""
    m, _ = monodromy_matrix(excitation, tau, alpha, beta, steps)
    return m[..., 0, 0] + m[..., 1, 1]


def constant_coeff_delta(alpha: float, tau: float) -> float:
    if not tau > 0:
        raise ValueError("tau must be positive")
    if alpha >= 0:
        return 2.0 * math.cos(tau * math.sqrt(alpha))
    return 2.0 * math.cosh(tau * math.sqrt(-alpha))


def propagator(q: float, d: float) -> np.ndarray:
    """Exact state transition of ``x'' + q x = 0`` over a span ``d``."""
    if q > 0:
        w = math.sqrt(q)
        c, s = math.cos(w * d), math.sin(w * d)
        return np.array([[c, s / w], [-w * s, c]])
    if q < 0:
        w = math.sqrt(-q)
        c, s = math.cosh(w * d), math.sinh(w * d)
        return np.array([[c, s / w], [w * s, c]])
    return np.array([[1.0, d], [0.0, 1.0]])


def piecewise_constant_delta(levels) -> float:
    """Trace of the ordered propagator product for ``[(q, duration), ...]``."""
    m = np.eye(2)
    for q, d in levels:
        if not d > 0:
            raise ValueError(f"durations must be positive, got {d}")
        m = propagator(float(q), float(d)) @ m
    return float(m[0, 0] + m[1, 1])


def step_levels(problem: HillProblem):
    """``(q, duration)`` pieces for a piecewise-constant excitation."""
    ex = problem.excitation
    if not hasattr(ex, "levels"):
        raise TypeError(f"{ex.label()} is not piecewise constant")
    return [
        (problem.alpha + problem.beta * v, frac * problem.tau) for v, frac in ex.levels()
    ]


def _gauss_nodes(points):
    """Composite 4-point Gauss-Legendre nodes/weights on [0, 1]."""
    panels = max(1, points // 4)
    x, w = np.polynomial.legendre.leggauss(4)
    lo = np.arange(panels) / panels
    nodes = (lo[:, None] + (x[None, :] + 1.0) / (2.0 * panels)).ravel()
    weights = np.tile(w / (2.0 * panels), panels)
    return nodes, weights


@dataclass
class LyapunovSeries:
    terms: list
    partial_sums: list
    quad_points: int
    tau: float = field(default=0.0)

    @property
    def delta(self):
        return self.partial_sums[-1]


def lyapunov_terms(problem: HillProblem, n_max: int = 3, quad_points: int = 64):
    """``[A0, A1, ..., A_{n_max}]`` and the alternating partial sums.

    ``A0 = 2`` (the trace normalization, twice Lyapunov's own constant).  The
    simplices ``0 <= t_n <= ... <= t_1 <= tau`` are mapped onto the unit cube
    by ``t_1 = tau u_1``, ``t_{j+1} = t_j u_{j+1}`` and integrated with
    composite Gauss-Legendre rules, which never touch the cell endpoints.
    """
    if not 0 <= n_max <= 3:
        raise ValueError("only A0..A3 are implemented")
    if quad_points < 32:
        raise ValueError("quad_points must be >= 32")
    tau = problem.tau
    u, w = _gauss_nodes(quad_points)

    def q(t):
        vals = problem.q(t)
        if not np.all(np.isfinite(vals)):
            raise ValueError("q returned non-finite values")
        return vals

    terms = [2.0]
    if n_max >= 1:
        terms.append(float(tau * tau * np.sum(w * q(tau * u))))
    if n_max >= 2:
        t1 = tau * u[:, None]
        t2 = t1 * u[None, :]
        kern = (tau - t1 + t2) * (t1 - t2) * tau * t1
        ww = w[:, None] * w[None, :]
        terms.append(float(np.sum(ww * kern * q(t1) * q(t2))))
    if n_max >= 3:
        t1 = tau * u[:, None, None]
        t2 = t1 * u[None, :, None]
        t3 = t2 * u[None, None, :]
        kern = (tau - t1 + t3) * (t1 - t2) * (t2 - t3) * tau * t1 * t2
        ww = w[:, None, None] * w[None, :, None] * w[None, None, :]
        terms.append(float(np.sum(ww * kern * q(t1) * q(t2) * q(t3))))
    partial = []
    acc = 0.0
    for j, a in enumerate(terms):
        acc += a if j % 2 == 0 else -a
        partial.append(acc)
    return LyapunovSeries(terms=terms, partial_sums=partial, quad_points=len(u), tau=tau)


def cell_integrals(problem: HillProblem, k: int, points: int = 8) -> np.ndarray:
    """``C[n] = int_{tau - n delta}^{tau} q``, ``n = 0 .. 2**k + 1``."""
    n = 1 << k
    delta = problem.tau / n
    x, w = np.polynomial.legendre.leggauss(points)
    hi = problem.tau - delta * np.arange(n + 1)  # cell j spans [hi[j] - delta, hi[j]]
    t = hi[:, None] - delta * (x[None, :] + 1.0) / 2.0
    cells = (delta / 2.0) * np.sum(w[None, :] * problem.q(t), axis=1)
    return np.concatenate([[0.0], np.cumsum(cells)])


def integral_table(problem: HillProblem, k: int) -> np.ndarray:
    """``I[n, m] = int_{tau - n delta}^{tau - m delta} q`` for ``0 <= m, n <= 2**k + 1``."""
    c = cell_integrals(problem, k)
    return c[:, None] - c[None, :]


def integral_recursion(problem: HillProblem, k: int):
    """Running sums ``S_n``, ``Z_n`` with the sampled sums replaced by integrals.

    ``S_n = 1 - delta sum_{i<n} S_i I[n+1, i+1]`` and
    ``Z_n = 1 - delta sum_{i<n} (n - i) Z_i I[i+2, i+1]``.
    """
    n = 1 << k
    delta = problem.tau / n
    table = integral_table(problem, k)
    s = np.ones(n)
    z = np.ones(n)
    diag = np.array([table[i + 2, i + 1] for i in range(n)])
    for m in range(1, n):
        i = np.arange(m)
        s[m] = 1.0 - delta * np.dot(s[:m], table[m + 1, i + 1])
        z[m] = 1.0 - delta * np.dot((m - i) * z[:m], diag[:m])
    return s, z


def expansion_terms(table, delta, n, order):
    """Coefficients of ``delta**j`` (``j = 1..order``) in ``S_n`` and ``Z_n``.

    Grouping the integral recursions by powers of ``delta`` gives nested sums
    over the ``I`` table; these are evaluated inner-to-outer.
    """
    idx = np.arange(table.shape[0])
    # S side: f_1(i) = I[n+1, i]; inner chain g_0 = 1, g_j(i) = sum_{l<i} I[i, l] g_{j-1}(l)
    g = np.where(idx >= 1, 1.0, 0.0)
    s_terms = []
    for j in range(1, order + 1):
        lo = j  # outer index i runs from j to n
        outer = sum(table[n + 1, i] * g[i] for i in range(lo, n + 1))
        s_terms.append(outer * delta**j)
        g = np.array(
            [sum(table[i, l] * g[l] for l in range(1, i)) if i >= 1 else 0.0 for i in idx]
        )
    # Z side: h_0 = 1, h_j(i) = sum_{l=i+1}^{top} I[l, i] h_{j-1}(l) with the
    # upper limit shrinking by one per nesting level
    z_terms = []
    for j in range(1, order + 1):
        h = np.ones(table.shape[0])
        for level in range(j - 1):
            top = n + 1 - level
            h = np.array(
                [sum(table[l, i] * h[l] for l in range(i + 1, top + 1)) for i in idx]
            )
        upper = n + 2 - j
        z_terms.append(delta**j * sum(table[i, 1] * h[i] for i in range(2, upper + 1)))
    return s_terms, z_terms


def delta_power_expansion_check(problem: HillProblem, k: int = 4, order: int = 2):
    """Compare the truncated delta-power expansion with the full recursions."""
    if not 1 <= k <= 6:
        raise ValueError("expansion check is limited to k <= 6")
    if not 1 <= order <= 3:
        raise ValueError("order must be 1, 2 or 3")
    n = (1 << k) - 1
    delta = problem.tau / (1 << k)
    table = integral_table(problem, k)
    s_terms, z_terms = expansion_terms(table, delta, n, order)
    a_terms = [s + z for s, z in zip(s_terms, z_terms)]
    expansion = 2.0 + sum((-1) ** j * a for j, a in enumerate(a_terms, start=1))
    s, z = integral_recursion(problem, k)
    integral = float(s[-1] + z[-1])
    k_rec = max(k, 2)
    recursive = discriminant_recursive(problem, k_rec).delta
    return {
        "k": k,
        "order": order,
        "delta_step": delta,
        "A": [2.0] + a_terms,
        "delta_expansion": expansion,
        "delta_integral_recursion": integral,
        "delta_recursive": recursive,
        "gap_expansion_vs_integral": abs(expansion - integral),
        "gap_expansion_vs_recursive": abs(expansion - recursive),
    }
