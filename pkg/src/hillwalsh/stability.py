"""Stability classification, alpha-beta scans, transition curves, interlacing."""

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discriminant import RECURSIVE_K, delta_from_samples
from .excitation import excitation_samples
from .oracles import monodromy_delta

DEFAULT_TOL = 1e-6
DEFAULT_CHART_K = 12
MESH_PER_UNIT = 512


class StabilityClass(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    TRANSITION = "Transition"
    SINGULAR = "Singular"


GRAY_LEVELS = {
    StabilityClass.STABLE: 255,
    StabilityClass.TRANSITION: 128,
    StabilityClass.UNSTABLE: 0,
    StabilityClass.SINGULAR: 64,
}
_CODES = [StabilityClass.STABLE, StabilityClass.UNSTABLE, StabilityClass.TRANSITION,
          StabilityClass.SINGULAR]


def classify(delta, tol=DEFAULT_TOL) -> StabilityClass:
    """Stable if ``|delta| < 2 - tol``, Unstable if ``> 2 + tol``, else Transition."""
    if delta is None or not math.isfinite(delta):
        return StabilityClass.SINGULAR
    a = abs(delta)
    if a < 2.0 - tol:
        return StabilityClass.STABLE
    if a > 2.0 + tol:
        return StabilityClass.UNSTABLE
    return StabilityClass.TRANSITION


def classify_array(deltas, tol=DEFAULT_TOL) -> np.ndarray:
    """Integer codes (index into ``CLASS_ORDER``) for an array of deltas."""
    d = np.asarray(deltas, dtype=float)
    a = np.abs(d)
    codes = np.full(d.shape, 2, dtype=np.int8)
    codes[a < 2.0 - tol] = 0
    codes[a > 2.0 + tol] = 1
    codes[~np.isfinite(d)] = 3
    return codes


CLASS_ORDER = tuple(_CODES)


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"axis count must be a positive integer, got {self.count}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("axis bounds must be finite")
        if self.hi < self.lo:
            raise ValueError(f"axis range reversed: {self.lo} > {self.hi}")

    @classmethod
    def parse(cls, text):
        """``lo:hi:n``"""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected lo:hi:n, got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))

    @property
    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.lo)])
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def step(self) -> float:
        return 0.0 if self.count == 1 else (self.hi - self.lo) / (self.count - 1)


@dataclass
class StabilityGrid:
    alpha_axis: Axis
    beta_axis: Axis
    deltas: np.ndarray  # (count_beta, count_alpha)
    classes: np.ndarray  # int codes into CLASS_ORDER
    k: int
    method: str
    tol: float = DEFAULT_TOL

    def class_at(self, i, j) -> StabilityClass:
        return CLASS_ORDER[int(self.classes[i, j])]

    @property
    def singular_count(self) -> int:
        return int(np.sum(self.classes == 3))


def _row_recursive(excitation, tau, alphas, beta, k):
    n = 1 << k
    p = excitation_samples(excitation, k)
    q = alphas[None, :] + beta * p[:, None]
    return delta_from_samples(q, (tau / n) ** 2)


def _row_monodromy(excitation, tau, alphas, beta, steps):
    with np.errstate(all="ignore"):
        try:
            return monodromy_delta(excitation, tau, alphas, beta, steps)
        except ArithmeticError:
            return np.full(alphas.shape, np.nan)


def _scan_rows(args):
    excitation, tau, alphas, betas, k, method, steps = args
    out = np.empty((len(betas), len(alphas)))
    for r, beta in enumerate(betas):
        if method == "monodromy":
            out[r] = _row_monodromy(excitation, tau, alphas, beta, steps)
        else:
            out[r] = _row_recursive(excitation, tau, alphas, beta, k)
    return out


def default_workers():
    env = os.environ.get("HILLWALSH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"HILLWALSH_WORKERS must be an integer, got {env!r}")
    return 1


def grid_scan(excitation, tau, alpha_axis: Axis, beta_axis: Axis, k=DEFAULT_CHART_K,
              tol=DEFAULT_TOL, workers=None, method="recursive", steps=1 << 12):
    """Discriminant and class at every ``(alpha_j, beta_i)``.

    ``method`` is ``"recursive"`` (the Walsh recursion at order ``k``) or
    ``"monodromy"`` (RK4 oracle with ``steps`` steps).  Rows are shared out to
    ``workers`` processes; each row is computed the same way whatever the
    partition, so the result does not depend on the worker count.
    """
    if method not in ("recursive", "monodromy"):
        raise ValueError(f"unsupported scan method {method!r}")
    if method == "recursive" and not RECURSIVE_K[0] <= k <= RECURSIVE_K[1]:
        raise ValueError(f"k={k} outside {RECURSIVE_K}")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    alphas = alpha_axis.values
    betas = beta_axis.values
    deltas = np.empty((len(betas), len(alphas)))
    chunks = [
        (lo, min(lo + 1, len(betas))) for lo in range(len(betas))
    ] if workers > 1 else [(0, len(betas))]
    jobs = [(excitation, tau, alphas, betas[a:b], k, method, steps) for a, b in chunks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_rows, jobs))
    else:
        results = [_scan_rows(j) for j in jobs]
    for (a, b), res in zip(chunks, results):
        deltas[a:b] = res
    return StabilityGrid(
        alpha_axis=alpha_axis,
        beta_axis=beta_axis,
        deltas=deltas,
        classes=classify_array(deltas, tol),
        k=k,
        method=method,
        tol=tol,
    )


# -- transition curves ------------------------------------------------------


@dataclass
class TransitionCurves:
    plus_level: list = field(default_factory=list)
    minus_level: list = field(default_factory=list)
    skipped_cells: int = 0
    closed: dict = field(default_factory=dict)

    def all_curves(self):
        for level, curves in ((2, self.plus_level), (-2, self.minus_level)):
            for c in curves:
                yield level, c


# edges of a cell: 0 bottom (i, j)-(i, j+1), 1 right (i, j+1)-(i+1, j+1),
# 2 top (i+1, j)-(i+1, j+1), 3 left (i, j)-(i+1, j); corner bits: 1 = (i, j),
# 2 = (i, j+1), 4 = (i+1, j+1), 8 = (i+1, j)
_SEGMENTS = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}


def _edge_key(i, j, e):
    if e == 0:
        return ("h", i, j)
    if e == 2:
        return ("h", i + 1, j)
    if e == 1:
        return ("v", i, j + 1)
    return ("v", i, j)


def _edge_point(f, alphas, betas, key):
    kind, i, j = key
    if kind == "h":
        a, b = f[i, j], f[i, j + 1]
        t = a / (a - b) if a != b else 0.5
        return (alphas[j] + t * (alphas[j + 1] - alphas[j]), betas[i])
    a, b = f[i, j], f[i + 1, j]
    t = a / (a - b) if a != b else 0.5
    return (alphas[j], betas[i] + t * (betas[i + 1] - betas[i]))


def _march(f, alphas, betas):
    """Segments of the zero set of ``f`` as pairs of edge keys, plus skip count."""
    rows, cols = f.shape
    segments = []
    skipped = 0
    for i in range(rows - 1):
        for j in range(cols - 1):
            c = (f[i, j], f[i, j + 1], f[i + 1, j + 1], f[i + 1, j])
            if not all(math.isfinite(v) for v in c):
                skipped += 1
                continue
            case = sum(1 << b for b, v in enumerate(c) if v >= 0.0)
            if case in (5, 10):
                centre_up = (sum(c) / 4.0) >= 0.0
                # case 5: corners (i, j) and (i+1, j+1) are up
                if (case == 5) == centre_up:
                    pairs = [(0, 1), (2, 3)]
                else:
                    pairs = [(3, 0), (1, 2)]
            else:
                pairs = _SEGMENTS[case]
            for e1, e2 in pairs:
                segments.append((_edge_key(i, j, e1), _edge_key(i, j, e2)))
    return segments, skipped


def _join(segments):
    """Chain edge-keyed segments into ordered polylines of edge keys."""
    adj = {}
    for s, (a, b) in enumerate(segments):
        adj.setdefault(a, []).append(s)
        adj.setdefault(b, []).append(s)
    used = [False] * len(segments)
    lines = []

    def walk(start_seg, start_key):
        line = [start_key]
        seg, key = start_seg, start_key
        while seg is not None and not used[seg]:
            used[seg] = True
            a, b = segments[seg]
            key = b if a == key else a
            line.append(key)
            nxt = [s for s in adj[key] if not used[s]]
            seg = nxt[0] if nxt else None
        return line

    # open chains first (start at an edge with a single segment), then loops
    for key in sorted(adj):
        if len(adj[key]) == 1 and not used[adj[key][0]]:
            lines.append((walk(adj[key][0], key), False))
    for s in range(len(segments)):
        if not used[s]:
            line = walk(s, segments[s][0])
            lines.append((line, line[0] == line[-1]))
    return lines


def transition_contours(grid: StabilityGrid) -> TransitionCurves:
    """Linear-interpolated level sets ``delta = +2`` and ``delta = -2``."""
    alphas, betas = grid.alpha_axis.values, grid.beta_axis.values
    out = TransitionCurves()
    if len(alphas) < 2 or len(betas) < 2:
        return out
    skipped = 0
    for level, dest in ((2.0, out.plus_level), (-2.0, out.minus_level)):
        f = grid.deltas - level
        segments, sk = _march(f, alphas, betas)
        skipped = max(skipped, sk)
        for keys, closed in _join(segments):
            pts = [_edge_point(f, alphas, betas, key) for key in keys]
            dest.append(pts)
    out.skipped_cells = skipped
    return out


def bottom_tips(curves: TransitionCurves, beta_axis: Axis, rows: int = 1):
    """Alpha positions where curves reach the lowest ``rows`` grid rows.

    Vertices within the band are clustered (gap > one band height starts a
    new cluster) and each cluster reports its lowest vertex.
    """
    limit = beta_axis.lo + rows * beta_axis.step * (1 + 1e-9)
    pts = sorted(
        (a, b) for _, c in curves.all_curves() for a, b in c if b <= limit
    )
    tips = []
    cluster = []
    gap = max(beta_axis.step * rows, 1e-12)
    for a, b in pts:
        if cluster and a - cluster[-1][0] > gap:
            tips.append(min(cluster, key=lambda p: (p[1], p[0])))
            cluster = []
        cluster.append((a, b))
    if cluster:
        tips.append(min(cluster, key=lambda p: (p[1], p[0])))
    return [a for a, _ in tips]


# -- interlacing ------------------------------------------------------------


@dataclass
class InterlacingReport:
    beta: float
    lambdas: list
    lambda_primes: list
    ordering_ok: bool
    intervals: list
    coincident: list = field(default_factory=list)
    method: str = "recursive"
    edge_touches: list = field(default_factory=list)

    def as_dict(self):
        return {
            "beta": self.beta,
            "lambdas": list(self.lambdas),
            "lambda_primes": list(self.lambda_primes),
            "ordering_ok": self.ordering_ok,
            "intervals": list(self.intervals),
        }


def _chunked(f, size):
    def g(a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.size <= size:
            return f(a)
        return np.concatenate([f(a[i:i + size]) for i in range(0, a.size, size)])

    return g


def _delta_fn(excitation, tau, beta, k, method, steps, chunk_cells=1 << 20):
    """Vectorized ``alpha -> Delta(alpha, beta)``, evaluated in memory-bounded chunks."""
    if method == "monodromy":
        size = max(1, chunk_cells // steps)
        return _chunked(lambda a: monodromy_delta(excitation, tau, a, beta, steps), size)
    if method != "recursive":
        raise ValueError(f"unsupported interlacing method {method!r}")
    n = 1 << k
    p = excitation_samples(excitation, k)
    d2 = (tau / n) ** 2
    size = max(1, chunk_cells // n)
    return _chunked(lambda a: delta_from_samples(a[None, :] + beta * p[:, None], d2), size)


def _bisect(fn, lo, hi, flo, tol, max_iter=200):
    """Vectorized bisection of ``fn`` on brackets ``[lo, hi]`` (sign change)."""
    lo, hi, flo = lo.copy(), hi.copy(), flo.copy()
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _peak(fn, a, b, sign, tol):
    """Golden-section search for the extremum of ``sign * fn`` on ``[a, b]``."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = sign * fn(x1)[0], sign * fn(x2)[0]
    while b - a > tol:
        if f1 > f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = sign * fn(x1)[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = sign * fn(x2)[0]
    x = 0.5 * (a + b)
    return x, fn(x)[0]


def _roots(fn, mesh, values, level, root_tol, touch_tol):
    """Roots of ``fn - level`` on the mesh; returns (roots, coincident pairs)."""
    f = values - level
    sign = np.sign(f)
    idx = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    brackets = [(mesh[i], mesh[i + 1]) for i in idx]
    exact = [float(mesh[i]) for i in np.flatnonzero(f == 0.0)]
    coincident = []
    # discrete extrema that stay on one side: the level may be touched or
    # crossed twice between two mesh points
    shape = -1.0 if level > 0 else 1.0  # Delta = +2 is approached from below
    g = shape * f
    cand = np.flatnonzero((g[1:-1] < g[:-2]) & (g[1:-1] < g[2:]) & (g[1:-1] > 0)) + 1
    for i in cand:
        if g[i] > 1e-2:
            continue
        x, peak = _peak(lambda a: fn(np.atleast_1d(a)) - level, mesh[i - 1], mesh[i + 1],
                        -shape, root_tol)
        if abs(peak) <= touch_tol:
            coincident.append(float(x))
        elif shape * peak < 0.0:
            brackets.append((mesh[i - 1], x))
            brackets.append((x, mesh[i + 1]))
    # a tangency just outside the window shows up as a near-level value at
    # the window edge with the function moving away from the level inward
    edges = []
    for e, nb in ((0, 1), (len(g) - 1, len(g) - 2)):
        if 0.0 < g[e] <= touch_tol and g[e] < g[nb]:
            edges.append(float(mesh[e]))
    roots = list(exact)
    if brackets:
        lo = np.array([b[0] for b in brackets], dtype=float)
        hi = np.array([b[1] for b in brackets], dtype=float)
        flo = fn(lo) - level
        roots.extend(_bisect(lambda a: fn(a) - level, lo, hi, flo, root_tol).tolist())
    for x in coincident:
        roots.extend([x, x])
    return sorted(roots), sorted(coincident), edges


def check_ordering(lambdas, lambda_primes, left_unstable=None):
    """``lambda_0 < lambda'_1 <= lambda'_2 < lambda_1 <= lambda_2 < ...``.

    Checked on the merged, labelled sequence: labels must come in runs that
    alternate, with every interior run of length exactly two (a coincident
    pair counts twice).  If the window starts in an unstable region below
    ``lambda_0`` (``left_unstable``), the first run must be a single ``+``.
    """
    merged = sorted([(x, "+") for x in lambdas] + [(x, "-") for x in lambda_primes])
    if not merged:
        return True
    runs = []
    for _, lab in merged:
        if runs and runs[-1][0] == lab:
            runs[-1][1] += 1
        else:
            runs.append([lab, 1])
    if any(n > 2 for _, n in runs):
        return False
    if any(n != 2 for _, n in runs[1:-1]):
        return False
    if left_unstable:
        return runs[0] == ["+", 1]
    return True


def default_touch_tol(excitation, tau, beta, alpha_range, k, method):
    """Tolerance for calling a near-tangency a coincident root pair.

    The recursion moves a tangency of ``Delta = +-2`` off the level by about
    ``|q| delta**2 / 4``, so for that path the tolerance grows with
    ``delta = tau / 2**k``; it is never below the classification tolerance.
    """
    if method != "recursive":
        return DEFAULT_TOL
    p = excitation_samples(excitation, min(k, 12))
    qmax = max(abs(a) for a in alpha_range) + abs(beta) * float(np.max(np.abs(p)))
    return max(DEFAULT_TOL, 2.0 * qmax * (tau / (1 << k)) ** 2)


def interlacing_scan(excitation, tau, beta, alpha_range, k=14, root_tol=1e-10,
                     method="recursive", steps=1 << 14, mesh_per_unit=MESH_PER_UNIT,
                     touch_tol=None):
    lo, hi = (float(v) for v in alpha_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"bad alpha range {alpha_range!r}")
    fn = _delta_fn(excitation, tau, float(beta), k, method, steps)
    if touch_tol is None:
        touch_tol = default_touch_tol(excitation, tau, beta, (lo, hi), k, method)
    count = max(3, int(math.ceil((hi - lo) * mesh_per_unit)) + 1)
    mesh = np.linspace(lo, hi, count)
    values = fn(mesh)
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("discriminant not finite on the alpha mesh")
    lambdas, co_plus, edge_plus = _roots(fn, mesh, values, 2.0, root_tol, touch_tol)
    primes, co_minus, edge_minus = _roots(fn, mesh, values, -2.0, root_tol, touch_tol)
    ok = check_ordering(lambdas, primes, left_unstable=values[0] > 2.0)

    merged = sorted([(x, "+") for x in lambdas] + [(x, "-") for x in primes])
    intervals = []
    edges = [(lo, None)] + merged + [(hi, None)]
    for (a, la), (b, lb) in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        if la is None or lb is None:
            # window ends: no rule applies, evaluate
            label = classify(float(fn(np.array([0.5 * (a + b)]))[0])).value
        else:
            label = "stable" if la != lb else "unstable"
        intervals.append({"lo": float(a), "hi": float(b), "label": label.lower()})
    return InterlacingReport(
        beta=float(beta),
        lambdas=[float(x) for x in lambdas],
        lambda_primes=[float(x) for x in primes],
        ordering_ok=bool(ok),
        intervals=intervals,
        coincident=[("+", x) for x in co_plus] + [("-", x) for x in co_minus],
        method=method,
        edge_touches=[("+", x) for x in edge_plus] + [("-", x) for x in edge_minus],
    )


def baseline_tips(excitation, tau, alpha_axis: Axis, beta, k=DEFAULT_CHART_K,
                  method="recursive", steps=1 << 12):
    """Alpha positions where transition curves meet the line ``beta`` (sorted).

    On the bottom row of a chart the tongues usually only *touch*
    ``|Delta| = 2``, which a level-set tracer cannot see.  The row is handled
    by the interlacing root finder instead: simple roots, coincident pairs
    (reported once) and tangencies at the window edges all count.
    """
    rep = interlacing_scan(excitation, tau, beta, (alpha_axis.lo, alpha_axis.hi), k=k,
                           method=method, steps=steps)
    tips = set(rep.lambdas) | set(rep.lambda_primes) | {x for _, x in rep.edge_touches}
    return sorted(tips)
