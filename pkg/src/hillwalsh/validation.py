"""Oracle cross-checks behind ``hillwalsh validate``.

Each check returns a :class:`Check`; the worst offender (largest
error/tolerance ratio) is kept so a failing run can report something
actionable on one line.
"""

import math
from dataclasses import dataclass

import numpy as np

from .discriminant import (
    discriminant_direct,
    discriminant_recursive,
    discriminant_triangular,
)
from .excitation import BUILTINS, HillProblem, SquareWave
from .io import fixture_record
from .oracles import (
    constant_coeff_delta,
    lyapunov_terms,
    monodromy,
    piecewise_constant_delta,
    step_levels,
)
from .stability import interlacing_scan

TWO_PI = 2.0 * math.pi


@dataclass
class Check:
    name: str
    ok: bool
    error: float
    tol: float
    detail: str

    @property
    def ratio(self):
        return self.error / self.tol if self.tol > 0 else math.inf


def _worst(name, items, tol):
    """``items`` = [(error, detail)]; pass iff every error is below ``tol``."""
    err, detail = max(items, key=lambda t: t[0])
    return Check(name, bool(err < tol), float(err), tol, detail)


def check_closed_form(k=14):
    cases = [(a, TWO_PI) for a in (0.0625, 0.25, 1.0, 2.0)] + [(-1.0, 1.0)]
    items = []
    for a, tau in cases:
        got = discriminant_recursive(HillProblem(a, 0.0, tau), k).delta
        items.append((abs(got - constant_coeff_delta(a, tau)), f"alpha={a} tau={tau:g}"))
    return _worst(f"closed form (k={k})", items, 5e-3)


def check_paths(count=20, k=10, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    items = []
    for name, ex in BUILTINS.items():
        for a, b in rng.uniform(-5, 5, size=(count, 2)):
            pr = HillProblem(float(a), float(b), TWO_PI, ex)
            d1 = discriminant_recursive(pr, k).delta
            d2 = discriminant_triangular(pr, k, scale=scale).delta
            items.append((abs(d1 - d2) / max(1.0, abs(d1)), f"{name} alpha={a:.4f} beta={b:.4f}"))
    return _worst(f"recursive vs triangular (k={k}, rel)", items, 1e-10)


def check_direct(count=8, k=6, seed=1):
    rng = np.random.default_rng(seed)
    items = []
    for name, ex in BUILTINS.items():
        for a, b in rng.uniform(-5, 5, size=(count, 2)):
            pr = HillProblem(float(a), float(b), TWO_PI, ex)
            d1 = discriminant_recursive(pr, k).delta
            d2 = discriminant_direct(pr, k).delta
            items.append((abs(d1 - d2) / max(1.0, abs(d1)), f"{name} alpha={a:.4f} beta={b:.4f}"))
    return _worst(f"recursive vs direct (k={k}, rel)", items, 1e-6)


def check_monodromy_det(steps=1 << 12):
    items = []
    for name, ex in BUILTINS.items():
        for a in (-2.0, 1.0, 4.0):
            for b in (-3.0, 0.5, 5.0):
                res = monodromy(HillProblem(a, b, TWO_PI, ex), steps)
                items.append((abs(res.det - 1.0), f"{name} alpha={a} beta={b}"))
    return _worst(f"monodromy det (steps={steps})", items, 1e-8)


def check_lyapunov():
    items = []
    for a in (0.0625, 0.5, 1.0):
        lt = lyapunov_terms(HillProblem(a, 0.0, TWO_PI), n_max=2)
        items.append((abs(lt.terms[1] / (a * TWO_PI**2) - 1), f"A1 alpha={a}"))
        items.append((abs(lt.terms[2] / (a * a * TWO_PI**4 / 12) - 1), f"A2 alpha={a}"))
    c = _worst("Lyapunov constant-q A1, A2 (rel)", items, 1e-6)
    pr = HillProblem(0.05, 0.05, TWO_PI)
    lt = lyapunov_terms(pr, n_max=3)
    gap = abs(lt.partial_sums[3] - monodromy(pr, 1 << 14).trace)
    bound = abs(lt.terms[3])
    d = Check("Lyapunov Mathieu next-term bound", bool(gap < bound), gap, bound,
              "alpha=beta=0.05")
    return [c, d]


def check_meissner():
    pr = HillProblem(1.0, 0.5, TWO_PI, SquareWave())
    exact = piecewise_constant_delta(step_levels(pr))
    mono = monodromy(pr, 1 << 14).trace
    rec = discriminant_recursive(pr, 14).delta
    return [
        Check("Meissner exact vs monodromy", abs(exact - mono) < 1e-8, abs(exact - mono),
              1e-8, "alpha=1 beta=0.5"),
        Check("Meissner exact vs recursive (k=14)", abs(exact - rec) < 1e-2,
              abs(exact - rec), 1e-2, "alpha=1 beta=0.5"),
    ]


def check_interlacing(k=12):
    rep = interlacing_scan(BUILTINS["cos"], TWO_PI, 0.5, (-1.0, 3.0), k=k)
    return Check(f"interlacing order (Mathieu beta=0.5, k={k})", rep.ordering_ok,
                 0.0 if rep.ordering_ok else 1.0, 0.5,
                 f"{len(rep.lambdas)} roots of +2, {len(rep.lambda_primes)} of -2")


def run_checks(scale=1.0):
    checks = [check_paths(scale=scale), check_direct(), check_closed_form()]
    checks.append(check_monodromy_det())
    checks += check_lyapunov()
    checks += check_meissner()
    checks.append(check_interlacing())
    return checks


def fixture_records():
    """Oracle values worth pinning; written by ``validate --emit-fixtures``."""
    recs = {}
    pr = HillProblem(0.2, 0.5, TWO_PI)
    res = monodromy(pr, 1 << 16)
    recs["mathieu_monodromy"] = fixture_record(pr, "monodromy", res.steps, res.trace,
                                               det=res.det)
    pr = HillProblem(1.0, 0.5, TWO_PI, SquareWave())
    recs["meissner_exact"] = fixture_record(
        pr, "piecewise_constant", 2, piecewise_constant_delta(step_levels(pr))
    )
    pr = HillProblem(1.0, 0.5, TWO_PI)
    recs["mathieu_recursive_k14"] = fixture_record(
        pr, "recursive", 14, discriminant_recursive(pr, 14).delta
    )
    lt = lyapunov_terms(HillProblem(0.05, 0.05, TWO_PI), n_max=3)
    recs["mathieu_lyapunov"] = fixture_record(
        HillProblem(0.05, 0.05, TWO_PI), "lyapunov", lt.quad_points, lt.delta,
        terms=lt.terms,
    )
    return recs
