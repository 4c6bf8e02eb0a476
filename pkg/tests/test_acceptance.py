"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n: PASS|FAIL ...`` line (visible with
``pytest -s``) and then asserts at the stated tolerance.  Nothing here is
loosened to make a criterion pass; a red test is the honest answer.
"""

import io
import math
import time

import numpy as np
import pytest

from hillwalsh.cli import main as cli_main
from hillwalsh.discriminant import (
    SingularityError,
    discriminant_direct,
    discriminant_naive,
    discriminant_recursive,
    discriminant_triangular,
)
from hillwalsh.excitation import BUILTINS, Cosine, CosineSum, HillProblem, SquareWave
from hillwalsh.oracles import (
    constant_coeff_delta,
    lyapunov_terms,
    monodromy,
    monodromy_matrix,
    piecewise_constant_delta,
    step_levels,
)
from hillwalsh.stability import (
    Axis,
    StabilityClass,
    CLASS_ORDER,
    baseline_tips,
    grid_scan,
    interlacing_scan,
)
from hillwalsh.walsh import (
    dyadic_index,
    integration_operator,
    permutation_family,
    walsh_matrix,
)

TWO_PI = 2.0 * math.pi


def report(n, ok, detail):
    print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {n}: {detail}"


def test_criterion_01_closed_form():
    cases = [(a, TWO_PI) for a in (0.0625, 0.25, 1.0, 2.0)] + [(-1.0, 1.0)]
    t0 = time.perf_counter()
    worst = 0.0
    for a, tau in cases:
        got = discriminant_recursive(HillProblem(a, 0.0, tau), 14).delta
        worst = max(worst, abs(got - constant_coeff_delta(a, tau)))
    elapsed = time.perf_counter() - t0
    monotone = True
    for a, tau in cases:
        exact = constant_coeff_delta(a, tau)
        errs = [abs(discriminant_recursive(HillProblem(a, 0.0, tau), k).delta - exact)
                for k in (8, 10, 12, 14)]
        monotone &= all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    ok = worst < 5e-3 and monotone and elapsed < 1.0
    report(1, ok, f"max err(k=14)={worst:.3g} (<5e-3), monotone={monotone}, "
                  f"runtime={elapsed:.2f}s (<1s)")


def test_criterion_02_path_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    tri = direct = 0.0
    for ex in BUILTINS.values():
        for a, b in rng.uniform(-5, 5, size=(100, 2)):
            pr = HillProblem(float(a), float(b), TWO_PI, ex)
            d = discriminant_recursive(pr, 10).delta
            tri = max(tri, abs(d - discriminant_triangular(pr, 10).delta) / max(1.0, abs(d)))
        for a, b in rng.uniform(-5, 5, size=(100, 2)):
            pr = HillProblem(float(a), float(b), TWO_PI, ex)
            d = discriminant_recursive(pr, 6).delta
            direct = max(direct, abs(d - discriminant_direct(pr, 6).delta) / max(1.0, abs(d)))
    elapsed = time.perf_counter() - t0
    ok = tri < 1e-10 and direct < 1e-6 and elapsed < 30
    report(2, ok, f"triangular rel={tri:.3g} (<1e-10), direct rel={direct:.3g} (<1e-6), "
                  f"runtime={elapsed:.1f}s (<30s)")


def test_criterion_03_fast_equals_naive():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for ex in BUILTINS.values():
        for k in range(2, 9):
            for a, b in rng.uniform(-5, 5, size=(4, 2)):
                pr = HillProblem(float(a), float(b), TWO_PI, ex)
                d = discriminant_recursive(pr, k).delta
                worst = max(worst, abs(d - discriminant_naive(pr, k)) / max(1.0, abs(d)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 5
    report(3, ok, f"max rel gap={worst:.3g} (<1e-12), runtime={elapsed:.2f}s (<5s)")


def test_criterion_04_walsh_exactness():
    ok_ww = all(np.array_equal(walsh_matrix(k) @ walsh_matrix(k),
                               (1 << k) * np.eye(1 << k, dtype=np.int64))
                for k in range(1, 9))
    # the matrix exactly as printed
    printed_p4 = np.array([[1 / 2, -1 / 4, -1 / 8, 0],
                           [1 / 4, 0, 0, -1 / 8],
                           [1 / 8, 0, 0, 0],
                           [0, 1 / 8, 0, 0]])
    p = integration_operator(2)
    ok_p = np.array_equal(p, printed_p4)
    ok_dyadic = True
    for k in range(1, 7):
        w = walsh_matrix(k)
        n = 1 << k
        for i in range(n):
            for j in range(n):
                ok_dyadic &= np.array_equal(w[i] * w[j], w[dyadic_index(i, j)])
    ok_inv = True
    for k in range(1, 9):
        fam = permutation_family(k)
        ident = np.arange(fam.n)
        for i in range(fam.n):
            ok_inv &= np.array_equal(fam.lambdas[i][fam.lambdas[i]], ident)
    ok = ok_ww and ok_p and ok_dyadic and ok_inv
    report(4, ok, f"WW=2^kI {ok_ww}, P4 printed {ok_p}, dyadic table {ok_dyadic}, "
                  f"involutions {ok_inv}")


def test_criterion_05_monodromy_oracle():
    alphas = np.linspace(0.0, 4.0, 5)
    betas = np.linspace(0.0, 2.0, 5)
    A, B = np.meshgrid(alphas, betas)
    det_err = delta_err = 0.0
    where = ""
    for name, ex in (("Mathieu", Cosine()), ("Eq.L", CosineSum())):
        m, _ = monodromy_matrix(ex, TWO_PI, A, B, 1 << 14)
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        det_err = max(det_err, float(np.max(np.abs(det - 1.0))))
        trace = m[..., 0, 0] + m[..., 1, 1]
        for (i, j), tr in np.ndenumerate(trace):
            d = discriminant_recursive(HillProblem(A[i, j], B[i, j], TWO_PI, ex), 14).delta
            if abs(d - tr) > delta_err:
                delta_err = abs(d - tr)
                where = f"{name} alpha={A[i, j]:g} beta={B[i, j]:g} Delta={tr:.4g}"
    ok = det_err < 1e-8 and delta_err < 1e-2
    report(5, ok, f"max |det-1|={det_err:.3g} (<1e-8), max |Delta gap|={delta_err:.3g} "
                  f"(<1e-2) at {where}")


def test_criterion_06_lyapunov():
    rel = 0.0
    for a in (0.0625, 0.5, 1.0, 2.0):
        lt = lyapunov_terms(HillProblem(a, 0.0, TWO_PI), n_max=2)
        rel = max(rel, abs(lt.terms[1] / (a * TWO_PI**2) - 1),
                  abs(lt.terms[2] / (a * a * TWO_PI**4 / 12) - 1))
    pr = HillProblem(0.05, 0.05, TWO_PI)
    lt = lyapunov_terms(pr, n_max=3)
    a1, a2, a3 = lt.terms[1], lt.terms[2], lt.terms[3]
    gap = abs((2 - a1 + a2 - a3) - monodromy(pr, 1 << 14).trace)
    ok = rel < 1e-6 and gap < abs(a3)
    report(6, ok, f"A1/A2 rel={rel:.3g} (<1e-6), Mathieu gap={gap:.3g} < |A3|={abs(a3):.3g}")


def test_criterion_07_meissner():
    pr = HillProblem(1.0, 0.5, TWO_PI, SquareWave())
    exact = piecewise_constant_delta(step_levels(pr))
    mono = monodromy(pr, 1 << 14).trace
    rec = discriminant_recursive(pr, 14).delta
    ok = abs(exact - mono) < 1e-8 and abs(exact - rec) < 1e-2
    report(7, ok, f"exact vs monodromy={abs(exact - mono):.3g} (<1e-8), "
                  f"vs recursive={abs(exact - rec):.3g} (<1e-2)")


def test_criterion_08_chart_reproduction():
    ex = CosineSum()
    ax, bx = Axis(0.0, 4.0, 200), Axis(0.0, 2.0, 100)
    t0 = time.perf_counter()
    grid = grid_scan(ex, TWO_PI, ax, bx, k=12, workers=1)
    tips = baseline_tips(ex, TWO_PI, ax, 0.0, k=12)
    elapsed = time.perf_counter() - t0
    cell = ax.step
    targets = (0.0, 0.25, 1.0, 2.25, 4.0)
    miss = max(min(abs(t - x) for x in tips) if tips else math.inf for t in targets)
    oracle = grid_scan(ex, TWO_PI, ax, bx, workers=1, method="monodromy", steps=2048)
    trans = CLASS_ORDER.index(StabilityClass.TRANSITION)
    sing = CLASS_ORDER.index(StabilityClass.SINGULAR)
    mask = ~np.isin(grid.classes, (trans, sing)) & ~np.isin(oracle.classes, (trans, sing))
    agree = float(np.mean(grid.classes[mask] == oracle.classes[mask]))
    ok = miss <= cell and agree >= 0.97 and elapsed < 120
    report(8, ok, f"tips={[round(x, 4) for x in tips]} worst offset={miss:.3g} "
                  f"(<= cell {cell:.3g}), class agreement={agree:.4f} over {int(mask.sum())} "
                  f"cells (>=0.97), chart runtime={elapsed:.1f}s (<120s)")


def test_criterion_09_interlacing():
    ex = Cosine()
    rep = interlacing_scan(ex, TWO_PI, 0.5, (-1.0, 5.0), k=14)
    ref = interlacing_scan(ex, TWO_PI, 0.5, (-1.0, 5.0), method="monodromy", steps=8192)
    got = sorted(rep.lambdas + rep.lambda_primes)
    want = sorted(ref.lambdas + ref.lambda_primes)
    if len(got) == len(want):
        gap = max(abs(x - y) for x, y in zip(got, want))
    else:
        gap = math.inf
    ok = rep.ordering_ok and gap < 1e-4
    report(9, ok, f"ordering_ok={rep.ordering_ok}, {len(got)} roots vs {len(want)} oracle, "
                  f"max root gap={gap:.3g} (<1e-4)")


def test_criterion_10_singularity_guard():
    # The guard must fire on the constructed input and stay silent once alpha is
    # nudged.  What the recursion then returns (a huge value, or an overflow
    # error because the denominator is only ~1e-6 of its usual size) is a
    # separate matter and is only reported.
    raised, cleared, after = [], [], []
    for k, tau in ((2, TWO_PI), (4, 1.0), (6, TWO_PI), (8, 1.0)):
        alpha = -(2.0 ** (2 * k + 2)) / tau**2
        try:
            discriminant_recursive(HillProblem(alpha, 0.0, tau), k)
            raised.append(False)
        except SingularityError:
            raised.append(True)
        try:
            d = discriminant_recursive(HillProblem(alpha * (1 + 1e-6), 0.0, tau), k).delta
            cleared.append(True)
            after.append(f"{d:.3g}")
        except SingularityError:
            cleared.append(False)
            after.append("singular")
        except ArithmeticError as exc:
            cleared.append(True)
            after.append(type(exc).__name__)
    ok = all(raised) and all(cleared)
    report(10, ok, f"guard raised={raised}, cleared after 1e-6 relative nudge={cleared}, "
                   f"results after nudge={after}")


def test_criterion_11_determinism(tmp_path):
    outs = {}
    for w in (1, 8):
        d = tmp_path / f"w{w}"
        argv = ["chart", "--excitation", "cossum", "--alpha-range", "0:4:200",
                "--beta-range", "0:2:100", "-k", "12", "--workers", str(w), "--out", str(d)]
        code = cli_main(argv, out=io.StringIO(), err=io.StringIO())
        assert code == 0
        outs[w] = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    same = outs[1] == outs[8] and len(outs[1]) == 3
    report(11, same, f"files {sorted(outs[1])} byte-identical for workers 1 and 8: {same}")
