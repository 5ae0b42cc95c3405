"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed at the end of the pytest run by
conftest.py, or directly when this file is executed as a script) and then
asserts the verdict at the stated tolerance.
"""

import io
import math
import time
from fractions import Fraction
from math import comb, factorial

import numpy as np
import pytest
import scipy.linalg

from epirk.bench import ExperimentConfig, estimate_order, parse_method_spec, run_convergence, run_workprecision
from epirk.bseries import enumerate_tk_trees, enumerate_tw_trees, order_conditions, symbolic_conditions, tree_name
from epirk.bseries.trees import K_NAMES, TW_CATALOGUE
from epirk.cli import cmd_verify
from epirk.integrators import KrylovProjected, epirk_k_step, epirk_w_step, parse_mode
from epirk.krylov import Fixed, arnoldi
from epirk.matfunc import PsiWeights, psi_matrix
from epirk.methods import get_method
from epirk.problems import get_problem, linear_problem

RESULTS = []


def report(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _max_abs(conds):
    return max(abs(c.residual) for c in conds)


# 1 ---------------------------------------------------------------------------


def test_criterion_1_exact_order_conditions():
    t0 = time.perf_counter()
    k4, w3a, w3b = get_method("epirkk4"), get_method("epirkw3a"), get_method("epirkw3b")
    checks = []

    k_main = order_conditions(k4, 4, "K")
    checks.append(("epirkk4 9 K conditions exactly 0", len(k_main) == 9 and all(c.residual == 0 for c in k_main),
                   f"max |r| = {float(_max_abs(k_main)):.2e}"))
    k_emb = order_conditions(k4, 3, "K", embedded=True)
    checks.append(("epirkk4 embedded order 3 exactly 0", all(c.residual == 0 for c in k_emb),
                   f"max |r| = {float(_max_abs(k_emb)):.2e}"))
    a_main = order_conditions(w3a, 3, "W")
    checks.append(("epirkw3a W order 3 exactly 0", all(c.residual == 0 for c in a_main),
                   f"max |r| = {float(_max_abs(a_main)):.2e}"))
    a_emb = order_conditions(w3a, 2, "W", embedded=True)
    checks.append(("epirkw3a embedded W order 2 exactly 0", all(c.residual == 0 for c in a_emb),
                   f"max |r| = {float(_max_abs(a_emb)):.2e}"))
    b_main = order_conditions(w3b, 3, "W")
    checks.append(("epirkw3b W order 3 to 1e-18", _max_abs(b_main) <= Fraction(1, 10**18),
                   f"max |r| = {float(_max_abs(b_main)):.2e}"))
    b_emb = order_conditions(w3b, 2, "W", embedded=True)
    checks.append(("epirkw3b embedded W order 2 to 1e-18", _max_abs(b_emb) <= Fraction(1, 10**18),
                   f"max |r| = {float(_max_abs(b_emb)):.2e}"))

    # the command itself, output discarded
    for name in ("epirkk4", "epirkw3a", "epirkw3b"):
        cmd_verify(name, tol=0.0, out=io.StringIO())
    elapsed = time.perf_counter() - t0
    checks.append(("runtime < 5 s", elapsed < 5, f"{elapsed:.2f} s"))

    for label, ok, detail in checks:
        print(f"  [{'ok' if ok else 'FAIL'}] {label}: {detail}")
    failed = [f"{label} ({detail})" for label, ok, detail in checks if not ok]
    report(1, not failed, "all sub-checks hold" if not failed else "; ".join(failed))


# 2 ---------------------------------------------------------------------------


def test_criterion_2_tree_census():
    tw, tk = enumerate_tw_trees(4), enumerate_tk_trees(4)
    names_ok = [str(t) for t in tw] == list(TW_CATALOGUE)
    k_ok = all(tree_name(t, "K") == f"tauK{K_NAMES[i]}" for i, t in enumerate(tw, start=1) if i in K_NAMES)
    by_order = [sum(t.order == q for t in tw) for q in range(1, 5)]
    ok = len(tw) == 21 and len(tk) == 9 and names_ok and k_ok and by_order == [1, 2, 5, 13]
    report(2, ok, f"{len(tw)} TW trees (per order {by_order}), {len(tk)} TK trees, table mapping {names_ok and k_ok}")


# 3 ---------------------------------------------------------------------------


def test_criterion_3_order_four_obstruction():
    t0 = time.perf_counter()
    conds = {c.name: c.residual for c in symbolic_conditions(3, 4, "W")}
    r = conds["tauW14"]
    const = r if isinstance(r, Fraction) else r.constant_term()
    elapsed = time.perf_counter() - t0
    ok = const == Fraction(-1, 24) and elapsed < 5
    report(3, ok, f"tauW14 constant term {const} (nonzero for every 3-stage W scheme), {elapsed:.2f} s")


# 4 ---------------------------------------------------------------------------

TARGET_ORDERS = {
    "epirkk4": 4.018722,
    "epirkk4-classical": 4.009777,
    "epirkw3@exact": 2.994241,
    "epirkw3@diag": 2.967430,
    "epirkw3@identity": 2.987911,
    "epirkw3@zero": 2.977000,
}


def test_criterion_4_fixed_step_convergence():
    t0 = time.perf_counter()
    specs = [parse_method_spec(s) for s in TARGET_ORDERS]
    cfg = ExperimentConfig(experiment="convergence", methods=specs, h0=0.01, halvings=5)
    rows = run_convergence(cfg)
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 120
    for key, spec in zip(TARGET_ORDERS, specs):
        mine = [r for r in rows if r.method == spec.name and r.mode == spec.mode]
        q = estimate_order([r.h_or_rtol for r in mine], [r.error for r in mine])
        good = abs(q - TARGET_ORDERS[key]) <= 0.3
        ok &= good
        parts.append(f"{spec.label} {q:.3f} (target {TARGET_ORDERS[key]:.3f}){'' if good else ' OUT'}")
    report(4, ok, ", ".join(parts) + f"; {elapsed:.1f} s")


# 5 ---------------------------------------------------------------------------


def test_criterion_5_k_w_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    tab = get_method("epirkk4")
    worst = 0.0
    for name in ("lorenz96", "allencahn-64"):
        prob = get_problem(name)
        for _ in range(100):
            y = prob.y0 * (1 + 0.05 * rng.standard_normal(prob.dim))
            h = 10 ** rng.uniform(-3, -1)
            m = int(rng.integers(2, 17))
            k = epirk_k_step(prob, y, h, tab, m)
            w = epirk_w_step(prob, y, h, tab, KrylovProjected(m))
            worst = max(worst, np.linalg.norm(k.y_next - w.y_next) / np.linalg.norm(y))
    elapsed = time.perf_counter() - t0
    report(5, worst <= 1e-11 and elapsed < 30,
           f"max ||K step - W step(VHV^T)|| / ||y|| = {worst:.2e} over 200 steps, {elapsed:.1f} s")


# 6 ---------------------------------------------------------------------------


def _phi_dense(M, k):
    """phi_k(M) from scipy's expm of a block upshift matrix (independent of the package)."""
    n = M.shape[0]
    big = np.zeros((n * (k + 1), n * (k + 1)))
    big[:n, :n] = M
    for j in range(k):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    return scipy.linalg.expm(big)[:n, k * n:(k + 1) * n]


def _close(a, b):
    return np.linalg.norm(a - b) <= 1e-11 * max(1.0, np.linalg.norm(b))


def test_criterion_6_lemma_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    n = 20
    fails = {"powers": 0, "phi": 0, "psi": 0, "difference": 0, "components": 0}
    for _ in range(200):
        J = rng.standard_normal((n, n)) / np.sqrt(n)
        m = int(rng.integers(2, 9))
        B = arnoldi(J, rng.standard_normal(n), Fixed(m))
        V, H = B.V, B.H
        An = V @ H @ V.T
        P = np.eye(n) - V @ V.T
        hg = rng.uniform(0.05, 1.5)

        for k in range(1, 5):
            if not _close(np.linalg.matrix_power(An, k), V @ np.linalg.matrix_power(H, k) @ V.T):
                fails["powers"] += 1
            if not _close(_phi_dense(hg * An, k), P / factorial(k) + V @ _phi_dense(hg * H, k) @ V.T):
                fails["phi"] += 1
        for j in range(1, 4):
            w = PsiWeights(j, tuple(Fraction(int(x), 4) for x in rng.integers(-8, 9, j)))
            lhs = sum(float(c) * _phi_dense(hg * An, k) for k, c in enumerate(w.p_row, start=1))
            rhs = float(w.p_tilde) * P + V @ psi_matrix(w, H, hg) @ V.T
            if not _close(lhs, rhs):
                fails["psi"] += 1

        # remainder differences over random stages with a nonlinear f
        C = rng.standard_normal((n, n)) / np.sqrt(n)
        f = lambda y: C @ y + np.sin(y) + 0.1 * y**2
        Y = [rng.standard_normal(n)]
        Y += [Y[0] + 0.1 * rng.standard_normal(n) for _ in range(3)]
        r = [f(x) - f(Y[0]) - An @ (x - Y[0]) for x in Y]

        def delta(j, i):
            return r[i + 1] - r[i] if j == 1 else delta(j - 1, i + 1) - delta(j - 1, i)

        for j in range(1, 4):
            binom = sum((-1) ** k * comb(j, k) * r[j - k] for k in range(j + 1))
            if not _close(delta(j, 0), binom):
                fails["difference"] += 1
        lam = [V.T @ x for x in Y]
        eta = [V.T @ f(x) for x in Y]
        for j in range(2, 5):
            d = sum((-1) ** k * comb(j - 1, k) * (eta[j - 1 - k] - H @ lam[j - 1 - k]) for k in range(j))
            rperp = sum((-1) ** k * comb(j - 1, k) * (f(Y[j - 1 - k]) - V @ eta[j - 1 - k]) for k in range(j))
            full = sum((-1) ** k * comb(j - 1, k) * r[j - 1 - k] for k in range(j))
            if not _close(V @ d + rperp, full):
                fails["components"] += 1
    elapsed = time.perf_counter() - t0
    ok = not any(fails.values()) and elapsed < 30
    report(6, ok, f"200 trials on 20-dim instances, failures {fails}, {elapsed:.1f} s")


# 7 ---------------------------------------------------------------------------


def test_criterion_7_linear_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    M = rng.standard_normal((10, 10)) / 2 - np.eye(10)
    prob = linear_problem(M)
    y = rng.standard_normal(10)
    worst = {}
    for name, mode in [("epirkw3a", "exact"), ("epirkw3b", "exact"), ("epirkk4", "krylov:10"),
                       ("epirkk4-classical", "classical:1e-14")]:
        tab, jm = get_method(name), parse_mode(mode)
        err = 0.0
        for h in (0.05, 0.2, 0.5, 1.0):
            res = epirk_w_step(prob, y, h, tab, jm)
            want = scipy.linalg.expm(h * M) @ y
            err = max(err, np.linalg.norm(res.y_next - want) / np.linalg.norm(want))
            if tab.family == "K" and tab.execution == "native":
                res = epirk_k_step(prob, y, h, tab, 10)
                err = max(err, np.linalg.norm(res.y_next - want) / np.linalg.norm(want))
        worst[f"{name}@{mode}"] = err
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-12 and elapsed < 5
    report(7, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.2f} s")


# 8 ---------------------------------------------------------------------------


def _nonincreasing(xs):
    return all(b <= a for a, b in zip(xs, xs[1:]))


def test_criterion_8_work_precision_trends():
    t0 = time.perf_counter()
    labels = ["epirkk4@krylov:4", "epirkk4-classical@classical:1e-12", "epirkw3@classical:1e-12"]
    cfg = ExperimentConfig(methods=[parse_method_spec(s) for s in labels])
    rows = run_workprecision(cfg, log=io.StringIO())
    elapsed = time.perf_counter() - t0
    by = {s: [r for r in rows if f"{r.method}@{r.mode}" == s] for s in labels}

    k4 = by["epirkk4@krylov:4"]
    ok_a = all(r.status == "ok" and r.krylov_rms == 4.0 for r in k4)
    ok_c = k4[-1].steps_accepted >= 4 * k4[0].steps_accepted
    parts_b, ok_b = [], True
    for s in labels[1:]:
        rs = by[s]
        failed = [r.h_or_rtol for r in rs if r.status != "ok"]
        dims = [round(r.krylov_rms, 2) for r in rs if r.status == "ok"]
        good = not failed and _nonincreasing(dims)
        ok_b &= good
        note = f" failed at rtol {failed}" if failed else ""
        parts_b.append(f"{s} rms {dims}{note}")
    print(f"  (a) {'ok' if ok_a else 'FAIL'}: epirkk4 m=4 rms {[r.krylov_rms for r in k4]}")
    print(f"  (b) {'ok' if ok_b else 'FAIL'}: " + "; ".join(parts_b))
    print(f"  (c) {'ok' if ok_c else 'FAIL'}: accepted steps {k4[0].steps_accepted} at 1e-1, "
          f"{k4[-1].steps_accepted} at 1e-8")
    ok = ok_a and ok_b and ok_c and elapsed < 300
    detail = (f"(a) {'ok' if ok_a else 'FAIL'}, (b) {'ok' if ok_b else 'FAIL'} [" + "; ".join(parts_b) + "], "
              f"(c) {'ok' if ok_c else 'FAIL'} ({k4[-1].steps_accepted}/{k4[0].steps_accepted} steps); {elapsed:.1f} s")
    report(8, ok, detail)


# 9 ---------------------------------------------------------------------------


def test_criterion_9_allen_cahn_smoke():
    from epirk.integrators import ControllerConfig, integrate_adaptive
    from epirk.problems import reference_solve

    t0 = time.perf_counter()
    prob = get_problem("allencahn-64")
    ref = reference_solve(prob, prob.y0, 0.0, 1.2)
    errs = {}
    for label in ("epirkk4@krylov:16", "epirkw3@exact"):
        spec = parse_method_spec(label)
        try:
            res = integrate_adaptive(prob, prob.y0, 0.0, 1.2, spec.tableau(), spec.jac_mode(),
                                     ControllerConfig(atol=1e-6, rtol=1e-6))
            errs[label] = np.linalg.norm(res.y - ref) / np.linalg.norm(ref) if res.t == 1.2 else math.inf
        except Exception as exc:  # reported, not raised
            errs[label] = math.inf
            print(f"  {label}: {exc}")
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-4 and elapsed < 180
    report(9, ok, ", ".join(f"{k} error {v:.2e}" for k, v in errs.items()) + f"; {elapsed:.1f} s")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
