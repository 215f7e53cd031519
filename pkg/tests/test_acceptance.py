"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with  pytest tests/test_acceptance.py -v -s  to see the per-criterion
lines as they complete.  Dataset: the 69-study COVID-19 chest-CT table in
data/covid_chest_ct.csv.
"""
import time

import numpy as np
import pytest

import dtameta as dm
from dtameta import kernels, reitsma
from dtameta.sroc import sauc_gauss_legendre


def record(criterion: str, passed: bool, detail: str):
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}", flush=True)
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def covid_fit_timed(covid_sample):
    t0 = time.perf_counter()
    fit = dm.fit_reitsma(covid_sample, method="ml")
    return fit, time.perf_counter() - t0


@pytest.fixture(scope="module")
def default_grid(covid_sample):
    return dm.sensitivity_grid(covid_sample)


def test_criterion_1_reitsma_ml(covid_fit_timed):
    fit, elapsed = covid_fit_timed
    a = dm.sauc(fit)
    s = dm.sop(fit)
    ok = (
        abs(a.value - 0.891) <= 0.005
        and abs(s.se - 0.86) <= 0.01
        and abs(s.sp - 0.77) <= 0.01
        and elapsed < 5.0
    )
    record(
        "criterion 1 (Reitsma ML on COVID)",
        ok,
        f"SAUC={a.value:.4f} (0.891±0.005), SOP=({s.se:.3f},{s.sp:.3f}) "
        f"((0.86,0.77)±0.01), fit time {elapsed:.2f}s (<5s)",
    )


def test_criterion_2_glmm(covid_table):
    t0 = time.perf_counter()
    fit = dm.fit_glmm(covid_table)
    elapsed = time.perf_counter() - t0
    a = dm.sauc(fit)
    s = dm.sop(fit)
    ok = (
        abs(a.value - 0.897) <= 0.005
        and abs(s.se - 0.87) <= 0.01
        and abs(s.sp - 0.77) <= 0.01
        and elapsed < 60.0
    )
    record(
        "criterion 2 (GLMM on COVID)",
        ok,
        f"SAUC={a.value:.4f} (0.897±0.005), SOP=({s.se:.3f},{s.sp:.3f}) "
        f"((0.87,0.77)±0.01), fit time {elapsed:.1f}s (<60s)",
    )


def test_criterion_3_reduction_identity(covid_sample, covid_fit_timed):
    fit, _ = covid_fit_timed
    sa = dm.fit_sensitivity(
        covid_sample, dm.SelectionMechanism.preset("lnDOR"), p=1.0
    )
    dp = np.abs(sa.params.to_array() - fit.params.to_array())
    dsauc = abs(sa.sauc.value - dm.sauc(fit).value)
    ok = bool(np.all(dp <= 1e-4) and dsauc <= 1e-4)
    record(
        "criterion 3 (p=1 reduction identity)",
        ok,
        f"max |param diff|={dp.max():.2e} (<=1e-4), |SAUC diff|={dsauc:.2e} (<=1e-4)",
    )


def test_criterion_4_unpublished_counts():
    got = [dm.implied_unpublished(69, p) for p in (1.0, 0.8, 0.6, 0.4)]
    ok = got == [0, 17, 46, 103]
    record(
        "criterion 4 (implied unpublished counts)",
        ok,
        f"M=69 at p=1,0.8,0.6,0.4 -> {got} (expect [0, 17, 46, 103])",
    )


def test_criterion_5_sensitivity_trajectories(default_grid):
    grid = default_grid
    by_mode = {m.mode: i for i, m in enumerate(grid.mechanisms)}
    sauc_at = {
        (mode, p): grid.cell(by_mode[mode], p).fit.sauc.value
        for mode in by_mode
        for p in grid.p_values
        if grid.cell(by_mode[mode], p).fit is not None
    }
    est = sauc_at[("estimated", 0.4)]
    lndor = sauc_at[("lnDOR", 0.4)]
    sens = sauc_at[("sensitivity", 0.4)]
    spec_drift = max(
        abs(sauc_at[("specificity", p)] - sauc_at[("specificity", 1.0)])
        for p in grid.p_values
    )
    ok = (
        abs(est - 0.850) <= 0.015
        and abs(lndor - 0.845) <= 0.015
        and abs(sens - 0.854) <= 0.015
        and spec_drift <= 0.01
    )
    record(
        "criterion 5 (SAUC trajectories at p=0.4)",
        ok,
        f"estimated={est:.4f} (0.850±0.015), lnDOR={lndor:.4f} (0.845±0.015), "
        f"sensitivity={sens:.4f} (0.854±0.015), specificity drift={spec_drift:.4f} (<=0.01)",
    )


def test_criterion_6_extended_grid(covid_sample):
    p_values = tuple(round(1.0 - 0.1 * k, 1) for k in range(10))
    t0 = time.perf_counter()
    grid = dm.sensitivity_grid(covid_sample, p_values=p_values)
    elapsed = time.perf_counter() - t0
    lows = []
    for cell in grid.cells:
        assert cell.fit is not None, f"cell failed: {cell.error}"
        lows.append(cell.fit.sauc.ci_low)
    lows = np.array(lows)
    ok = bool(np.all(np.isfinite(lows)) and np.all(lows > 0.5) and elapsed < 600.0)
    record(
        "criterion 6 (extended grid CI floors)",
        ok,
        f"40 cells, min CI lower bound={lows.min():.3f} (>0.5), "
        f"grid time {elapsed:.1f}s (<600s)",
    )


def test_criterion_7_oracle_recovery():
    truth = dm.BivariateParams(0.2, 0.7, 0.5, 0.45, -0.3)
    true_sauc = dm.sauc(truth).value
    mech = dm.SelectionMechanism.preset("sensitivity", form="step")
    n_pass = 0
    details = []
    for seed in range(20):
        cfg = dm.SimConfig(
            params=truth, n_studies=2000, arm_law="uniform",
            arm_args=(100, 500), seed=seed,
        )
        population, _ = dm.simulate_population(cfg)
        published, p_emp = dm.apply_selection(population, mech, beta=0.19, seed=seed)
        sample = dm.prepare_sample(published)
        naive = dm.fit_reitsma(sample)
        naive_sauc = dm.sauc(naive).value
        adjusted = dm.fit_sensitivity(sample, mech, p_emp, base_fit=naive)
        recovered = abs(adjusted.sauc.value - true_sauc) <= 0.02
        # sensitivity-driven selection must inflate the naive estimate
        biased_up = naive_sauc > true_sauc
        n_pass += recovered and biased_up
        details.append((p_emp, adjusted.sauc.value - true_sauc, naive_sauc - true_sauc))
    mean_p = np.mean([d[0] for d in details])
    ok = n_pass >= 18
    record(
        "criterion 7 (oracle recovery, 20 replicates)",
        ok,
        f"{n_pass}/20 replicates pass (need >=18); mean empirical p={mean_p:.3f}, "
        f"mean naive bias={np.mean([d[2] for d in details]):+.4f}, "
        f"mean adjusted error={np.mean([d[1] for d in details]):+.4f} (|.|<=0.02)",
    )


def test_criterion_8_numerical_hygiene(covid_sample, covid_table):
    # 8a: analytic vs central-difference gradients of the normal NLL
    rng = np.random.default_rng(88)
    grad_rel = 0.0
    for _ in range(10):
        w = np.array([
            rng.uniform(-1, 3), rng.uniform(-1, 3),
            rng.uniform(-1.5, 0.5), rng.uniform(-1.5, 0.5),
            rng.uniform(-1.0, 1.0),
        ])
        _, g = reitsma.nll_grad_working(w, covid_sample)
        fd = np.empty(5)
        for k in range(5):
            h = 1e-6 * max(1.0, abs(w[k]))
            wp, wm = w.copy(), w.copy()
            wp[k] += h
            wm[k] -= h
            fd[k] = (
                reitsma.nll_working(wp, covid_sample)
                - reitsma.nll_working(wm, covid_sample)
            ) / (2 * h)
        grad_rel = max(grad_rel, np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1.0))

    # 8b: GLMM quadrature refinement
    p = dm.BivariateParams(1.88, 1.23, 1.03, 1.12, -0.44)
    v7 = dm.glmm_nll(p, covid_table, dm.QuadratureConfig(nodes_per_dim=7))
    v21 = dm.glmm_nll(p, covid_table, dm.QuadratureConfig(nodes_per_dim=21))
    quad_rel = abs(v7 - v21) / abs(v21)

    # 8c: arm-swap equivariance of the fitted likelihood
    fit_a = dm.fit_reitsma(covid_sample)
    swapped = dm.BivariateSample(
        ids=covid_sample.ids,
        y1=covid_sample.y2.copy(), y2=covid_sample.y1.copy(),
        s1sq=covid_sample.s2sq.copy(), s2sq=covid_sample.s1sq.copy(),
    )
    fit_b = dm.fit_reitsma(swapped)
    swap_diff = abs(fit_a.loglik - fit_b.loglik)

    # 8d: permutation invariance: per-study contributions are bitwise
    # permuted; the total sum is association-limited
    th = fit_a.params.to_array()
    order = np.random.default_rng(3).permutation(len(covid_sample))
    contrib = np.array([
        kernels.reitsma_nll(
            th,
            covid_sample.y1[i : i + 1], covid_sample.y2[i : i + 1],
            covid_sample.s1sq[i : i + 1], covid_sample.s2sq[i : i + 1],
        )
        for i in range(len(covid_sample))
    ])
    perm_exact = bool(np.array_equal(contrib[order], np.array([
        kernels.reitsma_nll(
            th,
            covid_sample.y1[j : j + 1], covid_sample.y2[j : j + 1],
            covid_sample.s1sq[j : j + 1], covid_sample.s2sq[j : j + 1],
        )
        for j in order
    ])))
    total_a = kernels.reitsma_nll(
        th, covid_sample.y1, covid_sample.y2, covid_sample.s1sq, covid_sample.s2sq
    )
    total_b = kernels.reitsma_nll(
        th,
        np.ascontiguousarray(covid_sample.y1[order]),
        np.ascontiguousarray(covid_sample.y2[order]),
        np.ascontiguousarray(covid_sample.s1sq[order]),
        np.ascontiguousarray(covid_sample.s2sq[order]),
    )
    perm_total = abs(total_a - total_b)

    # 8e: SAUC quadrature vs the frozen 10^6-point trapezoid oracle
    po = dm.BivariateParams(1.5, 1.5, 0.5, 0.5, -1.0 + 1e-15)
    sauc_err = abs(dm.sauc(po).value - 0.8869726799834067)
    gl_drift = abs(
        sauc_gauss_legendre(fit_a.params, nodes=128)
        - sauc_gauss_legendre(fit_a.params, nodes=256)
    )

    ok = (
        grad_rel <= 1e-5
        and quad_rel <= 1e-5
        and swap_diff <= 1e-6
        and perm_exact
        and perm_total <= 1e-12 * abs(total_a)
        and sauc_err <= 1e-6
        and gl_drift <= 1e-10
    )
    record(
        "criterion 8 (numerical hygiene)",
        ok,
        f"gradient rel={grad_rel:.2e} (<=1e-5), quadrature rel={quad_rel:.2e} (<=1e-5), "
        f"arm-swap |dloglik|={swap_diff:.2e} (<=1e-6), permutation exact={perm_exact}, "
        f"SAUC vs trapezoid={sauc_err:.2e} (<=1e-6), GL 128v256={gl_drift:.2e} (<=1e-10)",
    )


def test_criterion_9_reitsma_glmm_agreement():
    truth = dm.BivariateParams(1.2, 1.0, 0.4, 0.35, -0.4)
    worst = 0.0
    for seed in (1, 2, 3):
        cfg = dm.SimConfig(
            params=truth, n_studies=40, arm_law="uniform",
            arm_args=(500, 2000), seed=seed,
        )
        table, _ = dm.simulate_population(cfg)
        sr = dm.sauc(dm.fit_reitsma(dm.prepare_sample(table))).value
        sg = dm.sauc(dm.fit_glmm(table)).value
        worst = max(worst, abs(sr - sg))
    ok = worst <= 0.01
    record(
        "criterion 9 (Reitsma-GLMM agreement, arms >= 500)",
        ok,
        f"max |SAUC difference| over 3 seeds = {worst:.5f} (<=0.01)",
    )
