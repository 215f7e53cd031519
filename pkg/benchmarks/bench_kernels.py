"""Benchmark the compiled kernels against the numpy reference.

Usage:  python benchmarks/bench_kernels.py [--repeats N]

Times single NLL evaluations on the bundled 69-study dataset plus three
end-to-end fits, for every backend that is importable.
"""
import argparse
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import dtameta as dm  # noqa: E402
from dtameta.glmm import _rule, _table_arrays  # noqa: E402
from dtameta.kernels import _ref  # noqa: E402

DATA = pathlib.Path(__file__).resolve().parent.parent / "data" / "covid_chest_ct.csv"


def load_backends():
    backends = {"ref": _ref}
    try:
        from dtameta.kernels import _core

        backends["core"] = _core
    except ImportError:
        print("compiled backend not available; benchmarking the reference only")
    return backends


def timeit(fn, repeats):
    best = np.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()

    table, _ = dm.parse_dataset(DATA.read_bytes())
    sample = dm.prepare_sample(table)
    y = (sample.y1, sample.y2, sample.s1sq, sample.s2sq)
    theta = np.array([1.8, 1.2, 0.95, 0.99, -0.47])
    tp, n1, tn, n0, lc1, lc2 = _table_arrays(table)
    z, logw = _rule(7)

    cases = {
        "reitsma_nll": lambda b: b.reitsma_nll(theta, *y),
        "reitsma_nll_grad": lambda b: b.reitsma_nll_grad(theta, *y),
        "reml_nll": lambda b: b.reml_nll(theta[2:], *y),
        "glmm_nll (7 nodes)": lambda b: b.glmm_nll(
            theta, tp, n1, tn, n0, lc1, lc2, z, logw
        ),
        "probit_cond_nll (p=0.6)": lambda b: b.probit_cond_nll(
            theta, 0.5, np.sqrt(0.5), 0.6, *y
        ),
        "step_cond_nll (p=0.9)": lambda b: b.step_cond_nll(
            theta, np.sqrt(0.5), np.sqrt(0.5), 1.645, 0.9, *y
        ),
    }

    backends = load_backends()
    width = max(len(k) for k in cases)
    print(f"\nper-call times, M=69, {args.repeats} repeats (best of 5)\n")
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, fn in cases.items():
        times = {n: timeit(lambda b=b: fn(b), args.repeats) for n, b in backends.items()}
        row = f"{name:<{width}}  " + "".join(
            f"{times[n] * 1e6:>10.1f}us" for n in backends
        )
        if len(times) == 2:
            row += f"{times['ref'] / times['core']:>9.1f}x"
        print(row)

    print("\nend-to-end fits (wall time, one run per backend)\n")
    import os

    for env in backends:
        os.environ["DTAMETA_BACKEND"] = env
        import importlib

        import dtameta.kernels as kmod

        importlib.reload(kmod)
        t0 = time.perf_counter()
        fit = dm.fit_reitsma(sample)
        t_reitsma = time.perf_counter() - t0
        t0 = time.perf_counter()
        dm.fit_glmm(table)
        t_glmm = time.perf_counter() - t0
        t0 = time.perf_counter()
        dm.fit_sensitivity(
            sample, dm.SelectionMechanism.preset("lnDOR"), 0.6, base_fit=fit
        )
        t_sa = time.perf_counter() - t0
        print(
            f"{env:>5}: fit_reitsma {t_reitsma * 1e3:7.1f} ms   "
            f"fit_glmm {t_glmm * 1e3:8.1f} ms   fit_sensitivity {t_sa * 1e3:8.1f} ms"
        )
    os.environ.pop("DTAMETA_BACKEND", None)


if __name__ == "__main__":
    main()
