"""Benchmark the compiled kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from crosspop._kernels import _pure

try:
    from crosspop._kernels import _core
except ImportError:
    _core = None


def time_call(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cd(impl, n=2000, p=50, sweeps=200):
    rng = np.random.default_rng(0)
    X = np.ascontiguousarray(rng.normal(size=(n, p)))
    beta_true = np.zeros(p)
    beta_true[:5] = (1.0, -0.8, 0.5, -0.3, 0.2)
    y = X @ beta_true + rng.normal(size=n)
    w = np.full(n, 1.0 / n)

    def run():
        beta = np.zeros(p)
        impl.cd_enet(X, y, w, 0.02, beta, 0.0, sweeps, 0.0)

    return time_call(run)


def bench_nnet(impl, n=500, p=10, h=3, iters=2000):
    rng = np.random.default_rng(1)
    X = np.ascontiguousarray(rng.normal(size=(n, p)))
    T = np.ascontiguousarray((X[:, :1] + 0.3 * rng.normal(size=(n, 1))))
    init = rng.uniform(-0.5, 0.5, size=p * h + h + h + 1)

    def run():
        w1 = np.ascontiguousarray(init[: p * h].reshape(p, h).copy())
        b1 = init[p * h : p * h + h].copy()
        w2 = np.ascontiguousarray(init[p * h + h : p * h + h + h].reshape(h, 1).copy())
        b2 = init[p * h + h + h :].copy()
        impl.nnet_train(X, T, 0, w1, b1, w2, b2, 0.05, iters)

    return time_call(run, repeat=3)


def main():
    rows = []
    for name, fn, kwargs in (
        ("coordinate descent (n=2000, p=50, 200 sweeps)", bench_cd, {}),
        ("network training (n=500, p=10, h=3, 2000 steps)", bench_nnet, {}),
    ):
        t_pure = fn(_pure, **kwargs)
        t_core = fn(_core, **kwargs) if _core is not None else float("nan")
        rows.append((name, t_pure, t_core))

    print(f"{'kernel':<50} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, t_pure, t_core in rows:
        speed = t_pure / t_core if t_core == t_core else float("nan")
        print(f"{name:<50} {t_pure * 1e3:>8.1f}ms {t_core * 1e3:>8.1f}ms {speed:>7.1f}x")
    if _core is None:
        print("\ncompiled kernel not built; showing fallback only")


if __name__ == "__main__":
    main()
