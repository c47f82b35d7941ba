"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times value iteration, policy evaluation and surrogate assembly on random
problems of a few sizes, plus one end-to-end Dirac sweep, under each
available backend, and checks the backends agree.
"""

import argparse
import time

import numpy as np

from vadp import kernels
from vadp.abstraction import Kind
from vadp.certify import run_pipeline
from vadp.instances import make_instance


def random_mdp(S, A, seed):
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(S), size=(S, A))
    R = rng.random((S, A))
    return T, R


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    for S in (4, 32, 128):
        T, R = random_mdp(S, 3, S)
        yield f"value_iteration S={S} gamma=0.9", lambda T=T, R=R: kernels.value_iteration(T, R, 0.9)[0]
        P = T[:, 0, :]
        yield f"policy_evaluation S={S} gamma=0.9", lambda P=P, R=R: kernels.policy_evaluation(P, R[:, 0], 0.9)[0]
    rng = np.random.default_rng(0)
    K, S, n = 64, 16, 20000
    keys = rng.integers(K, size=n)
    w = rng.random(n)
    rows, rew, q = rng.dirichlet(np.ones(S), size=K), rng.random(K), rng.random(K)
    yield f"assemble n={n}", lambda: kernels.assemble(w, keys, rows, rew, q)[0]
    env = make_instance("randomLatent(8,2,2,seed=5)")
    yield "pipeline randomLatent(8,2,2,seed=5) gamma=0.5", lambda: np.array(
        [r.metrics.delta for r in run_pipeline(env, 0.5, 0.05, 4, Kind.VADP).runs])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    print(f"{'case':<48}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases():
        times, outs = {}, {}
        for b in backends:
            prev = kernels.use_backend(b)
            try:
                times[b], outs[b] = timed(fn, args.repeat)
            finally:
                kernels.use_backend(prev)
        line = f"{name:<48}" + "".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
            diff = float(np.max(np.abs(np.asarray(outs["python"]) - np.asarray(outs["cython"]))))
            if diff > 1e-12:
                line += f"  MISMATCH {diff:.3g}"
        print(line)


if __name__ == "__main__":
    main()
