"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import string
import timeit

import numpy as np

from docdjinn import _pycore

try:
    from docdjinn import _core
except ImportError:
    _core = None


def _strings(rng, n, length):
    letters = np.array(list(string.ascii_lowercase + " "))
    return ["".join(rng.choice(letters, size=length)) for _ in range(n)]


def _cases(rng):
    pairs = list(zip(_strings(rng, 200, 40), _strings(rng, 200, 40)))
    X = rng.normal(size=(600, 16))
    labels = rng.integers(0, 8, size=600).astype(np.intp)
    return [
        ("levenshtein 200 pairs x 40 chars", lambda m: [m.levenshtein(a, b) for a, b in pairs]),
        ("silhouette_samples 600 x 16, k=8", lambda m: m.silhouette_samples(X, labels, 8)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = [("python", _pycore)] + ([("cython", _core)] if _core is not None else [])
    if _core is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':38s}" + "".join(f"{name:>12s}" for name, _ in impls) + "   speedup")
    for label, fn in _cases(rng):
        if _core is not None:
            ref, fast = fn(_pycore), fn(_core)
            assert np.allclose(np.asarray(ref, float), np.asarray(fast, float)), label
        best = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for _, mod in impls]
        speed = f"{best[0] / best[-1]:8.1f}x" if len(best) > 1 else ""
        print(f"{label:38s}" + "".join(f"{t * 1e3:10.2f}ms" for t in best) + "  " + speed)


if __name__ == "__main__":
    main()
