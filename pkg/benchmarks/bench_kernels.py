"""Time the numpy and numba kernel backends on real fixture metrics.

    python3 benchmarks/bench_kernels.py [--repeat N] [--fixture NAME]

Prints per-kernel microseconds for each backend, then the end-to-end time of
one geometry evaluation (Christoffel + Riemann) per point.
"""

import argparse
import time

from hspace6 import _kernels
from hspace6.config import load_fixture
from hspace6.metrics import SamplerConfig, metric_at, sample_points
from hspace6.tensors import geometry_at


def best_of(fn, args, repeat):
    fn(*args)  # warm-up, triggers numba compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times) * 1e6


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--fixture", default="t2211_generic")
    parser.add_argument("--points", type=int, default=50)
    args = parser.parse_args()

    spec = load_fixture(args.fixture).spec
    pts = sample_points(spec, SamplerConfig(count=args.points))
    m = metric_at(spec, pts[0])
    g = (m.g.val, m.g.grad, m.g.hess)
    ginv = _kernels.inverse_jet_np(*g)
    gam = _kernels.christoffel_np(ginv[0], ginv[1], m.g.grad, m.g.hess)
    b = 2.0 * m.g.val

    kernels = {
        "inverse_jet": ("inverse_jet", g),
        "christoffel": ("christoffel", (ginv[0], ginv[1], m.g.grad, m.g.hess)),
        "riemann": ("riemann", gam),
        "cov_deriv": ("cov_deriv", (b, m.g.grad, gam[0])),
    }
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    print(f"fixture {args.fixture}, best of {args.repeat} (microseconds)")
    print(f"{'kernel':14s}" + "".join(f"{b:>12s}" for b in backends))
    for label, (name, kargs) in kernels.items():
        row = [best_of(getattr(_kernels, f"{name}_{'np' if b == 'numpy' else 'nb'}"), kargs, args.repeat) for b in backends]
        print(f"{label:14s}" + "".join(f"{t:12.1f}" for t in row))

    before = _kernels.backend()
    metrics = [metric_at(spec, p) for p in pts]
    for b in backends:
        _kernels.set_backend(b)
        geometry_at(metrics[0])
        t = time.perf_counter()
        for mm in metrics:
            geometry_at(mm)
        per = (time.perf_counter() - t) / len(metrics) * 1e6
        print(f"geometry_at [{b}] {per:10.1f} us/point over {len(metrics)} points")
    _kernels.set_backend(before)


if __name__ == "__main__":
    main()
