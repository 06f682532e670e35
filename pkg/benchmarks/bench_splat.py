"""Compare the compiled and numpy splatting kernels.

Usage: python benchmarks/bench_splat.py [--events N] [--repeat R]

Times the forward splat, its adjoint and one full objective evaluation
(value and gradient on a 16x16 grid) with each backend, and checks that
both produce the same numbers.
"""
import argparse
import time

import numpy as np

from eincm import _splat_py, kernels
from eincm.events import FlowField
from eincm.objectives import ObjectiveConfig, Problem, ReferenceTimes
from eincm.synth import SceneSpec, generate_scene

try:
    from eincm import _splat
except ImportError:
    _splat = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_objective(impl, scene, repeat):
    # swap the kernels Problem calls through
    saved = kernels.splat, kernels.splat_adjoint
    kernels.splat, kernels.splat_adjoint = impl.splat, impl.splat_adjoint
    try:
        refs = ReferenceTimes.for_window(scene.events, scene.edges, scene.t_start, scene.t_end)
        pr = Problem(scene.events, refs, scene.geometry, ObjectiveConfig())
        flow = FlowField.constant(25.0, -15.0, 16, 16)
        pr.value_and_grad(flow)
        value = pr.value_and_grad(flow)[0]
        return best_of(lambda: pr.value_and_grad(flow), repeat), value
    finally:
        kernels.splat, kernels.splat_adjoint = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    h, w = 180, 240
    xs, ys = rng.uniform(0, w, args.events), rng.uniform(0, h, args.events)
    adj = rng.normal(size=(h, w))
    backends = [("numpy", _splat_py)] + ([("cython", _splat)] if _splat is not None else [])
    if _splat is None:
        print("compiled extension not built; only the numpy backend is timed")

    scene = generate_scene(SceneSpec())
    rows, outputs = [], {}
    for name, impl in backends:
        fwd = best_of(lambda: impl.splat(xs, ys, h, w, 1.0, 3.5), args.repeat)
        bwd = best_of(lambda: impl.splat_adjoint(xs, ys, adj, 1.0, 3.5), args.repeat)
        obj, value = bench_objective(impl, scene, args.repeat)
        outputs[name] = (impl.splat(xs, ys, h, w, 1.0, 3.5), value)
        rows.append((name, fwd, bwd, obj))

    print(f"{args.events} events on {w}x{h}, objective on {len(scene.events)} events "
          f"(best of {args.repeat})")
    print(f"{'backend':<8} {'splat ms':>10} {'adjoint ms':>11} {'objective ms':>13}")
    for name, fwd, bwd, obj in rows:
        print(f"{name:<8} {1e3 * fwd:10.2f} {1e3 * bwd:11.2f} {1e3 * obj:13.2f}")
    if len(rows) == 2:
        (_, f0, b0, o0), (_, f1, b1, o1) = rows
        print(f"speedup  {f0 / f1:10.1f}x {b0 / b1:10.1f}x {o0 / o1:12.1f}x")
        img_diff = np.abs(outputs["numpy"][0] - outputs["cython"][0]).max()
        val_diff = abs(outputs["numpy"][1] - outputs["cython"][1])
        print(f"max |image diff| {img_diff:.2e}, |objective diff| {val_diff:.2e}")


if __name__ == "__main__":
    main()
