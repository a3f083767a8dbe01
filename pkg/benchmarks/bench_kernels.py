"""Compare the numba and pure-numpy implementations of the hot kernels.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]

Sizes match one 2 s, 16 kHz utterance on a 4-element sub-array
(125 frames x 257 bins) and one 0.5 s room impulse response. The first
numba call (compilation, or loading from the on-disk cache) is excluded.
"""
import argparse
import math
import time

import numpy as np

from maskrefine import kernels, roomsim


def _inputs(rng):
    T, F, M = 125, 257, 4
    y = rng.standard_normal((T, F, M)) + 1j * rng.standard_normal((T, F, M))
    w = rng.uniform(size=(T, F))
    a = rng.standard_normal((F, M, M)) + 1j * rng.standard_normal((F, M, M))
    a = a @ np.conj(np.swapaxes(a, -1, -2))

    room, fs, rt60 = (7.5, 5.5, 3.5), 16000, 0.5
    length = int(math.ceil(rt60 * fs))
    reach = length * roomsim.SPEED_OF_SOUND / fs
    images, orders = roomsim._image_sources(np.array([3.0, 2.0, 1.5]), room, reach)
    mics = roomsim.nested_array_geometry().positions((4.0, 2.5, 1.5))
    beta = roomsim.eyring_reflection(room, rt60)
    return {
        "weighted_covariance": (y, w),
        "quadratic_form": (y, a),
        "image_source_accumulate": (images, orders, mics, beta, float(fs),
                                    roomsim.SPEED_OF_SOUND, length, 8),
    }, len(images), mics.shape[0]


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    inputs, n_images, n_mics = _inputs(np.random.default_rng(0))
    print(f"image-source case: {n_images} images x {n_mics} mics")
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max rel err':>14}")
    for name, (np_fn, nb_fn) in kernels.KERNELS.items():
        call_args = inputs[name]
        t0 = time.perf_counter()
        nb_fn(*call_args)
        warmup = time.perf_counter() - t0
        t_np, ref = _best(np_fn, call_args, args.repeat)
        t_nb, out = _best(nb_fn, call_args, args.repeat)
        err = np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-300)
        print(f"{name:<26}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x{err:>14.2e}"
              f"   (first numba call {warmup:.2f} s)")


if __name__ == "__main__":
    main()
