#!/usr/bin/env python3
# Copyright (c) crossbar-precond contributors
# SPDX-License-Identifier: Apache-2.0
"""Independent sampling of the crossbar MVM noise model.

Draws the programmed identity matrix and 1000 random unit inputs at the
default device settings and reports the mean relative MVM error
|y_hat - r| / |r| for several devices. The resulting band is frozen in
tests/unit/test_device.cpp.
"""
import numpy as np

N = 625
INPUTS = 1000
DEVICES = 12
S_W, S_I, S_O = 5e-3, 1e-2, 1e-2
DAC, ADC = 7, 9


def quantize(x, bits, bound):
    levels = 2 ** (bits - 1) - 1
    return np.round(np.clip(x / bound, -1.0, 1.0) * levels) / levels * bound


def device_mean_error(seed):
    rng = np.random.default_rng(seed)
    w = np.eye(N) * (1.0 + S_W * rng.standard_normal((N, N))) + S_W * rng.standard_normal((N, N))
    bound = np.abs(w).sum(axis=1).max() * (1 + 4 * S_I + 4 * S_I) * (1 + 4 * S_O) + 4 * S_O
    errs = []
    for _ in range(INPUTS):
        r = rng.standard_normal(N)
        r /= np.linalg.norm(r)
        a = np.abs(r).max()
        x = quantize(r / a, DAC, 1.0)
        x = x * (1 + S_I * rng.standard_normal(N)) + S_I * rng.standard_normal(N)
        y = w @ x
        y = y * (1 + S_O * rng.standard_normal(N)) + S_O * rng.standard_normal(N)
        y = quantize(y, ADC, bound) * a
        errs.append(np.linalg.norm(y - r))
    return float(np.mean(errs))


if __name__ == "__main__":
    means = [device_mean_error(s) for s in range(DEVICES)]
    print("per-device mean relative error:", " ".join(f"{m:.5f}" for m in means))
    print(f"min {min(means):.5f} max {max(means):.5f}")
