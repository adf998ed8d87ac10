"""Grid-resolution study: spectral divergence of sampled waves and weak residuals of one scheme step.

Usage: python3 scripts/resolution_study.py [--out results/resolution.json]
"""

import argparse
import time

import numpy as np

from wildeuler.convex_integration import augment, initial_subsolution, x0_checklist
from wildeuler.io import write_json
from wildeuler.stochastics import zero_stopped_path
from wildeuler.torus import TorusGrid
from wildeuler.transform import FrameConfig, InitialData, NoiseSpec, build_frame, default_noise_field
from wildeuler.waves import WaveSpec, apply_A_points, divergence_residual_points, spacetime_points


def spectral_divergence(res: int, n: float = 16.0) -> dict:
    """Relative divergence of wave samples differentiated by FFT, next to the analytic residual."""
    spec = WaveSpec(np.array([1.0, 0.0]), np.array([-0.6, 0.8]), n=n, L=0.25, lo=np.zeros(3), hi=np.ones(3))
    x = np.arange(res) / res
    z = spacetime_points([x] * 3)
    f = apply_A_points(spec, z)
    w = f.w.reshape(res, res, res, 2)
    V = f.V.reshape(res, res, res, 2, 2)
    k = 2 * np.pi * np.fft.fftfreq(res, 1 / res)
    k[res // 2] = 0

    def d(F, ax):
        shape = [1] * F.ndim
        shape[ax] = res
        return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(F, axis=ax), axis=ax).real

    r = np.array([d(w[..., i], 0) + sum(d(V[..., i, j], j + 1) for j in range(2)) for i in range(2)])
    scale = max(np.abs(w).max(), np.abs(V).max()) * n
    return {"spectral": float(np.abs(r).max() / scale),
            "analytic": float(np.abs(divergence_residual_points(spec, z)).max() / scale)}


def step_residuals(res: int, n: float) -> dict:
    """One augmentation step on constant coefficients: the X0 checklist of the result."""
    g = TorusGrid(2, res)
    data = InitialData(g, np.ones(g.shape), np.stack([np.full(g.shape, 0.1), np.full(g.shape, -0.05)]))
    fr = build_frame(data, NoiseSpec("additive", zero_stopped_path(1.0, 2 ** -4), default_noise_field(g)),
                     FrameConfig(stride=1))
    st = initial_subsolution(fr, 0.4, 0.05)
    new, rep = augment(st, n, 1)
    chk = x0_checklist(new).as_dict()
    return {"accepted": rep.accepted, "gain": rep.gain, "div_weak": chk["div_weak"],
            "equation_weak": chk["equation_weak"], "ok": chk["ok"]}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/resolution.json")
    args = ap.parse_args(argv)
    out = {"waves": {}, "step": {}}
    for res in (32, 64, 128):
        t0 = time.perf_counter()
        out["waves"][res] = spectral_divergence(res)
        print(f"waves res={res}: {out['waves'][res]} ({time.perf_counter() - t0:.1f}s)")
    for res in (16, 32, 64):
        for n in (16, 32, 64):
            out["step"][f"{res}_{n}"] = step_residuals(res, n)
            print(f"step res={res} n={n}: {out['step'][f'{res}_{n}']}")
    write_json(args.out, out)


if __name__ == "__main__":
    main()
