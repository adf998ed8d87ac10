"""Calibrated constants and the table that stores them.

c_seg(N)  segment-length constant: L|s| >= c_seg (e - |w|^2/2)/sqrt(e) for selected segments
c_osc(N)  energy-ratio constant implied by c_seg: 1/2 mean(phi^2) c_seg^2 for the box cutoff phi
kappa     gain constant: accepted gain >= kappa I^2 along calibration runs
chi0      floor scale of chi(d) = chi0 min(d, 1)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import SelectionParams, sample_interior_points, select_segment, verify_segment
from .waves import CutoffSpec, profile_derivs

TABLE_PATH = Path(__file__).with_name("calibration.json")
SAFETY = 0.9


@dataclass
class CalibrationTable:
    c_seg: dict                  # N -> float
    c_osc: dict                  # N -> float
    kappa: float
    chi0: float = 0.1
    cutoff: dict = field(default_factory=lambda: {"order": 4, "plateau": 0.5})
    meta: dict = field(default_factory=dict)

    def c_cal(self, N: int) -> float:
        return float(self.c_seg[int(N)])

    def energy_constant(self, N: int) -> float:
        return float(self.c_osc[int(N)])

    def selection_params(self, N: int) -> SelectionParams:
        return SelectionParams(c_cal=self.c_cal(N), chi0=self.chi0)

    def to_dict(self) -> dict:
        return {"c_seg": {str(k): v for k, v in sorted(self.c_seg.items())},
                "c_osc": {str(k): v for k, v in sorted(self.c_osc.items())},
                "kappa": self.kappa, "chi0": self.chi0, "cutoff": self.cutoff, "meta": self.meta}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationTable":
        return cls({int(k): float(v) for k, v in d["c_seg"].items()},
                   {int(k): float(v) for k, v in d["c_osc"].items()},
                   float(d["kappa"]), float(d.get("chi0", 0.1)), dict(d.get("cutoff", {})), dict(d.get("meta", {})))


def load_table(path=None) -> CalibrationTable:
    with open(path or TABLE_PATH) as fh:
        return CalibrationTable.from_dict(json.load(fh))


def profile_mean_square(cutoff: CutoffSpec = CutoffSpec()) -> float:
    """Integral over [0, 1] of the squared 1D cutoff profile (Gauss-Legendre per polynomial piece)."""
    tw = 0.5 * (1.0 - cutoff.plateau)
    x, wts = np.polynomial.legendre.leggauss(4 * cutoff.order + 8)
    total = 0.0
    for a, b in ((0.0, tw), (tw, 1.0 - tw), (1.0 - tw, 1.0)):
        if b <= a:
            continue
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.sum(wts * profile_derivs(u, cutoff, 0)[0] ** 2))
    return total


def energy_constant(N: int, c_seg: float, cutoff: CutoffSpec = CutoffSpec()) -> float:
    """1/2 mean over the unit (N+1)-cube of phi^2, times c_seg^2."""
    return 0.5 * profile_mean_square(cutoff) ** (N + 1) * c_seg ** 2


def segment_ratios(N: int, samples: int = 64, seed: int = 0, e: float = 1.0,
                   min_deficiency: float = 0.05, chi0: float = 0.1) -> tuple[np.ndarray, bool]:
    """Length ratios L|s| sqrt(e)/(e - |w|^2/2) of uncapped selections, and whether chi0 held throughout."""
    rng = np.random.default_rng(seed)
    pts = sample_interior_points(rng, N, e, samples, min_deficiency)
    params = SelectionParams(c_cal=0.0, chi0=chi0)
    ratios, chi_ok = [], True
    for k, p in enumerate(pts):
        sel = select_segment(p, k, params)
        rep = verify_segment(sel, p, params)
        ratios.append(rep.length_ratio)
        chi_ok &= rep.separated and rep.inside
    return np.asarray(ratios), bool(chi_ok)


def calibrate_segments(N: int, samples: int = 64, seed: int | None = None, chi0: float = 0.1,
                       cutoff: CutoffSpec = CutoffSpec()) -> dict:
    seed = 1000 + N if seed is None else seed
    ratios, chi_ok = segment_ratios(N, samples, seed, chi0=chi0)
    c_seg = SAFETY * float(ratios.min())
    return {"c_seg": c_seg, "c_osc": energy_constant(N, c_seg, cutoff), "min_ratio": float(ratios.min()),
            "median_ratio": float(np.median(ratios)), "samples": samples, "seed": seed, "chi0_ok": chi_ok}


def calibrate_gain(results) -> dict:
    """kappa = SAFETY * min gain/I^2 over accepted steps of the given scheme results."""
    q = []
    for res in results:
        for step in res.trace:
            if step.accepted and step.gain > 0:
                q.append(step.gain / step.I_before ** 2)
    if not q:
        return {"kappa": 0.0, "steps": 0, "min_quotient": math.nan}
    return {"kappa": SAFETY * min(q), "steps": len(q), "min_quotient": min(q)}
