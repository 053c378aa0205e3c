"""Image error metrics: MSE (8-bit scale), mean angular error, CIEDE2000.

All metrics take (H, W, 3) float images with values in [0, 1] and equal
dims. Aggregation reports mean and quartiles (linear interpolation on the
sorted sample).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error on the 0-255 scale."""
    _check_dims(a, b)
    d = (a.astype(np.float64) - b.astype(np.float64)) * 255.0
    return float(np.mean(d * d))


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-pixel angle between RGB vectors, in degrees.

    Pixels where either vector's norm is <= 1e-6 contribute zero and are
    left out of the average.
    """
    _check_dims(a, b)
    av = a.reshape(-1, 3).astype(np.float64)
    bv = b.reshape(-1, 3).astype(np.float64)
    na = np.linalg.norm(av, axis=1)
    nb = np.linalg.norm(bv, axis=1)
    ok = (na > 1e-6) & (nb > 1e-6)
    if not ok.any():
        return 0.0
    cos = (av[ok] * bv[ok]).sum(axis=1) / (na[ok] * nb[ok])
    ang = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return float(ang.sum() / ok.sum())


# -- sRGB -> CIELAB (D65, 2 degree observer) ----------------------------------

_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = np.array([0.95047, 1.0, 1.08883])


def srgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Piecewise sRGB transfer -> XYZ (D65) -> CIELAB. Shape preserved."""
    c = np.asarray(img, dtype=np.float64)
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(t > eps, np.cbrt(t), t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def ciede2000_lab(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """CIEDE2000 with kL = kC = kH = 1, elementwise over (..., 3) Lab arrays."""
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    L2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    C1 = np.hypot(a1, b1)
    C2 = np.hypot(a2, b2)
    Cbar = 0.5 * (C1 + C2)
    c7 = Cbar ** 7
    G = 0.5 * (1.0 - np.sqrt(c7 / (c7 + 25.0 ** 7)))
    a1p = (1.0 + G) * a1
    a2p = (1.0 + G) * a2
    C1p = np.hypot(a1p, b1)
    C2p = np.hypot(a2p, b2)
    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0

    dLp = L2 - L1
    dCp = C2p - C1p
    zero_chroma = (C1p * C2p) == 0.0
    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(zero_chroma, 0.0, dh)
    dHp = 2.0 * np.sqrt(C1p * C2p) * np.sin(np.radians(dh) / 2.0)

    Lbp = 0.5 * (L1 + L2)
    Cbp = 0.5 * (C1p + C2p)
    hsum = h1p + h2p
    habs = np.abs(h1p - h2p)
    hbp = np.where(habs <= 180.0, 0.5 * hsum,
                   np.where(hsum < 360.0, 0.5 * (hsum + 360.0), 0.5 * (hsum - 360.0)))
    hbp = np.where(zero_chroma, hsum, hbp)

    rad = np.radians
    T = (1.0 - 0.17 * np.cos(rad(hbp - 30.0)) + 0.24 * np.cos(rad(2.0 * hbp))
         + 0.32 * np.cos(rad(3.0 * hbp + 6.0)) - 0.20 * np.cos(rad(4.0 * hbp - 63.0)))
    dtheta = 30.0 * np.exp(-(((hbp - 275.0) / 25.0) ** 2))
    cb7 = Cbp ** 7
    RC = 2.0 * np.sqrt(cb7 / (cb7 + 25.0 ** 7))
    SL = 1.0 + 0.015 * (Lbp - 50.0) ** 2 / np.sqrt(20.0 + (Lbp - 50.0) ** 2)
    SC = 1.0 + 0.045 * Cbp
    SH = 1.0 + 0.015 * Cbp * T
    RT = -np.sin(rad(2.0 * dtheta)) * RC

    return np.sqrt((dLp / SL) ** 2 + (dCp / SC) ** 2 + (dHp / SH) ** 2
                   + RT * (dCp / SC) * (dHp / SH))


def delta_e_2000(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-pixel CIEDE2000 between two sRGB images in [0, 1]."""
    _check_dims(a, b)
    return float(ciede2000_lab(srgb_to_lab(a), srgb_to_lab(b)).mean())


# -- aggregation ----------------------------------------------------------------

def aggregate(values) -> dict[str, float]:
    """Mean plus Q1/Q2/Q3 by linear interpolation on the sorted sample."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("aggregate needs a non-empty sequence")
    q1, q2, q3 = np.percentile(vals, [25.0, 50.0, 75.0], method="linear")
    return {"mean": float(vals.mean()), "q1": float(q1), "q2": float(q2), "q3": float(q3)}


_METRIC_NAMES = ("mse", "mae", "deltaE2000")


@dataclass
class MetricReport:
    """Per-image metric rows and their mean/Q1/Q2/Q3 aggregates."""

    per_image: list[tuple[str, float, float, float]]  # (image id, mse, mae deg, dE2000)
    aggregate: dict[str, dict[str, float]]

    @classmethod
    def from_rows(cls, rows: list[tuple[str, float, float, float]]) -> "MetricReport":
        agg = {name: aggregate([row[1 + i] for row in rows])
               for i, name in enumerate(_METRIC_NAMES)}
        return cls(per_image=list(rows), aggregate=agg)

    def to_json(self) -> str:
        return json.dumps({
            "per_image": [{"id": r[0], "mse": r[1], "mae": r[2], "deltaE2000": r[3]}
                          for r in self.per_image],
            "aggregate": self.aggregate,
        }, indent=2)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id", "mse", "mae_degrees", "deltaE2000"])
            for r in self.per_image:
                w.writerow([r[0], f"{r[1]:.6f}", f"{r[2]:.6f}", f"{r[3]:.6f}"])
            w.writerow([])
            w.writerow(["metric", "mean", "q1", "q2", "q3"])
            for name in _METRIC_NAMES:
                a = self.aggregate[name]
                w.writerow([name] + [f"{a[k]:.6f}" for k in ("mean", "q1", "q2", "q3")])


def score_pair(image_id: str, result: np.ndarray, truth: np.ndarray) -> tuple[str, float, float, float]:
    return (image_id, mse(result, truth), mae(result, truth), delta_e_2000(result, truth))
