"""Deterministic synthetic camera-ISP data: scenes, renders, patches.

Each scene is a procedural linear-light image (smooth gradients, colored
shapes, faint noise) lit by a Planckian illuminant. Rendering emulates a
small ISP: white-balance division, a mild per-channel polynomial tone
perturbation, a power curve, and a clamp to [0, 1]. One scene yields an
input image rendered with a deliberately wrong white-balance setting plus
ground-truth renders for the corrected, tungsten (2850K) and shade (7500K)
settings.

White-balance gains here are compensation multipliers: the green-normalized
reciprocal of the illuminant's RGB response, so the red/blue ratio of the
gains rises with color temperature and a tungsten render comes out warmer
than a shade render of the same scene.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .imgio import load_image, save_image

TUNGSTEN_K = 2850.0
SHADE_K = 7500.0

TARGET_KEYS = ("awb", "tungsten", "shade")


# -- color temperature -> gains ----------------------------------------------

def _planckian_xy(kelvin: float) -> tuple[float, float]:
    """CIE 1960 (u, v) of a blackbody via Krystek's rational fit, mapped to xy."""
    t = float(kelvin)
    u = (0.860117757 + 1.54118254e-4 * t + 1.28641212e-7 * t * t) / \
        (1.0 + 8.42420235e-4 * t + 7.08145163e-7 * t * t)
    v = (0.317398726 + 4.22806245e-5 * t + 4.20481691e-8 * t * t) / \
        (1.0 - 2.89741816e-5 * t + 1.61456053e-7 * t * t)
    denom = 2.0 * u - 8.0 * v + 4.0
    return 3.0 * u / denom, 2.0 * v / denom


_XYZ_TO_LINEAR_SRGB = np.array([
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
])


def illuminant_rgb(kelvin: float) -> np.ndarray:
    """Green-normalized linear-sRGB response of a Planckian illuminant."""
    x, y = _planckian_xy(kelvin)
    xyz = np.array([x / y, 1.0, (1.0 - x - y) / y])
    rgb = _XYZ_TO_LINEAR_SRGB @ xyz
    rgb = np.maximum(rgb, 1e-4)
    return (rgb / rgb[1]).astype(np.float64)


def wb_gains(kelvin: float) -> np.ndarray:
    """Compensation gains for an illuminant temperature (green-normalized)."""
    inv = 1.0 / illuminant_rgb(kelvin)
    return (inv / inv[1]).astype(np.float64)


@dataclass(frozen=True)
class WbPreset:
    name: str
    temperature: float
    gains: np.ndarray

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


def presets() -> dict[str, WbPreset]:
    return {
        "tungsten": WbPreset("tungsten", TUNGSTEN_K, wb_gains(TUNGSTEN_K)),
        "shade": WbPreset("shade", SHADE_K, wb_gains(SHADE_K)),
    }


# -- scenes and rendering ------------------------------------------------------

@dataclass
class RenderParams:
    gamma: float = 1.0
    # per-channel coefficient a of v -> v + a*v*(1-v); zero is the identity
    curve_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class SceneSample:
    linear_scene: np.ndarray           # (H, W, 3) linear light, >= 0
    illum_gains: np.ndarray            # 3-vector, > 0, green == 1
    render_params: RenderParams
    illum_kelvin: float = 0.0

    def __post_init__(self):
        if np.any(self.linear_scene < 0):
            raise ValueError("linear_scene must be non-negative")
        if np.any(self.illum_gains <= 0) or not np.isclose(self.illum_gains[1], 1.0):
            raise ValueError(f"illum_gains must be positive and green-normalized, "
                             f"got {self.illum_gains}")


@dataclass
class TrainExample:
    input: np.ndarray                  # (H, W, 3) in [0, 1]
    targets: dict[str, np.ndarray]     # keys: awb, tungsten, shade
    meta: dict


def render_with_wb(scene: SceneSample, gains: np.ndarray) -> np.ndarray:
    """Render the scene as an ISP would with the given white-balance gains.

    The white-balance step divides by the setting's error relative to the
    scene illuminant, so gains equal to ``scene.illum_gains`` correct
    perfectly and reproduce the scene (up to tone curve and clamp).
    """
    gains = np.asarray(gains, dtype=np.float64)
    if np.any(gains <= 0):
        raise ValueError(f"wb gains must be positive, got {gains}")
    out = scene.linear_scene.astype(np.float64) / (gains / scene.illum_gains)
    a = scene.render_params.curve_coeffs
    out = out + a * out * (1.0 - out)
    out = np.maximum(out, 0.0)
    gamma = scene.render_params.gamma
    if gamma != 1.0:
        out = out ** (1.0 / gamma)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _smooth_field(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Low-frequency color gradient: a coarse random grid, bilinearly upsampled."""
    coarse = rng.uniform(0.15, 0.85, (4, 4, 3))
    ys = np.linspace(0, 3, h)
    xs = np.linspace(0, 3, w)
    y0 = np.clip(ys.astype(int), 0, 2)
    x0 = np.clip(xs.astype(int), 0, 2)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    tl = coarse[y0][:, x0]
    tr = coarse[y0][:, x0 + 1]
    bl = coarse[y0 + 1][:, x0]
    br = coarse[y0 + 1][:, x0 + 1]
    return (tl * (1 - fy) * (1 - fx) + tr * (1 - fy) * fx
            + bl * fy * (1 - fx) + br * fy * fx)


def make_scene(rng: np.random.Generator, h: int, w: int) -> SceneSample:
    """Procedural linear-light scene with a random Planckian illuminant."""
    img = _smooth_field(rng, h, w)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(int(rng.integers(4, 9))):
        color = rng.uniform(0.05, 0.95, 3)
        if rng.random() < 0.5:
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            r = rng.uniform(0.05, 0.25) * min(h, w)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        else:
            y0, x0 = rng.uniform(0, h * 0.8), rng.uniform(0, w * 0.8)
            y1 = y0 + rng.uniform(0.1, 0.5) * h
            x1 = x0 + rng.uniform(0.1, 0.5) * w
            mask = (yy >= y0) & (yy < y1) & (xx >= x0) & (xx < x1)
        img[mask] = color
    img = img + rng.normal(0.0, 0.01, img.shape)
    img = np.maximum(img, 0.0)

    illum_kelvin = float(rng.uniform(3000.0, 8000.0))
    params = RenderParams(gamma=float(rng.uniform(1.8, 2.4)),
                          curve_coeffs=rng.uniform(-0.12, 0.12, 3))
    return SceneSample(linear_scene=img, illum_gains=wb_gains(illum_kelvin),
                       render_params=params, illum_kelvin=illum_kelvin)


def make_dataset(seed: int, n_scenes: int, image_size: int) -> list[TrainExample]:
    """Render n_scenes quadruples of (wrong-WB input, awb/tungsten/shade targets)."""
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    if image_size % 16:
        raise ValueError(f"image_size must be a multiple of 16, got {image_size}")
    wb = presets()
    examples = []
    for i in range(n_scenes):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        scene = make_scene(rng, image_size, image_size)
        input_kelvin = float(rng.uniform(2500.0, 8500.0))
        example = TrainExample(
            input=render_with_wb(scene, wb_gains(input_kelvin)),
            targets={
                "awb": render_with_wb(scene, scene.illum_gains),
                "tungsten": render_with_wb(scene, wb["tungsten"].gains),
                "shade": render_with_wb(scene, wb["shade"].gains),
            },
            meta={"scene_id": f"{i:04d}", "illum_kelvin": scene.illum_kelvin,
                  "input_kelvin": input_kelvin},
        )
        examples.append(example)
    return examples


# -- patches and augmentation --------------------------------------------------

def sample_patches(example: TrainExample, patch: int = 128, count: int = 4,
                   rng: np.random.Generator | None = None) -> list[TrainExample]:
    """Crop aligned patch quadruples: the same window from input and targets."""
    rng = rng or np.random.default_rng()
    h, w = example.input.shape[:2]
    if patch > h or patch > w:
        raise ValueError(f"patch {patch} larger than image {h}x{w}")
    out = []
    for _ in range(count):
        r = int(rng.integers(0, h - patch + 1))
        c = int(rng.integers(0, w - patch + 1))
        out.append(TrainExample(
            input=example.input[r:r + patch, c:c + patch].copy(),
            targets={k: v[r:r + patch, c:c + patch].copy()
                     for k, v in example.targets.items()},
            meta=dict(example.meta, crop=(r, c)),
        ))
    return out


def dihedral(img: np.ndarray, transform: int) -> np.ndarray:
    """Apply one of the 8 square symmetries (4 rotations x optional flip)."""
    if not 0 <= transform < 8:
        raise ValueError(f"transform must be 0..7, got {transform}")
    rot = transform % 4
    if rot % 2 and img.shape[0] != img.shape[1]:
        raise ValueError(f"90/270 degree rotation needs a square patch, "
                         f"got {img.shape[0]}x{img.shape[1]}")
    out = np.rot90(img, rot, axes=(0, 1))
    if transform >= 4:
        out = np.flip(out, axis=1)
    return np.ascontiguousarray(out)


def augment(example: TrainExample, rng: np.random.Generator,
            transform: int | None = None) -> TrainExample:
    """Geometric augmentation: one dihedral transform applied to all four images."""
    t = int(rng.integers(0, 8)) if transform is None else transform
    return TrainExample(
        input=dihedral(example.input, t),
        targets={k: dihedral(v, t) for k, v in example.targets.items()},
        meta=dict(example.meta, transform=t),
    )


# -- on-disk layout -------------------------------------------------------------

def save_dataset(examples: list[TrainExample], out_dir: str, seed: int,
                 image_size: int) -> None:
    """Write scenes/NNNN_{input|awb|tungsten|shade}.png plus manifest.json."""
    scenes_dir = os.path.join(out_dir, "scenes")
    os.makedirs(scenes_dir, exist_ok=True)
    manifest = {"seed": seed, "n_scenes": len(examples), "image_size": image_size,
                "scenes": []}
    for ex in examples:
        sid = ex.meta["scene_id"]
        save_image(ex.input, os.path.join(scenes_dir, f"{sid}_input.png"))
        for key in TARGET_KEYS:
            save_image(ex.targets[key], os.path.join(scenes_dir, f"{sid}_{key}.png"))
        manifest["scenes"].append({
            "id": sid,
            "illum_kelvin": ex.meta["illum_kelvin"],
            "input_kelvin": ex.meta["input_kelvin"],
        })
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)


def load_dataset(in_dir: str) -> list[TrainExample]:
    with open(os.path.join(in_dir, "manifest.json")) as f:
        manifest = json.load(f)
    examples = []
    for entry in manifest["scenes"]:
        sid = entry["id"]
        path = lambda name: os.path.join(in_dir, "scenes", f"{sid}_{name}.png")
        examples.append(TrainExample(
            input=load_image(path("input")),
            targets={k: load_image(path(k)) for k in TARGET_KEYS},
            meta={"scene_id": sid, "illum_kelvin": entry["illum_kelvin"],
                  "input_kelvin": entry["input_kelvin"]},
        ))
    return examples
