"""Global polynomial color mapping.

A fixed kernel lifts each RGB triplet into an 11-dimensional monomial
basis; a 3x11 matrix fitted in closed form on a low-resolution image pair
then re-colors the full-resolution image with one matrix multiply per
pixel. The basis order is fixed so serialized matrices stay stable:

    [R, G, B, RG, RB, GB, R^2, G^2, B^2, RGB, 1]
"""

from __future__ import annotations

import struct

import numpy as np

POLY_DIM = 11


def poly_kernel(rgb: np.ndarray) -> np.ndarray:
    """Lift (..., 3) RGB values to the (..., 11) monomial basis."""
    rgb = np.asarray(rgb, dtype=np.float32)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    out = np.empty(rgb.shape[:-1] + (POLY_DIM,), dtype=np.float32)
    out[..., 0] = r
    out[..., 1] = g
    out[..., 2] = b
    out[..., 3] = r * g
    out[..., 4] = r * b
    out[..., 5] = g * b
    out[..., 6] = r * r
    out[..., 7] = g * g
    out[..., 8] = b * b
    out[..., 9] = r * g * b
    out[..., 10] = 1.0
    return out


def _features_into(rgb: np.ndarray, out: np.ndarray) -> None:
    """Fill a preallocated (n, 11) buffer with the monomial basis."""
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    out[:, 0] = r
    out[:, 1] = g
    out[:, 2] = b
    np.multiply(r, g, out=out[:, 3])
    np.multiply(r, b, out=out[:, 4])
    np.multiply(g, b, out=out[:, 5])
    np.multiply(r, r, out=out[:, 6])
    np.multiply(g, g, out=out[:, 7])
    np.multiply(b, b, out=out[:, 8])
    np.multiply(out[:, 3], b, out=out[:, 9])
    out[:, 10] = 1.0


def fit_mapping(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Least-squares 3x11 matrix M minimizing ||M psi(source_px) - target_px||.

    Solved via orthogonal decomposition (SVD-backed lstsq), which returns
    the minimum-norm solution when the basis is rank deficient (e.g. a
    constant image).
    """
    source = np.asarray(source)
    target = np.asarray(target)
    if source.shape != target.shape:
        raise ValueError(f"image dims differ: {source.shape} vs {target.shape}")
    flat = source.reshape(-1, 3).astype(np.float64)
    phi = np.empty((flat.shape[0], POLY_DIM), dtype=np.float64)
    _features_into(flat, phi)
    y = target.reshape(-1, 3).astype(np.float64)
    m, *_ = np.linalg.lstsq(phi, y, rcond=None)
    return m.T.astype(np.float32)  # (3, 11)


def fit_mapping_normal_equations(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Reference solve via explicit normal equations (pseudo-inverse)."""
    phi = poly_kernel(np.asarray(source).reshape(-1, 3)).astype(np.float64)
    y = np.asarray(target).reshape(-1, 3).astype(np.float64)
    m = np.linalg.pinv(phi.T @ phi) @ phi.T @ y
    return m.T.astype(np.float32)


def apply_mapping(mapping: np.ndarray, image: np.ndarray,
                  clamp: bool = True) -> np.ndarray:
    """Per-pixel M psi(px) over a (H, W, 3) image, clamped to [0, 1] by default."""
    mapping = np.asarray(mapping, dtype=np.float32)
    if mapping.shape != (3, POLY_DIM):
        raise ValueError(f"mapping must be 3x{POLY_DIM}, got {mapping.shape}")
    if not np.isfinite(mapping).all():
        raise ValueError("mapping contains non-finite entries")
    image = np.asarray(image, dtype=np.float32)
    h, w = image.shape[:2]
    flat = image.reshape(-1, 3)
    out = np.empty_like(flat)
    mt = np.ascontiguousarray(mapping.T)
    # chunked so the 11-wide feature buffer stays cache-resident
    chunk = 1 << 16
    feats = np.empty((chunk, POLY_DIM), dtype=np.float32)
    for start in range(0, flat.shape[0], chunk):
        px = flat[start:start + chunk]
        fbuf = feats[:px.shape[0]]
        _features_into(px, fbuf)
        np.matmul(fbuf, mt, out=out[start:start + chunk])
        if clamp:
            np.clip(out[start:start + chunk], 0.0, 1.0, out=out[start:start + chunk])
    return out.reshape(h, w, 3)


def residual(mapping: np.ndarray, source: np.ndarray, target: np.ndarray) -> float:
    """Root-mean-square fit error of M over the pair, pre-clamp."""
    pred = apply_mapping(mapping, source, clamp=False)
    d = pred.astype(np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.sqrt(np.mean(d * d)))


IDENTITY_MAPPING = np.concatenate(
    [np.eye(3, dtype=np.float32), np.zeros((3, POLY_DIM - 3), dtype=np.float32)], axis=1)


def mapping_to_bytes(mapping: np.ndarray) -> bytes:
    """33 little-endian float32 values, row-major."""
    arr = np.ascontiguousarray(np.asarray(mapping, dtype="<f4").reshape(3, POLY_DIM))
    return arr.tobytes()


def mapping_from_bytes(data: bytes) -> np.ndarray:
    if len(data) != 4 * 3 * POLY_DIM:
        raise ValueError(f"expected {4 * 3 * POLY_DIM} bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f4").reshape(3, POLY_DIM).copy()
