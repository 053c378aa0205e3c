"""Fast single-image inference path.

The autodiff forward is the reference implementation; this module computes
the same network function for one image in channels-last layout, where a
3x3 same-padded convolution becomes nine accumulating BLAS calls on
contiguous row-span views of the padded activation (no im2col buffers).
Each convolution writes straight into the next layer's padded buffer.

``run_decoders`` is checked against the reference forward in the tests; it
exists purely because interactive editing wants the full-size preview in
well under a second of CPU time per decoder.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.blas import sgemm

from .model import WbNet, _DoubleConv


def _padded(h: int, w: int, c: int) -> np.ndarray:
    return np.zeros((h + 2, w + 2, c), dtype=np.float32)


def _conv3x3_into_padded(xp: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                         relu: bool = True) -> np.ndarray:
    """Same-padded 3x3 conv of a padded (H+2, W+2, C) input.

    Returns the next padded buffer (H+2, W+2, outC) with a clean zero ring.
    Each kernel tap is one sgemm with beta=1 accumulating into the output;
    the operands are contiguous row spans of the input, so nothing is
    gathered or copied.
    """
    hp, wp, cin = xp.shape
    h, w = hp - 2, wp - 2
    outc = weight.shape[0]
    # weight comes in as (outC, inC, 3, 3); tap matrices are (inC, outC)
    wt = np.ascontiguousarray(weight.transpose(2, 3, 1, 0))

    out = _padded(h, w, outc)
    xflat = xp.reshape(hp * wp, cin)
    oflat = out.reshape(hp * wp, outc)
    span = (h - 1) * wp + w
    dst = oflat[wp + 1: wp + 1 + span]
    dst_t = dst.T  # F-contiguous view for in-place BLAS accumulation
    for ki in range(3):
        for kj in range(3):
            src = xflat[ki * wp + kj: ki * wp + kj + span]
            # column-major view of dst += src @ wt: dst.T = wt.T @ src.T,
            # all three operands F-contiguous, accumulated in place
            sgemm(1.0, wt[ki, kj].T, src.T, beta=1.0, c=dst_t, overwrite_c=True)
    dst += bias.reshape(1, outc)
    if relu:
        np.maximum(dst, 0.0, out=dst)
    # junk accumulated in the wrap-around columns; restore the zero ring
    out[0] = 0.0
    out[-1] = 0.0
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def _conv1x1(xp: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """1x1 conv on the valid region of a padded buffer; returns unpadded."""
    hp, wp, cin = xp.shape
    outc = weight.shape[0]
    flat = xp[1:-1, 1:-1].reshape(-1, cin)
    out = flat @ np.ascontiguousarray(weight.reshape(outc, cin).T)
    out += bias.reshape(1, outc)
    return out.reshape(hp - 2, wp - 2, outc)


def _maxpool_into_padded(xp: np.ndarray) -> np.ndarray:
    hp, wp, c = xp.shape
    h, w = hp - 2, wp - 2
    x = xp[1:-1, 1:-1]
    pooled = x.reshape(h // 2, 2, w // 2, 2, c)
    out = _padded(h // 2, w // 2, c)
    np.maximum(pooled[:, 0, :, 0], pooled[:, 0, :, 1], out=out[1:-1, 1:-1])
    np.maximum(out[1:-1, 1:-1], pooled[:, 1, :, 0], out=out[1:-1, 1:-1])
    np.maximum(out[1:-1, 1:-1], pooled[:, 1, :, 1], out=out[1:-1, 1:-1])
    return out


def _upconv2x2_cat_padded(xp: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                          skip: np.ndarray) -> np.ndarray:
    """Stride-2 2x2 transposed conv + channel concat with the skip buffer.

    Input and skip are padded buffers; the result is the padded buffer of
    the doubled resolution with [upsampled | skip] channels.
    """
    hp, wp, cin = xp.shape
    h, w = hp - 2, wp - 2
    outc = weight.shape[1]  # (inC, outC, 2, 2)
    skc = skip.shape[2]
    out = _padded(2 * h, 2 * w, outc + skc)
    x = xp[1:-1, 1:-1].reshape(-1, cin)
    for ki in range(2):
        for kj in range(2):
            tap = x @ np.ascontiguousarray(weight[:, :, ki, kj])
            out[1 + ki:1 + 2 * h:2, 1 + kj:1 + 2 * w:2, :outc] = \
                tap.reshape(h, w, outc)
    out[1:-1, 1:-1, :outc] += bias.reshape(1, 1, outc)
    out[1:-1, 1:-1, outc:] = skip[1:-1, 1:-1]
    return out


def _double_conv(block: _DoubleConv, xp: np.ndarray) -> np.ndarray:
    h1 = _conv3x3_into_padded(xp, block.w1.tensor.data, block.b1.tensor.data)
    return _conv3x3_into_padded(h1, block.w2.tensor.data, block.b2.tensor.data)


def run_decoders(net: WbNet, image_hwc: np.ndarray,
                 decoder_ids: list[str]) -> dict[str, np.ndarray]:
    """Decoder outputs (H, W, 3), unclamped, equal to the reference forward.

    Image dims must satisfy the network's size multiple. The shared
    encoder runs once; multi-architecture nets run their per-decoder
    encoders.
    """
    h, w = image_hwc.shape[:2]
    m = net.config.size_multiple
    if h % m or w % m:
        raise ValueError(f"input dims {h}x{w} must be multiples of {m}")

    def encode(encoder):
        xp = _padded(h, w, 3)
        xp[1:-1, 1:-1] = image_hwc
        skips = []
        cur = xp
        for i, block in enumerate(encoder.blocks):
            if i > 0:
                cur = _maxpool_into_padded(cur)
            cur = _double_conv(block, cur)
            skips.append(cur)
        return skips

    shared = net.config.architecture == "shared"
    skips_shared = encode(net.encoders["shared"]) if shared else None

    outs: dict[str, np.ndarray] = {}
    for d in decoder_ids:
        skips = skips_shared if shared else encode(net.encoders[d])
        dec = net.decoders[net._check_decoder(d)]
        cur = _double_conv(dec.bottleneck, skips[-1])
        for (wt, bt), block, skip in zip(dec.ups, dec.blocks, reversed(skips[:-1])):
            cur = _upconv2x2_cat_padded(cur, wt.tensor.data, bt.tensor.data, skip)
            cur = _double_conv(block, cur)
        outs[d] = _conv1x1(cur, dec.out_w.tensor.data, dec.out_b.tensor.data)
    return outs
