"""The fast channels-last inference path must match the reference forward."""

import numpy as np
import pytest

from wbstudio.infer import run_decoders
from wbstudio.model import ARCH_MULTI, NetConfig, build_network
from wbstudio.tensor import Tensor4, no_grad


def reference(net, img):
    x = Tensor4(img.transpose(2, 0, 1)[None])
    with no_grad():
        outs = net.forward_all(x)
    return {d: out.data[0].transpose(1, 2, 0) for d, out in outs.items()}


@pytest.mark.parametrize("levels,base,h,w", [
    (2, 4, 16, 16),
    (2, 4, 32, 48),
    (4, 8, 64, 96),
    (3, 6, 40, 24),
])
def test_matches_reference_forward(levels, base, h, w):
    net = build_network(NetConfig(levels=levels, base_channels=base), seed=11)
    rng = np.random.default_rng(0)
    img = rng.random((h, w, 3), dtype=np.float32)
    fast = run_decoders(net, img, list(net.config.decoder_ids))
    ref = reference(net, img)
    for d in ref:
        scale = max(1.0, float(np.abs(ref[d]).max()))
        assert np.abs(fast[d] - ref[d]).max() <= 1e-5 * scale, d


def test_multi_architecture_matches():
    net = build_network(NetConfig(levels=2, base_channels=4, architecture=ARCH_MULTI), seed=3)
    rng = np.random.default_rng(1)
    img = rng.random((16, 32, 3), dtype=np.float32)
    fast = run_decoders(net, img, ["awb", "shade"])
    ref = reference(net, img)
    for d in fast:
        assert np.abs(fast[d] - ref[d]).max() <= 1e-5


def test_subset_of_decoders():
    net = build_network(NetConfig(levels=2, base_channels=4), seed=5)
    rng = np.random.default_rng(2)
    img = rng.random((16, 16, 3), dtype=np.float32)
    fast = run_decoders(net, img, ["tungsten"])
    assert set(fast) == {"tungsten"}


def test_rejects_bad_dims():
    net = build_network(NetConfig(levels=4, base_channels=4), seed=6)
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError, match="16"):
        run_decoders(net, rng.random((20, 32, 3), dtype=np.float32), ["awb"])
