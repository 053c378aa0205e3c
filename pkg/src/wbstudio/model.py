"""The white-balance editing network: one shared encoder, one decoder per target.

The encoder is a 4-level (configurable) convolutional pyramid: each level is
two same-padded 3x3 conv+relu layers ("double conv"), with 2x2 max pooling
between levels and channel count doubling per level (24/48/96/192 at the
defaults). Every decoder owns its own coarsest-level double-conv bottleneck,
then mirrors the pyramid upward with stride-2 transposed convs, skip
concatenation, double convs, and a final 1x1 projection to RGB with no
activation.

A "multi" architecture variant builds one full single-decoder network per
target instead of sharing the encoder; it exists for parameter-count and
quality comparisons against the shared design.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    Parameter,
    ShapeError,
    Tensor4,
    concat_channels,
    conv2d,
    maxpool2x2,
    relu,
    transposed_conv2d,
)

ARCH_SHARED = "shared"
ARCH_MULTI = "multi"

DEFAULT_DECODERS = ("awb", "tungsten", "shade")

_MAGIC = b"DWBE"
_TRAIN_MAGIC = b"DWBT"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    """Structural hyperparameters of the network."""

    levels: int = 4
    base_channels: int = 24
    decoder_ids: tuple[str, ...] = DEFAULT_DECODERS
    conv_kernel: int = 3
    architecture: str = ARCH_SHARED

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if not self.decoder_ids:
            raise ValueError("decoder_ids must be non-empty")
        if len(set(self.decoder_ids)) != len(self.decoder_ids):
            raise ValueError(f"decoder_ids must be unique, got {self.decoder_ids}")
        if self.conv_kernel % 2 != 1:
            raise ValueError(f"conv_kernel must be odd for same-padding, got {self.conv_kernel}")
        if self.architecture not in (ARCH_SHARED, ARCH_MULTI):
            raise ValueError(f"architecture must be {ARCH_SHARED!r} or {ARCH_MULTI!r}, "
                             f"got {self.architecture!r}")
        object.__setattr__(self, "decoder_ids", tuple(self.decoder_ids))

    def channels(self, level: int) -> int:
        """Feature channels at 1-based level: base * 2**(level-1)."""
        return self.base_channels * (2 ** (level - 1))

    @property
    def size_multiple(self) -> int:
        """Input spatial dims must be multiples of this (one pooling per level gap)."""
        return 2 ** self.levels


@dataclass
class LatentPyramid:
    """Multi-scale encoder features, finest first, coarsest last."""

    skips: list[Tensor4]


class _ParamBag:
    """Creates named parameters from one shared rng stream, in a fixed order."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: list[Parameter] = []

    def conv(self, name: str, out_c: int, in_c: int, k: int) -> tuple[Parameter, Parameter]:
        fan_in = in_c * k * k
        w = self.rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_c, in_c, k, k)).astype(np.float32)
        return (self._add(f"{name}.weight", w),
                self._add(f"{name}.bias", np.zeros((1, out_c, 1, 1), dtype=np.float32)))

    def tconv(self, name: str, in_c: int, out_c: int, k: int) -> tuple[Parameter, Parameter]:
        fan_in = in_c * k * k
        w = self.rng.normal(0.0, np.sqrt(2.0 / fan_in), (in_c, out_c, k, k)).astype(np.float32)
        return (self._add(f"{name}.weight", w),
                self._add(f"{name}.bias", np.zeros((1, out_c, 1, 1), dtype=np.float32)))

    def _add(self, name: str, data: np.ndarray) -> Parameter:
        p = Parameter(Tensor4(data), name=name)
        self.params.append(p)
        return p


class _DoubleConv:
    """conv(k) + relu, twice, same padding."""

    def __init__(self, bag: _ParamBag, name: str, in_c: int, out_c: int, k: int):
        self.w1, self.b1 = bag.conv(f"{name}.conv1", out_c, in_c, k)
        self.w2, self.b2 = bag.conv(f"{name}.conv2", out_c, out_c, k)
        self.pad = k // 2

    def forward(self, x: Tensor4) -> Tensor4:
        h = relu(conv2d(x, self.w1.tensor, self.b1.tensor, stride=1, pad=self.pad))
        return relu(conv2d(h, self.w2.tensor, self.b2.tensor, stride=1, pad=self.pad))


class _Encoder:
    def __init__(self, bag: _ParamBag, name: str, cfg: NetConfig):
        self.blocks = []
        in_c = 3
        for level in range(1, cfg.levels + 1):
            out_c = cfg.channels(level)
            self.blocks.append(_DoubleConv(bag, f"{name}.level{level}", in_c, out_c, cfg.conv_kernel))
            in_c = out_c

    def forward(self, x: Tensor4) -> LatentPyramid:
        skips = []
        h = x
        for i, block in enumerate(self.blocks):
            if i > 0:
                h, _ = maxpool2x2(h)
            h = block.forward(h)
            skips.append(h)
        return LatentPyramid(skips=skips)


class _Decoder:
    def __init__(self, bag: _ParamBag, name: str, cfg: NetConfig):
        top = cfg.levels
        self.bottleneck = _DoubleConv(bag, f"{name}.bottleneck", cfg.channels(top),
                                      cfg.channels(top), cfg.conv_kernel)
        self.ups = []
        self.blocks = []
        for level in range(top - 1, 0, -1):
            self.ups.append(bag.tconv(f"{name}.up{level}", cfg.channels(level + 1),
                                      cfg.channels(level), 2))
            self.blocks.append(_DoubleConv(bag, f"{name}.level{level}",
                                           2 * cfg.channels(level), cfg.channels(level),
                                           cfg.conv_kernel))
        self.out_w, self.out_b = bag.conv(f"{name}.out", 3, cfg.base_channels, 1)

    def forward(self, latent: LatentPyramid) -> Tensor4:
        h = self.bottleneck.forward(latent.skips[-1])
        for (wt, bt), block, skip in zip(self.ups, self.blocks, reversed(latent.skips[:-1])):
            up = transposed_conv2d(h, wt.tensor, bt.tensor, stride=2)
            h = block.forward(concat_channels(up, skip))
        return conv2d(h, self.out_w.tensor, self.out_b.tensor, stride=1, pad=0)


class WbNet:
    """Shared-encoder multi-decoder network (or a bundle of independents).

    Instances are built via :func:`build_network` or :func:`load_weights`.
    A built network is safe to share for inference; training updates
    parameters in place and needs exclusive access.
    """

    def __init__(self, config: NetConfig, seed: int | None = None,
                 _params: list[Parameter] | None = None):
        self.config = config
        if _params is None:
            bag = _ParamBag(np.random.default_rng(seed))
        else:
            bag = _ParamBag(np.random.default_rng(0))
        if config.architecture == ARCH_SHARED:
            self.encoders = {"shared": _Encoder(bag, "encoder", config)}
            self.decoders = {d: _Decoder(bag, f"decoder.{d}", config) for d in config.decoder_ids}
        else:
            self.encoders = {}
            self.decoders = {}
            for d in config.decoder_ids:
                self.encoders[d] = _Encoder(bag, f"{d}.encoder", config)
                self.decoders[d] = _Decoder(bag, f"{d}.decoder.{d}", config)
        self._params = bag.params
        if _params is not None:
            by_name = {p.name: p for p in _params}
            if set(by_name) != {p.name for p in self._params}:
                raise ShapeError("parameter set does not match network configuration")
            for p in self._params:
                src = by_name[p.name]
                if src.tensor.dims != p.tensor.dims:
                    raise ShapeError(f"parameter {p.name!r} has dims {src.tensor.dims}, "
                                     f"expected {p.tensor.dims}")
                p.tensor.data = src.tensor.data
                p.adam_m = src.adam_m
                p.adam_v = src.adam_v
                p.step_count = src.step_count

    # -- inference ----------------------------------------------------------

    def _check_input(self, image: Tensor4) -> None:
        n, c, h, w = image.dims
        if c != 3:
            raise ShapeError(f"network input needs 3 channels, got dims {image.dims}")
        m = self.config.size_multiple
        if h % m or w % m:
            raise ShapeError(f"network input spatial dims must be multiples of {m}, "
                             f"got dims {image.dims}")

    def encode(self, image: Tensor4, decoder_id: str | None = None) -> LatentPyramid:
        """Run the encoder. For the multi architecture a decoder_id selects which one."""
        self._check_input(image)
        if self.config.architecture == ARCH_SHARED:
            return self.encoders["shared"].forward(image)
        if decoder_id is None:
            raise ValueError("multi architecture has per-decoder encoders; pass decoder_id")
        return self.encoders[self._check_decoder(decoder_id)].forward(image)

    def decode(self, latent: LatentPyramid, decoder_id: str) -> Tensor4:
        return self.decoders[self._check_decoder(decoder_id)].forward(latent)

    def forward(self, image: Tensor4, decoder_id: str) -> Tensor4:
        """Encode + decode for one target setting."""
        return self.decode(self.encode(image, decoder_id), decoder_id)

    def forward_all(self, image: Tensor4) -> dict[str, Tensor4]:
        """One output per configured decoder (single encode for the shared arch)."""
        if self.config.architecture == ARCH_SHARED:
            latent = self.encode(image)
            return {d: self.decode(latent, d) for d in self.config.decoder_ids}
        return {d: self.decode(self.encode(image, d), d) for d in self.config.decoder_ids}

    def _check_decoder(self, decoder_id: str) -> str:
        if decoder_id not in self.decoders:
            raise KeyError(f"unknown decoder {decoder_id!r}; configured: "
                           f"{sorted(self.decoders)}")
        return decoder_id

    # -- parameters ----------------------------------------------------------

    def parameters(self) -> list[Parameter]:
        return self._params

    def encoder_parameters(self) -> list[Parameter]:
        return [p for p in self._params if ".encoder." in f".{p.name}" and ".decoder." not in p.name]

    def decoder_parameters(self, decoder_id: str) -> list[Parameter]:
        self._check_decoder(decoder_id)
        return [p for p in self._params if f".decoder.{decoder_id}." in f".{p.name}"]

    def zero_grad(self) -> None:
        for p in self._params:
            p.tensor.zero_grad()


def build_network(config: NetConfig, seed: int = 0) -> WbNet:
    """He-normal conv weights (fan-in scaled), zero biases, deterministic per seed."""
    return WbNet(config, seed=seed)


def param_count(net: WbNet) -> int:
    return sum(p.tensor.data.size for p in net.parameters())


# -- serialization -----------------------------------------------------------
#
# Weight file layout (little endian):
#   "DWBE" | u16 version | u16 levels | u16 base_channels | u16 conv_kernel |
#   str architecture | u16 n_decoders | str decoder_id... |
#   u32 n_params | per param: str name | 4x u32 dims | f32 data...
# An optional training block follows:
#   "DWBT" | u64 iteration | u64 epoch |
#   per param (same order): u64 step_count | f32 adam_m... | f32 adam_v...
# Strings are u16 length + utf8 bytes.

def _w_str(buf: io.BufferedIOBase, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _r_str(buf: io.BufferedIOBase) -> str:
    (n,) = struct.unpack("<H", buf.read(2))
    return buf.read(n).decode("utf-8")


def save_weights(net: WbNet, path: str, train_state: dict | None = None) -> None:
    """Write the weight file; optionally append optimizer/trainer state."""
    cfg = net.config
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<HHHH", _FORMAT_VERSION, cfg.levels, cfg.base_channels,
                            cfg.conv_kernel))
        _w_str(f, cfg.architecture)
        f.write(struct.pack("<H", len(cfg.decoder_ids)))
        for d in cfg.decoder_ids:
            _w_str(f, d)
        params = net.parameters()
        f.write(struct.pack("<I", len(params)))
        for p in params:
            _w_str(f, p.name)
            f.write(struct.pack("<4I", *p.tensor.dims))
            f.write(np.ascontiguousarray(p.tensor.data, dtype="<f4").tobytes())
        if train_state is not None:
            f.write(_TRAIN_MAGIC)
            f.write(struct.pack("<QQ", int(train_state["iteration"]), int(train_state["epoch"])))
            for p in params:
                f.write(struct.pack("<Q", p.step_count))
                f.write(np.ascontiguousarray(p.adam_m, dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(p.adam_v, dtype="<f4").tobytes())


class WeightFileError(IOError):
    """The weight file is malformed, truncated, or from an unknown format version."""


def load_weights(path: str, with_train_state: bool = False):
    """Read a weight file back into a WbNet.

    Returns the net, or (net, train_state|None) when with_train_state is set.
    """
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)
    try:
        if buf.read(4) != _MAGIC:
            raise WeightFileError(f"{path}: not a weight file (bad magic)")
        version, levels, base_channels, conv_kernel = struct.unpack("<HHHH", buf.read(8))
        if version != _FORMAT_VERSION:
            raise WeightFileError(f"{path}: unsupported format version {version}")
        architecture = _r_str(buf)
        (n_dec,) = struct.unpack("<H", buf.read(2))
        decoder_ids = tuple(_r_str(buf) for _ in range(n_dec))
        config = NetConfig(levels=levels, base_channels=base_channels, decoder_ids=decoder_ids,
                           conv_kernel=conv_kernel, architecture=architecture)
        (n_params,) = struct.unpack("<I", buf.read(4))
        params: list[Parameter] = []
        for _ in range(n_params):
            name = _r_str(buf)
            dims = struct.unpack("<4I", buf.read(16))
            count = int(np.prod(dims))
            raw = buf.read(4 * count)
            if len(raw) != 4 * count:
                raise WeightFileError(f"{path}: truncated data for parameter {name!r}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
            params.append(Parameter(Tensor4(arr), name=name))

        train_state = None
        tag = buf.read(4)
        if tag == _TRAIN_MAGIC:
            iteration, epoch = struct.unpack("<QQ", buf.read(16))
            for p in params:
                (p.step_count,) = struct.unpack("<Q", buf.read(8))
                size = p.tensor.data.size
                raw_m = buf.read(4 * size)
                raw_v = buf.read(4 * size)
                if len(raw_m) != 4 * size or len(raw_v) != 4 * size:
                    raise WeightFileError(f"{path}: truncated optimizer state for {p.name!r}")
                p.adam_m = np.frombuffer(raw_m, dtype="<f4").reshape(p.tensor.dims).copy()
                p.adam_v = np.frombuffer(raw_v, dtype="<f4").reshape(p.tensor.dims).copy()
            train_state = {"iteration": iteration, "epoch": epoch}
        elif tag:
            raise WeightFileError(f"{path}: unexpected trailing section {tag!r}")
    except (struct.error, ValueError) as err:
        raise WeightFileError(f"{path}: malformed weight file ({err})") from err

    try:
        net = WbNet(config, _params=params)
    except ShapeError as err:
        raise WeightFileError(f"{path}: {err}") from err
    if with_train_state:
        return net, train_state
    return net
