"""Dense rank-4 tensors with reverse-mode automatic differentiation.

Supplies every primitive the white-balance network needs: strided
convolution, transposed convolution, 2x2 max pooling, relu, channel
concatenation, an L1 objective, and a bias-corrected Adam update.

Data is float32 throughout. Gradients are recorded on a dynamic tape
built during the forward pass; ``Tensor4.backward`` walks the tape in
reverse topological order and then releases it, so a tensor graph is
single-use. Tensors that feed a forward pass must not be mutated until
backward has run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables tape recording for cheap inference."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class ShapeError(ValueError):
    """Operand dimensions are incompatible; the message names both shapes."""


class NumericalError(RuntimeError):
    """A computation produced or received non-finite values."""


class Tensor4:
    """A (batch, channels, height, width) float32 array with an optional gradient.

    ``grad`` is lazily allocated by the backward pass and always matches
    ``data`` in shape. ``requires_grad`` marks leaves the tape should
    differentiate with respect to; it propagates through every op.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 4:
            raise ShapeError(
                f"Tensor4 needs 4 dims (batch, channels, height, width), got shape {arr.shape}"
            )
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor4, ...] = ()
        self._grad_fn: Callable[[np.ndarray], None] | None = None

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got dims {self.dims}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float32, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this tensor, seeding with ones, then free the tape."""
        topo: list[Tensor4] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor4, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            fn = node._grad_fn
            if fn is not None:
                fn(node.grad)
            node._grad_fn = None
            node._parents = ()

    def __repr__(self) -> str:
        return f"Tensor4(dims={self.dims}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: Sequence[Tensor4],
            make_grad_fn: Callable[[Tensor4], Callable[[np.ndarray], None]]) -> Tensor4:
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor4(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._grad_fn = make_grad_fn(out)
    return out


# -- im2col / col2im ---------------------------------------------------------
#
# Convolutions are lowered to one sgemm per batch via patch-matrix layout
# (N, C*kH*kW, OH*OW); the kernel loops below are over kH*kW only, the
# per-pixel work is vectorized slicing.

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """Patch matrix in (C*kH*kW, N*OH*OW) layout, one tap copy per kernel cell."""
    n, c = xp.shape[:2]
    cols = np.empty((c, kh, kw, n, oh, ow), dtype=np.float32)
    for ki in range(kh):
        hi = ki + stride * (oh - 1) + 1
        for kj in range(kw):
            wj = kj + stride * (ow - 1) + 1
            np.copyto(cols[:, ki, kj], xp[:, :, ki:hi:stride, kj:wj:stride].transpose(1, 0, 2, 3))
    return cols.reshape(c * kh * kw, n * oh * ow)


def _col2im(cols: np.ndarray, n: int, c: int, kh: int, kw: int, stride: int,
            oh: int, ow: int, hp: int, wp: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add a (C*kH*kW, N*OH*OW) matrix back."""
    cols = cols.reshape(c, kh, kw, n, oh, ow)
    xp = np.zeros((n, c, hp, wp), dtype=np.float32)
    for ki in range(kh):
        hi = ki + stride * (oh - 1) + 1
        for kj in range(kw):
            wj = kj + stride * (ow - 1) + 1
            xp[:, :, ki:hi:stride, kj:wj:stride] += cols[:, ki, kj].transpose(1, 0, 2, 3)
    return xp


def conv2d(x: Tensor4, weight: Tensor4, bias: Tensor4, stride: int = 1, pad: int = 0) -> Tensor4:
    """2-D cross-correlation. weight dims (outC, inC, kH, kW), bias dims (1, outC, 1, 1).

    Output spatial size is floor((H + 2*pad - kH)/stride) + 1, likewise for W.
    Differentiable w.r.t. x, weight and bias.
    """
    if stride < 1 or pad < 0:
        raise ValueError(f"stride must be >= 1 and pad >= 0, got stride={stride}, pad={pad}")
    n, cin, h, w = x.dims
    outc, wcin, kh, kw = weight.dims
    if cin != wcin:
        raise ShapeError(f"conv2d channel mismatch: input dims {x.dims} vs weight dims {weight.dims}")
    if bias.dims != (1, outc, 1, 1):
        raise ShapeError(f"conv2d bias dims {bias.dims} incompatible with weight dims {weight.dims}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d output would be empty: input dims {x.dims}, weight dims {weight.dims}, "
                         f"stride={stride}, pad={pad}")

    if pad > 0:
        xpad = np.zeros((n, cin, h + 2 * pad, w + 2 * pad), dtype=np.float32)
        xpad[:, :, pad:pad + h, pad:pad + w] = x.data
    else:
        xpad = x.data
    # the batch merges into the pixel axis so each conv is one big sgemm
    cols = _im2col(xpad, kh, kw, stride, oh, ow)          # (CK, N*P)
    wmat = weight.data.reshape(outc, cin * kh * kw)
    out = (wmat @ cols).reshape(outc, n, oh, ow).transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out)
    out += bias.data.reshape(1, outc, 1, 1)

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            gm = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(outc, n * oh * ow)
            if weight.requires_grad:
                weight._accumulate((gm @ cols.T).reshape(weight.dims))
            if bias.requires_grad:
                bias._accumulate(gm.sum(axis=1).reshape(bias.dims))
            if x.requires_grad:
                dcols = wmat.T @ gm
                dxp = _col2im(dcols, n, cin, kh, kw, stride, oh, ow,
                              h + 2 * pad, w + 2 * pad)
                if pad > 0:
                    dxp = dxp[:, :, pad:pad + h, pad:pad + w]
                x._accumulate(dxp)
        return grad_fn

    return _result(out, (x, weight, bias), make_grad_fn)


def transposed_conv2d(x: Tensor4, weight: Tensor4, bias: Tensor4, stride: int = 1) -> Tensor4:
    """Transposed convolution (adjoint of conv2d). weight dims (inC, outC, kH, kW).

    Output spatial size is (H - 1)*stride + kH. The input gradient is the
    forward convolution of the upstream gradient with the same weight.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    n, cin, h, w = x.dims
    wcin, outc, kh, kw = weight.dims
    if cin != wcin:
        raise ShapeError(f"transposed_conv2d channel mismatch: input dims {x.dims} "
                         f"vs weight dims {weight.dims}")
    if bias.dims != (1, outc, 1, 1):
        raise ShapeError(f"transposed_conv2d bias dims {bias.dims} incompatible with "
                         f"weight dims {weight.dims}")
    oh = (h - 1) * stride + kh
    ow = (w - 1) * stride + kw

    wmat = weight.data.reshape(cin, outc * kh * kw)
    xflat = np.ascontiguousarray(x.data.transpose(1, 0, 2, 3)).reshape(cin, n * h * w)
    cols = wmat.T @ xflat                                 # (OK, N*HW)
    out = _col2im(cols, n, outc, kh, kw, stride, h, w, oh, ow)
    out += bias.data.reshape(1, outc, 1, 1)

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            gcols = _im2col(g, kh, kw, stride, h, w)     # (OK, N*HW)
            if x.requires_grad:
                dx = (wmat @ gcols).reshape(cin, n, h, w).transpose(1, 0, 2, 3)
                x._accumulate(np.ascontiguousarray(dx))
            if weight.requires_grad:
                weight._accumulate((xflat @ gcols.T).reshape(weight.dims))
            if bias.requires_grad:
                bias._accumulate(g.sum(axis=(0, 2, 3)).reshape(bias.dims))
        return grad_fn

    return _result(out, (x, weight, bias), make_grad_fn)


def maxpool2x2(x: Tensor4) -> tuple[Tensor4, np.ndarray]:
    """2x2 max pooling with stride 2. Returns (pooled, argmax indices).

    H and W must be even. Indices are 0..3 in row-major window order and
    route the entire upstream gradient of each window to one position;
    ties go to the first maximal element in row-major order.
    """
    n, c, h, w = x.dims
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial dims, got {x.dims}")
    oh, ow = h // 2, w // 2
    # windows laid out row-major in the last axis: (0,0),(0,1),(1,0),(1,1)
    win = x.data.reshape(n, c, oh, 2, ow, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            if not x.requires_grad:
                return
            scatter = np.zeros((n, c, oh, ow, 4), dtype=np.float32)
            np.put_along_axis(scatter, idx[..., None], g[..., None], axis=-1)
            dx = scatter.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
            x._accumulate(dx)
        return grad_fn

    return _result(out, (x,), make_grad_fn), idx


def relu(x: Tensor4) -> Tensor4:
    out = np.maximum(x.data, 0.0)

    def make_grad_fn(res: Tensor4):
        mask = x.data > 0

        def grad_fn(g: np.ndarray) -> None:
            if x.requires_grad:
                x._accumulate(g * mask)
        return grad_fn

    return _result(out, (x,), make_grad_fn)


def concat_channels(a: Tensor4, b: Tensor4) -> Tensor4:
    """Concatenate along the channel axis; batch and spatial dims must agree."""
    na, ca, ha, wa = a.dims
    nb, cb, hb, wb = b.dims
    if (na, ha, wa) != (nb, hb, wb):
        raise ShapeError(f"concat_channels dims mismatch: {a.dims} vs {b.dims}")
    out = np.concatenate([a.data, b.data], axis=1)

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g[:, :ca])
            if b.requires_grad:
                b._accumulate(g[:, ca:])
        return grad_fn

    return _result(out, (a, b), make_grad_fn)


def add(a: Tensor4, b: Tensor4) -> Tensor4:
    if a.dims != b.dims:
        raise ShapeError(f"add dims mismatch: {a.dims} vs {b.dims}")
    out = a.data + b.data

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g)
        return grad_fn

    return _result(out, (a, b), make_grad_fn)


def l1_loss(pred: Tensor4, target: Tensor4, reduction: str = "mean") -> Tensor4:
    """Sum (or mean) of absolute differences, as a (1,1,1,1) scalar tensor.

    The gradient w.r.t. pred is sign(pred - target), zero at exact ties.
    """
    if pred.dims != target.dims:
        raise ShapeError(f"l1_loss dims mismatch: pred {pred.dims} vs target {target.dims}")
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    diff = pred.data - target.data
    total = np.abs(diff, dtype=np.float32).sum(dtype=np.float64)
    scale = 1.0 / diff.size if reduction == "mean" else 1.0
    out = np.full((1, 1, 1, 1), total * scale, dtype=np.float32)

    def make_grad_fn(res: Tensor4):
        def grad_fn(g: np.ndarray) -> None:
            k = float(g.reshape(-1)[0]) * scale
            s = np.sign(diff)
            if pred.requires_grad:
                pred._accumulate(k * s)
            if target.requires_grad:
                target._accumulate(-k * s)
        return grad_fn

    return _result(out, (pred, target), make_grad_fn)


# -- parameters & optimizer --------------------------------------------------

@dataclass
class Parameter:
    """A trainable tensor plus its Adam moment buffers."""

    tensor: Tensor4
    name: str
    adam_m: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    adam_v: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    step_count: int = 0

    def __post_init__(self):
        self.tensor.requires_grad = True
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.tensor.data)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.tensor.data)


def adam_step(params: Iterable[Parameter], grads: Sequence[np.ndarray] | None = None,
              lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Apply one bias-corrected Adam update in place.

    Gradients default to each parameter's accumulated ``tensor.grad``
    (missing gradients count as zero). Raises NumericalError naming the
    parameter if its gradient is non-finite.
    """
    params = list(params)
    if grads is not None and len(grads) != len(params):
        raise ShapeError(f"adam_step got {len(grads)} gradients for {len(params)} parameters")
    for i, p in enumerate(params):
        g = grads[i] if grads is not None else p.tensor.grad
        if g is None:
            g = np.zeros_like(p.tensor.data)
        g = np.asarray(g, dtype=np.float32)
        if g.shape != p.tensor.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter "
                             f"{p.name!r} with dims {p.tensor.dims}")
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for parameter {p.name!r}")
        p.step_count += 1
        # in-place moment updates; the step buffer is the only temporary
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * (g * g)
        step = p.adam_v / (1.0 - beta2 ** p.step_count)
        np.sqrt(step, out=step)
        step += eps
        np.divide(p.adam_m, step, out=step)
        step *= lr / (1.0 - beta1 ** p.step_count)
        p.tensor.data -= step


# -- gradient checking -------------------------------------------------------

@dataclass
class GradCheckReport:
    """Autodiff-vs-finite-difference comparison for one or more tensors.

    Per tensor, the error is max|g_ad - g_fd| normalized by the larger of
    the two gradients' max magnitudes, which keeps the measure meaningful
    where individual entries sit at the float32 noise floor.
    """

    max_rel_error: float
    per_tensor: list[float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(f: Callable[[], Tensor4], wrt: Tensor4 | Sequence[Tensor4],
               tolerance: float = 1e-2, step: float = 1e-3,
               readout: Callable[[], float] | None = None) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar f() against central differences.

    ``wrt`` tensors are perturbed in place (and restored); f must read their
    current data on every call. ``readout``, when given, is a higher-precision
    evaluation of the same objective used only for the difference quotient;
    summing the float32 network's loss in float64 keeps the instrument's
    quantization noise below the gradients being measured.
    """
    tensors = [wrt] if isinstance(wrt, Tensor4) else list(wrt)
    for t in tensors:
        t.requires_grad = True
        t.zero_grad()
    loss = f()
    loss.backward()
    ad_grads = [np.array(t.grad if t.grad is not None else np.zeros_like(t.data),
                         copy=True) for t in tensors]
    evaluate = readout if readout is not None else (lambda: f().item())

    errors: list[float] = []
    for t, gad in zip(tensors, ad_grads):
        flat = t.data.reshape(-1)
        gfd = np.zeros(flat.shape, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fplus = evaluate()
            flat[i] = orig - step
            fminus = evaluate()
            flat[i] = orig
            gfd[i] = (fplus - fminus) / (2.0 * step)
        gfd = gfd.reshape(t.data.shape)
        scale = max(float(np.abs(gad).max(initial=0.0)),
                    float(np.abs(gfd).max(initial=0.0)), 1e-12)
        errors.append(float(np.abs(gad - gfd).max(initial=0.0)) / scale)
    return GradCheckReport(max_rel_error=max(errors), per_tensor=errors, tolerance=tolerance)
