"""Minimal reverse-mode autodiff over numpy arrays.

Provides exactly the tensor operations the segmentation network and its
training losses need: 2-D convolution, 2x max pooling, nearest-neighbor
upsampling, channel concatenation, elementwise arithmetic, relu/sigmoid/log,
clamping, spatial slicing and reductions.  Everything is 64-bit float and
fully deterministic.

A ``Tensor`` wraps a contiguous float64 array plus an optional gradient
buffer.  Operations on tensors that require gradients record a ``Node``
(operation kind, inputs, backward closure); ``backward`` on a scalar root
replays the recorded nodes in reverse execution order and accumulates
gradients into every reachable tensor marked as requiring them.

One computation graph belongs to one thread; independent graphs may run
concurrently.  Call ``backward`` once per graph.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_node_counter = itertools.count()
_grad_mode = threading.local()


def grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording in this thread; forward values only."""
    prev = grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = prev


class Node:
    """One recorded operation: kind, input tensors, output and backward rule.

    ``backward_fn`` maps the output gradient array to one gradient array per
    input (``None`` for inputs that need no gradient).
    """

    __slots__ = ("op", "inputs", "output", "backward_fn", "seq")

    def __init__(self, op: str, inputs: Sequence["Tensor"], output: "Tensor",
                 backward_fn: Callable[[np.ndarray], tuple]):
        self.op = op
        self.inputs = tuple(inputs)
        self.output = output
        self.backward_fn = backward_fn
        self.seq = next(_node_counter)

    def __repr__(self):
        return f"Node({self.op}, seq={self.seq})"


class Tensor:
    """N-dimensional float64 value with an optional gradient accumulator.

    Image tensors use (batch, channels, height, width) layout.  ``grad`` is
    allocated (zero) whenever ``requires_grad`` is set and has the same shape
    as ``data``.  Tensors produced by an operation carry a ``node``
    back-reference; leaves have ``node is None``.
    """

    __slots__ = ("data", "grad", "node", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = (
            np.zeros_like(self.data) if self.requires_grad else None)
        self.node: Optional[Node] = None

    @classmethod
    def _op_output(cls, data) -> "Tensor":
        # op outputs defer gradient allocation to the backward sweep
        out = cls(data)
        out.requires_grad = True
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self):
        backward(self)

    # ---- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            _check_same_shape("add", self, other)
            return _from_op(self.data + other.data, "add", (self, other),
                            lambda go: (go, go))
        c = float(other)
        return _from_op(self.data + c, "add_scalar", (self,), lambda go: (go,))

    __radd__ = __add__

    def __neg__(self):
        return _from_op(-self.data, "neg", (self,), lambda go: (-go,))

    def __sub__(self, other):
        if isinstance(other, Tensor):
            _check_same_shape("sub", self, other)
            return _from_op(self.data - other.data, "sub", (self, other),
                            lambda go: (go, -go))
        c = float(other)
        return _from_op(self.data - c, "sub_scalar", (self,), lambda go: (go,))

    def __rsub__(self, other):
        c = float(other)
        return _from_op(c - self.data, "rsub_scalar", (self,), lambda go: (-go,))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            _check_same_shape("mul", self, other)
            a, b = self.data, other.data
            return _from_op(a * b, "mul", (self, other),
                            lambda go: (go * b, go * a))
        c = float(other)
        return _from_op(self.data * c, "mul_scalar", (self,),
                        lambda go: (go * c,))

    __rmul__ = __mul__

    # ---- elementwise functions -------------------------------------------

    def relu(self) -> "Tensor":
        a = self.data
        # derivative at exactly 0 is defined as 0
        return _from_op(np.maximum(a, 0.0), "relu", (self,),
                        lambda go: (go * (a > 0.0),))

    def sigmoid(self) -> "Tensor":
        a = self.data
        s = np.empty_like(a)
        pos = a >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        ea = np.exp(a[~pos])
        s[~pos] = ea / (1.0 + ea)
        return _from_op(s, "sigmoid", (self,),
                        lambda go: (go * s * (1.0 - s),))

    def log(self) -> "Tensor":
        a = self.data
        if np.any(a <= 0.0):
            raise ValueError("log requires strictly positive values; clamp first")
        return _from_op(np.log(a), "log", (self,), lambda go: (go / a,))

    def clamp(self, lo: float, hi: float) -> "Tensor":
        a = self.data
        mask = (a >= lo) & (a <= hi)
        return _from_op(np.clip(a, lo, hi), "clamp", (self,),
                        lambda go: (go * mask,))

    # ---- reductions -------------------------------------------------------

    def sum(self) -> "Tensor":
        shape = self.data.shape
        return _from_op(self.data.sum(), "sum", (self,),
                        lambda go: (np.broadcast_to(go, shape),))

    def mean(self) -> "Tensor":
        return self.sum() * (1.0 / self.data.size)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _from_op(data: np.ndarray, op: str, inputs: tuple,
             backward_fn: Callable[[np.ndarray], tuple]) -> Tensor:
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out = Tensor._op_output(data)
        out.node = Node(op, inputs, out, backward_fn)
        return out
    return Tensor(data)


def _check_same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---- spatial operations ----------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, padding: str = "same") -> Tensor:
    """Cross-correlate ``x`` (B,Cin,H,W) with ``weight`` (Cout,Cin,Kh,Kw) plus bias.

    ``padding='same'`` zero-pads by (K-1)/2 on each side so the spatial size
    is preserved; ``'valid'`` applies no padding.  Kernel extents must be odd.

    The forward pass runs as a single GEMM over an im2col matrix; the
    backward pass rebuilds the column matrix from the saved padded input and
    scatters input gradients with one slice-add per kernel tap.
    """
    if x.data.ndim != 4:
        raise ValueError(f"conv2d: input must be 4-D (B,C,H,W), got {x.shape}")
    if weight.data.ndim != 4:
        raise ValueError(f"conv2d: weight must be 4-D (Cout,Cin,Kh,Kw), got {weight.shape}")
    cout, cin, kh, kw = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d: kernel extents must be odd, got {kh}x{kw}")
    if x.shape[1] != cin:
        raise ValueError(f"conv2d: input has {x.shape[1]} channels, weight expects {cin}")
    if bias.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {bias.shape} does not match {cout} output channels")
    if padding == "same":
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ValueError(f"conv2d: padding must be 'same' or 'valid', got {padding!r}")

    b_, _, h, w = x.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    ho, wo = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d: {h}x{w} input too small for {kh}x{kw} valid convolution")

    wmat = weight.data.reshape(cout, cin * kh * kw)
    cols = _im2col(xp, kh, kw, ho, wo)
    out = (wmat @ cols).reshape(cout, b_, ho, wo).transpose(1, 0, 2, 3) \
        + bias.data.reshape(1, cout, 1, 1)

    def _bw(go):
        go_mat = go.transpose(1, 0, 2, 3).reshape(cout, -1)
        gb = go.sum(axis=(0, 2, 3))
        gw = (go_mat @ cols.T).reshape(cout, cin, kh, kw)
        gcols = (wmat.T @ go_mat).reshape(cin, kh, kw, b_, ho, wo)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + ho, j:j + wo] += gcols[:, i, j].transpose(1, 0, 2, 3)
        gx = gxp[:, :, ph:ph + h, pw:pw + w] if (ph or pw) else gxp
        return gx, gw, gb

    return _from_op(out, "conv2d", (x, weight, bias), _bw)


def _im2col(xp: np.ndarray, kh: int, kw: int, ho: int, wo: int) -> np.ndarray:
    """Column matrix [Cin*Kh*Kw, B*Ho*Wo]; per-tap slabs copy as contiguous rows."""
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (B,C,Ho,Wo,Kh,Kw)
    b_, c = xp.shape[0], xp.shape[1]
    return win.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, b_ * ho * wo)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; H and W must be even.

    Backward routes the gradient to the window's maximal element, first
    occurrence in row-major window order on ties.
    """
    if x.data.ndim != 4:
        raise ValueError(f"maxpool2d: input must be 4-D, got {x.shape}")
    b_, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2d: spatial dims must be even, got {h}x{w}; pad the input first")
    h2, w2 = h // 2, w // 2
    v = x.data.reshape(b_, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b_, c, h2, w2, 4)
    idx = v.argmax(axis=-1)
    out = v.max(axis=-1)

    def _bw(go):
        gv = np.zeros((b_, c, h2, w2, 4))
        np.put_along_axis(gv, idx[..., None], go[..., None], axis=-1)
        return (gv.reshape(b_, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b_, c, h, w),)

    return _from_op(out, "maxpool2d", (x,), _bw)


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling; backward sums each parent's four children."""
    if x.data.ndim != 4:
        raise ValueError(f"upsample2x: input must be 4-D, got {x.shape}")
    b_, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def _bw(go):
        return (go.reshape(b_, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return _from_op(out, "upsample2x", (x,), _bw)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (B,C,H,W) tensors along the channel axis."""
    if a.data.ndim != 4 or b.data.ndim != 4:
        raise ValueError("concat_channels: inputs must be 4-D")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(f"concat_channels: batch/spatial mismatch {a.shape} vs {b.shape}")
    ca = a.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def _bw(go):
        return go[:, :ca], go[:, ca:]

    return _from_op(out, "concat_channels", (a, b), _bw)


def slice_hw(x: Tensor, r0: int, r1: int, c0: int, c1: int) -> Tensor:
    """Take x[:, :, r0:r1, c0:c1]; backward scatters into the source region."""
    if x.data.ndim != 4:
        raise ValueError(f"slice_hw: input must be 4-D, got {x.shape}")
    out = x.data[:, :, r0:r1, c0:c1].copy()

    def _bw(go):
        g = np.zeros_like(x.data)
        g[:, :, r0:r1, c0:c1] = go
        return (g,)

    return _from_op(out, "slice_hw", (x,), _bw)


# ---- graph and backward ----------------------------------------------------


class Graph:
    """Ordered record of the operation nodes reachable from a root tensor.

    Nodes are listed in execution (creation) order, which is topological:
    every node's inputs appear before it.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes):
        self.nodes = list(nodes)

    @classmethod
    def from_root(cls, root: Tensor) -> "Graph":
        seen = set()
        nodes = []
        stack = [root]
        while stack:
            t = stack.pop()
            node = t.node
            if node is None or id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node.inputs)
        nodes.sort(key=lambda n: n.seq)
        return cls(nodes)

    def __len__(self):
        return len(self.nodes)


def backward(root: Tensor):
    """Populate gradients of everything reachable from a scalar root.

    Reverse sweep in topological order; gradients accumulate additively, so a
    tensor feeding several operations receives the sum of its contributions.
    """
    if root.data.size != 1:
        raise ValueError(f"backward: root must be a scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    if root.grad is None:
        root.grad = np.ones_like(root.data)
    else:
        root.grad[...] = 1.0
    for node in reversed(Graph.from_root(root).nodes):
        grads = node.backward_fn(node.output.grad)
        for inp, g in zip(node.inputs, grads):
            if inp.requires_grad and g is not None:
                if inp.grad is None:
                    inp.grad = np.array(g)  # copy; g may alias or broadcast
                else:
                    inp.grad += g
