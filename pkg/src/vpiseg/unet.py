"""U-net-style encoder/decoder segmentation network.

Four (configurable) encoder stacks of two 3x3 convolutions followed by 2x2
max pooling, a two-convolution bottleneck, mirrored decoder stacks of
nearest-neighbor upsampling, skip concatenation and two 3x3 convolutions,
and a final 1x1 convolution with sigmoid producing a per-pixel probability
map.  All convolutions use same padding so encoder and decoder feature maps
align exactly and the output keeps the input's spatial size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from vpiseg.tensor import Tensor, concat_channels, conv2d, maxpool2d, upsample2x

CHECKPOINT_MAGIC = b"VPSG1"


@dataclass(frozen=True)
class UNetConfig:
    """Architecture hyperparameters; channel width doubles per encoder stack."""
    depth: int = 4
    base_channels: int = 16
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("in_channels and out_channels must be >= 1")


class ParamSet:
    """Named weight/bias tensors in a fixed, seed-independent iteration order."""

    def __init__(self, config: UNetConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        self.tensors: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray):
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        self.tensors[name] = Tensor(data, requires_grad=True)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def items(self):
        return self.tensors.items()

    def num_scalars(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def zero_grads(self):
        for t in self.tensors.values():
            t.zero_grad()

    def grads(self) -> dict[str, np.ndarray]:
        return {name: t.grad for name, t in self.tensors.items()}


def _layer_plan(config: UNetConfig) -> list[tuple[str, int, int, int]]:
    """(name, out_channels, in_channels, kernel) for every convolution, in order."""
    plan = []
    ch_in = config.in_channels
    for d in range(config.depth):
        ch = config.base_channels * (2 ** d)
        plan.append((f"enc{d}.conv1", ch, ch_in, 3))
        plan.append((f"enc{d}.conv2", ch, ch, 3))
        ch_in = ch
    ch = config.base_channels * (2 ** config.depth)
    plan.append(("mid.conv1", ch, ch_in, 3))
    plan.append(("mid.conv2", ch, ch, 3))
    for d in reversed(range(config.depth)):
        skip = config.base_channels * (2 ** d)
        up = config.base_channels * (2 ** (d + 1))
        plan.append((f"dec{d}.conv1", skip, up + skip, 3))
        plan.append((f"dec{d}.conv2", skip, skip, 3))
    plan.append(("head", config.out_channels, config.base_channels, 1))
    return plan


def build(config: UNetConfig, seed: int) -> ParamSet:
    """Allocate and initialize all network parameters.

    Weights use a fan-in-scaled uniform draw, bound = sqrt(6 / fan_in);
    biases start at zero.  The same seed always yields bit-identical values.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = ParamSet(config, seed)
    for name, cout, cin, k in _layer_plan(config):
        bound = np.sqrt(6.0 / (cin * k * k))
        params.add(f"{name}.weight", rng.uniform(-bound, bound, size=(cout, cin, k, k)))
        params.add(f"{name}.bias", np.zeros(cout))
    return params


def _conv_block(params: ParamSet, name: str, x: Tensor) -> Tensor:
    x = conv2d(x, params[f"{name}.conv1.weight"], params[f"{name}.conv1.bias"]).relu()
    x = conv2d(x, params[f"{name}.conv2.weight"], params[f"{name}.conv2.bias"]).relu()
    return x


def forward(params: ParamSet, image: Tensor) -> Tensor:
    """Run the network on a (1,1,H,W) image; returns a (1,1,H,W) probability map.

    H and W must be divisible by 2**depth so every pooling stage halves
    cleanly; callers with other sizes must zero-pad first.
    """
    cfg = params.config
    if image.data.ndim != 4 or image.shape[1] != cfg.in_channels:
        raise ValueError(f"forward: expected (B,{cfg.in_channels},H,W) input, got {image.shape}")
    h, w = image.shape[2], image.shape[3]
    div = 2 ** cfg.depth
    if h % div or w % div:
        raise ValueError(
            f"forward: spatial dims {h}x{w} not divisible by 2^depth = {div}; "
            f"pad to {-(-h // div) * div}x{-(-w // div) * div} first")

    skips = []
    x = image
    for d in range(cfg.depth):
        x = _conv_block(params, f"enc{d}", x)
        skips.append(x)
        x = maxpool2d(x)
    x = _conv_block(params, "mid", x)
    for d in reversed(range(cfg.depth)):
        x = concat_channels(upsample2x(x), skips[d])
        x = _conv_block(params, f"dec{d}", x)
    x = conv2d(x, params["head.weight"], params["head.bias"])
    return x.sigmoid()


def threshold_mask(prob: Tensor, t: float = 0.5) -> np.ndarray:
    """Binarize a (1,1,H,W) probability map at threshold t (inclusive >=)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {t}")
    p = prob.data if isinstance(prob, Tensor) else np.asarray(prob)
    if p.ndim == 4:
        p = p[0, 0]
    return (p >= t).astype(np.uint8)


# ---- checkpoint format -------------------------------------------------------
#
# magic "VPSG1"
# uint32 LE x4: depth, base_channels, in_channels, out_channels
# uint64 LE:    initialization seed
# uint32 LE:    tensor count
# per tensor:   uint32 LE name length, name bytes (utf-8), uint32 LE rank,
#               uint32 LE extents, raw float64 LE values in row-major order


def save_params(params: ParamSet, path: str):
    cfg = params.config
    chunks = [CHECKPOINT_MAGIC,
              struct.pack("<4I", cfg.depth, cfg.base_channels, cfg.in_channels, cfg.out_channels),
              struct.pack("<Q", params.seed),
              struct.pack("<I", len(params.tensors))]
    for name, t in params.items():
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", t.data.ndim))
        chunks.append(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
        chunks.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    from vpiseg.pgm import atomic_write_bytes
    atomic_write_bytes(path, b"".join(chunks))


def load_params(path: str) -> ParamSet:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:5] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic {blob[:5]!r})")
    off = 5
    depth, base, cin, cout = struct.unpack_from("<4I", blob, off); off += 16
    (seed,) = struct.unpack_from("<Q", blob, off); off += 8
    (count,) = struct.unpack_from("<I", blob, off); off += 4
    params = ParamSet(UNetConfig(depth, base, cin, cout), seed)
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off); off += 4
        name = blob[off:off + nlen].decode("utf-8"); off += nlen
        (rank,) = struct.unpack_from("<I", blob, off); off += 4
        extents = struct.unpack_from(f"<{rank}I", blob, off); off += 4 * rank
        n = int(np.prod(extents))
        data = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(extents)
        off += 8 * n
        params.add(name, data.copy())
    if off != len(blob):
        raise ValueError(f"{path}: {len(blob) - off} trailing bytes after last tensor")
    return params
