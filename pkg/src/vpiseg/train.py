"""Optimization loop, Adam updates, resizing, evaluation and comparison runs.

Training iterates one augmented crop per step: forward, combined loss,
backward, Adam with coupled L2 weight decay.  Everything downstream of the
seed is deterministic, so a (seed, config, dataset) triple fully determines
the checkpoint bytes and every logged number.

Evaluation restores a checkpoint, optionally resizes each test image to a
fixed working size, zero-pads to the network's divisibility requirement,
runs the forward pass, crops the padding off, resizes the probability map
back to the original dimensions, then scores Dice per image and one ROC/AUC
pooled over all test pixels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from vpiseg import metrics
from vpiseg.augment import AugmentConfig, affine, hflip, random_crop
from vpiseg.losses import LossConfig, bce_loss, tv_loss
from vpiseg.pgm import atomic_write_bytes, write_pgm16
from vpiseg.synth import load_manifest, load_pair
from vpiseg.tensor import Tensor, backward, no_grad
from vpiseg.unet import ParamSet, UNetConfig, build, forward, load_params, save_params, threshold_mask

PAPER_REFERENCE = ("baseline dice 0.7608 auc 0.97; "
                   "smoothness-regularized dice 0.7838 auc 0.98")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 0.01
    weight_decay: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0
    crops_per_image: int = 4
    checkpoint_every: int = 0   # 0 = final checkpoint only
    working_h: int = 0          # 0 = evaluate at native size
    working_w: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class OptimizerState:
    """First/second moment arrays aligned to the parameter iteration order."""
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam_state(params: ParamSet) -> OptimizerState:
    return OptimizerState(
        m={name: np.zeros_like(t.data) for name, t in params.items()},
        v={name: np.zeros_like(t.data) for name, t in params.items()})


def adam_step(params: ParamSet, grads: dict[str, np.ndarray],
              state: OptimizerState, cfg: TrainConfig):
    """One in-place Adam update with coupled L2 weight decay.

    g <- g + weight_decay*theta; m, v are exponential moving averages of g
    and g^2; parameters move by lr * bias-corrected m / (sqrt(v-hat) + eps).
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise ValueError(f"missing gradient for parameter {name!r}")
        if cfg.weight_decay != 0.0:
            g = g + cfg.weight_decay * p.data
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.data -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def resize(image: np.ndarray, target_h: int, target_w: int,
           mode: str = "bilinear") -> np.ndarray:
    """Resize a 2-D array with half-pixel-centered sampling and edge clamping.

    Bilinear for images and probability maps, nearest for masks (keeps them
    binary).  A same-size resize is the identity.
    """
    if target_h < 1 or target_w < 1:
        raise ValueError(f"resize targets must be positive, got {target_h}x{target_w}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"resize expects a 2-D array, got shape {img.shape}")
    h, w = img.shape
    if (h, w) == (target_h, target_w):
        return img.copy()
    rs = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0, h - 1)
    cs = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0, w - 1)
    if mode == "nearest":
        ri = np.minimum(((np.arange(target_h) + 0.5) * (h / target_h)).astype(np.int64), h - 1)
        ci = np.minimum(((np.arange(target_w) + 0.5) * (w / target_w)).astype(np.int64), w - 1)
        return img[ri[:, None], ci[None, :]]
    if mode != "bilinear":
        raise ValueError(f"resize mode must be 'bilinear' or 'nearest', got {mode!r}")
    r0 = np.floor(rs).astype(np.int64)
    c0 = np.floor(cs).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    rf = (rs - r0)[:, None]
    cf = (cs - c0)[None, :]
    top = img[r0[:, None], c0[None, :]] * (1 - cf) + img[r0[:, None], c1[None, :]] * cf
    bot = img[r1[:, None], c0[None, :]] * (1 - cf) + img[r1[:, None], c1[None, :]] * cf
    return top * (1 - rf) + bot * rf


def pad_to_divisible(image: np.ndarray, div: int) -> np.ndarray:
    """Zero-pad bottom/right so both spatial dims are multiples of div."""
    h, w = image.shape
    ph, pw = (-h) % div, (-w) % div
    if ph == 0 and pw == 0:
        return image
    return np.pad(image, ((0, ph), (0, pw)))


def _float_csv(x: float) -> str:
    return repr(float(x))


def train(manifest_path: str, cfg: TrainConfig, net_cfg: UNetConfig,
          out_dir: str) -> tuple[str, str]:
    """Train on the manifest's train split; returns (checkpoint_path, log_path).

    Per epoch, every training image contributes cfg.crops_per_image
    augmented patches; each patch is one optimization step (batch size 1).
    Writes a per-epoch loss log CSV and the final checkpoint (plus
    intermediate checkpoints every cfg.checkpoint_every epochs if set).
    A non-finite loss aborts with the offending epoch in the error.
    """
    records = [r for r in load_manifest(manifest_path) if r["split"] == "train"]
    if not records:
        raise ValueError(f"{manifest_path}: no training scenes in manifest")
    data = [load_pair(r) for r in records]

    params = build(net_cfg, cfg.seed)
    state = init_adam_state(params)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 1))))
    os.makedirs(out_dir, exist_ok=True)

    log_rows = ["epoch,mean_loss,mean_bce,mean_tv"]
    lam = cfg.loss.tv_weight
    for epoch in range(1, cfg.epochs + 1):
        tot = np.zeros(3)
        steps = 0
        for i in rng.permutation(len(data)):
            image, mask = data[i]
            for _ in range(cfg.crops_per_image):
                pi, pm = random_crop(image, mask, cfg.augment, rng)
                pi, pm = hflip(pi, pm, rng, cfg.augment.flip_prob)
                pi, pm = affine(pi, pm, cfg.augment, rng)
                prob = forward(params, Tensor(pi[None, None]))
                bce = bce_loss(prob, pm, cfg.loss)
                tv = tv_loss(prob)
                loss = bce if lam == 0.0 else bce + lam * tv
                if not np.isfinite(loss.item()):
                    raise RuntimeError(
                        f"training diverged: non-finite loss at epoch {epoch}")
                params.zero_grads()
                backward(loss)
                adam_step(params, params.grads(), state, cfg)
                tot += (loss.item(), bce.item(), tv.item())
                steps += 1
        mean = tot / steps
        log_rows.append(f"{epoch},{_float_csv(mean[0])},{_float_csv(mean[1])},{_float_csv(mean[2])}")
        if cfg.checkpoint_every > 0 and epoch % cfg.checkpoint_every == 0:
            save_params(params, os.path.join(out_dir, f"checkpoint_epoch{epoch:03d}.vpsg"))

    ckpt_path = os.path.join(out_dir, "checkpoint.vpsg")
    save_params(params, ckpt_path)
    log_path = os.path.join(out_dir, "loss_log.csv")
    atomic_write_bytes(log_path, ("\n".join(log_rows) + "\n").encode())
    return ckpt_path, log_path


def predict_map(params: ParamSet, image: np.ndarray,
                working_size: tuple[int, int] | None = None) -> np.ndarray:
    """Probability map for one grayscale image, at the image's original size.

    Optionally resizes to a fixed working size first; always zero-pads to the
    network's 2^depth divisibility, crops the padding off afterwards, and
    resizes the map back to the original dimensions.
    """
    h0, w0 = image.shape
    work = resize(image, *working_size) if working_size else image
    hw, ww = work.shape
    div = 2 ** params.config.depth
    padded = pad_to_divisible(work, div)
    with no_grad():
        prob = forward(params, Tensor(padded[None, None])).data[0, 0, :hw, :ww]
    if (hw, ww) != (h0, w0):
        prob = resize(prob, h0, w0)
    return prob


def evaluate(ckpt_path: str, manifest_path: str, out_dir: str | None = None,
             threshold: float = 0.5, working_size: tuple[int, int] | None = None,
             save_probs: bool = True) -> metrics.EvalReport:
    """Score a checkpoint on the manifest's test split.

    Per-image Dice at the threshold plus one ROC/AUC pooled over all test
    pixels.  With out_dir set, writes the report CSVs and (by default) each
    image's probability map as a 16-bit PGM.
    """
    params = load_params(ckpt_path)
    records = [r for r in load_manifest(manifest_path) if r["split"] == "test"]
    if not records:
        raise ValueError(f"{manifest_path}: no test scenes in manifest")

    ids, dices = [], []
    scores, labels = [], []
    counts = np.zeros(4, dtype=np.int64)
    for rec in records:
        image, mask = load_pair(rec)
        prob = predict_map(params, image, working_size)
        pred = (prob >= threshold).astype(np.uint8)
        ids.append(str(rec["index"]))
        dices.append(metrics.dice(pred, mask))
        counts += metrics.confusion(pred, mask)
        scores.append(prob.ravel())
        labels.append(mask.ravel())
        if out_dir is not None and save_probs:
            write_pgm16(prob, os.path.join(out_dir, f"prob_{rec['index']:03d}.pgm"))

    report = metrics.build_report(ids, dices, np.concatenate(scores),
                                  np.concatenate(labels), tuple(int(c) for c in counts))
    if out_dir is not None:
        report.write_csvs(out_dir)
    return report


# ---- config files ------------------------------------------------------------

CONFIG_KEYS = {
    "depth": int, "base_channels": int,
    "epochs": int, "lr": float, "weight_decay": float,
    "beta1": float, "beta2": float, "adam_eps": float,
    "tv_weight": float, "loss_eps": float,
    "crop_h": int, "crop_w": int, "flip_prob": float,
    "rotation_deg": float, "translate_frac": float,
    "scale_min": float, "scale_max": float,
    "crops_per_image": int, "checkpoint_every": int,
    "seed": int, "working_h": int, "working_w": int,
}


def parse_config(path: str) -> tuple[TrainConfig, UNetConfig]:
    """Read a key=value config file; unknown keys are errors.

    Blank lines and lines starting with '#' are ignored.  Any key may be
    omitted, in which case its default applies.
    """
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {s!r}")
            key, _, val = s.partition("=")
            key, val = key.strip(), val.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in raw:
                raise ValueError(f"{path}:{lineno}: duplicate config key {key!r}")
            raw[key] = val
    vals = {}
    for key, sval in raw.items():
        try:
            vals[key] = CONFIG_KEYS[key](sval)
        except ValueError:
            raise ValueError(f"{path}: bad value {sval!r} for key {key!r}") from None

    net = UNetConfig(depth=vals.get("depth", 4),
                     base_channels=vals.get("base_channels", 16))
    loss = LossConfig(tv_weight=vals.get("tv_weight", LossConfig.tv_weight),
                      eps=vals.get("loss_eps", LossConfig.eps))
    aug_defaults = AugmentConfig()
    aug = AugmentConfig(
        crop_h=vals.get("crop_h", aug_defaults.crop_h),
        crop_w=vals.get("crop_w", aug_defaults.crop_w),
        flip_prob=vals.get("flip_prob", aug_defaults.flip_prob),
        rotation_deg=vals.get("rotation_deg", aug_defaults.rotation_deg),
        translate_frac=vals.get("translate_frac", aug_defaults.translate_frac),
        scale_range=(vals.get("scale_min", aug_defaults.scale_range[0]),
                     vals.get("scale_max", aug_defaults.scale_range[1])))
    cfg_defaults = TrainConfig()
    cfg = TrainConfig(
        epochs=vals.get("epochs", cfg_defaults.epochs),
        lr=vals.get("lr", cfg_defaults.lr),
        weight_decay=vals.get("weight_decay", cfg_defaults.weight_decay),
        beta1=vals.get("beta1", cfg_defaults.beta1),
        beta2=vals.get("beta2", cfg_defaults.beta2),
        adam_eps=vals.get("adam_eps", cfg_defaults.adam_eps),
        loss=loss, augment=aug,
        seed=vals.get("seed", cfg_defaults.seed),
        crops_per_image=vals.get("crops_per_image", cfg_defaults.crops_per_image),
        checkpoint_every=vals.get("checkpoint_every", cfg_defaults.checkpoint_every),
        working_h=vals.get("working_h", 0),
        working_w=vals.get("working_w", 0))
    return cfg, net


def write_config(path: str, cfg: TrainConfig, net: UNetConfig):
    lines = [
        f"depth={net.depth}", f"base_channels={net.base_channels}",
        f"epochs={cfg.epochs}", f"lr={cfg.lr!r}", f"weight_decay={cfg.weight_decay!r}",
        f"beta1={cfg.beta1!r}", f"beta2={cfg.beta2!r}", f"adam_eps={cfg.adam_eps!r}",
        f"tv_weight={cfg.loss.tv_weight!r}", f"loss_eps={cfg.loss.eps!r}",
        f"crop_h={cfg.augment.crop_h}", f"crop_w={cfg.augment.crop_w}",
        f"flip_prob={cfg.augment.flip_prob!r}",
        f"rotation_deg={cfg.augment.rotation_deg!r}",
        f"translate_frac={cfg.augment.translate_frac!r}",
        f"scale_min={cfg.augment.scale_range[0]!r}",
        f"scale_max={cfg.augment.scale_range[1]!r}",
        f"crops_per_image={cfg.crops_per_image}",
        f"checkpoint_every={cfg.checkpoint_every}",
        f"seed={cfg.seed}", f"working_h={cfg.working_h}", f"working_w={cfg.working_w}",
    ]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def compare_runs(config_a_path: str, config_b_path: str, manifest_path: str,
                 seeds: list[int], out_csv: str) -> list[tuple]:
    """Train and evaluate two configs per seed on the same data; write a CSV.

    Each seed produces one row (seed, mean_dice_a, mean_dice_b, auc_a, auc_b);
    a final 'mean' row averages the columns.  Per-run outputs (checkpoints,
    loss logs, eval CSVs) land next to the CSV under runs/seed<S>/<a|b>/.
    """
    if not seeds:
        raise ValueError("compare needs at least one seed")
    cfg_a, net_a = parse_config(config_a_path)
    cfg_b, net_b = parse_config(config_b_path)
    base = os.path.dirname(os.path.abspath(out_csv))
    rows = []
    for seed in seeds:
        row = [seed]
        aucs = []
        for tag, cfg, net in (("a", cfg_a, net_a), ("b", cfg_b, net_b)):
            run_dir = os.path.join(base, "runs", f"seed{seed}", tag)
            ckpt, _ = train(manifest_path, replace(cfg, seed=seed), net, run_dir)
            ws = (cfg.working_h, cfg.working_w) if cfg.working_h and cfg.working_w else None
            report = evaluate(ckpt, manifest_path, out_dir=run_dir, working_size=ws)
            row.append(report.mean_dice)
            aucs.append(report.auc)
        rows.append(tuple(row + aucs))

    arr = np.array([r[1:] for r in rows])
    lines = [f"# reference: {PAPER_REFERENCE}",
             "seed,mean_dice_a,mean_dice_b,auc_a,auc_b"]
    lines += [f"{r[0]},{_float_csv(r[1])},{_float_csv(r[2])},{_float_csv(r[3])},{_float_csv(r[4])}"
              for r in rows]
    m = arr.mean(axis=0)
    lines.append(f"mean,{_float_csv(m[0])},{_float_csv(m[1])},{_float_csv(m[2])},{_float_csv(m[3])}")
    atomic_write_bytes(out_csv, ("\n".join(lines) + "\n").encode())
    return rows
