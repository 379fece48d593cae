"""Seeded generator of synthetic spine-projection scenes with ground truth.

A scene is a dark background carrying a column of bright vertebra-like
elliptical blobs along a curved midline, optionally flanked by a mirrored
pair of ribbon features.  Two corruption models mimic the artifacts seen in
projected ultrasound: multiplicative smoothed speckle and periodic
horizontal attenuation bands.  Corruptions never touch the ground-truth
mask, which is always defined on the clean geometry.  Everything is a pure
function of the spec (seed included), so regenerating a dataset reproduces
it byte for byte.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from vpiseg.pgm import atomic_write_bytes, read_pgm, write_pgm

PROFILES = ("clean", "speckle", "occlusion", "speckle+occlusion")


@dataclass(frozen=True)
class SceneSpec:
    """Geometry and corruption knobs for one synthetic scene."""
    height: int = 128
    width: int = 512
    seed: int = 0
    # midline horizontal offset: cubic in the normalized row coordinate,
    # coefficients drawn so the total offset stays within curve_amplitude*width
    curve_amplitude: float = 0.12
    blob_period: int = 18
    blob_radius_rows: tuple[float, float] = (4.0, 7.0)
    blob_radius_cols: tuple[float, float] = (10.0, 18.0)
    wing_pair: bool = True
    wing_distance: float = 34.0
    wing_width: float = 5.0
    background_level: float = 0.15
    bone_level: float = 0.8
    speckle_sigma: float = 0.3
    speckle_grain: int = 2
    occl_period: int = 24
    occl_width: int = 6
    occl_atten: float = 0.4

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise ValueError(f"scene too small: {self.height}x{self.width}")
        if not 0.05 <= self.background_level <= 0.3:
            raise ValueError(f"background_level must be in [0.05, 0.3], got {self.background_level}")
        if not 0.6 <= self.bone_level <= 0.95:
            raise ValueError(f"bone_level must be in [0.6, 0.95], got {self.bone_level}")
        if self.bone_level <= self.background_level:
            raise ValueError("bone_level must exceed background_level")
        if self.speckle_sigma < 0:
            raise ValueError(f"speckle_sigma must be >= 0, got {self.speckle_sigma}")
        if max(self.blob_radius_rows[1], self.blob_radius_cols[1]) > self.width / 4:
            raise ValueError(f"blob radius exceeds width/4 = {self.width / 4}")


def generate_scene(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Render (clean_image, mask): floats in [0, 1] and a {0,1} uint8 mask.

    The image depends only on the geometry fields; speckle and occlusion
    settings are applied separately by the corruption functions.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    h, w = spec.height, spec.width

    # midline column per row
    t = np.linspace(-1.0, 1.0, h)
    amp = spec.curve_amplitude * w / 3.0
    c1, c2, c3 = rng.uniform(-amp, amp, size=3)
    mid = w / 2.0 + c1 * t + c2 * t * t + c3 * t ** 3

    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    mask = np.zeros((h, w), dtype=bool)

    phase = int(rng.integers(0, spec.blob_period))
    for rc in range(phase, h, spec.blob_period):
        ra = rng.uniform(*spec.blob_radius_rows)
        rl = rng.uniform(*spec.blob_radius_cols)
        cc = mid[rc]
        mask |= ((rows - rc) / ra) ** 2 + ((cols - cc) / rl) ** 2 <= 1.0

    if spec.wing_pair:
        half = spec.wing_width / 2.0
        for side in (-1.0, 1.0):
            center = mid + side * spec.wing_distance
            mask |= np.abs(cols - center[:, None]) <= half

    # 2-pixel linear falloff from bone to background outside the mask
    d_out = ndimage.distance_transform_edt(~mask)
    blend = np.clip(1.0 - d_out / 2.0, 0.0, 1.0)
    image = spec.background_level + (spec.bone_level - spec.background_level) * blend
    return image, mask.astype(np.uint8)


def apply_speckle(image: np.ndarray, sigma: float, grain: int, seed: int) -> np.ndarray:
    """Multiplicative smoothed noise: clamp(image * (1 + sigma*n), 0, 1).

    n is a zero-mean unit-variance field, box-smoothed with the given radius
    and re-standardized, drawn deterministically from the seed.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    img = np.asarray(image, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = rng.standard_normal(img.shape)
    if grain > 0:
        n = ndimage.uniform_filter(n, size=2 * grain + 1, mode="reflect")
    n = (n - n.mean()) / n.std()
    return np.clip(img * (1.0 + sigma * n), 0.0, 1.0)


def apply_occlusion(image: np.ndarray, period: int, width: int, atten: float,
                    phase_seed: int) -> np.ndarray:
    """Attenuate periodic horizontal bands: rows with ((r+phase) mod period) < width."""
    if not 0 < width < period:
        raise ValueError(f"need 0 < width < period, got width={width} period={period}")
    if not 0.0 < atten <= 1.0:
        raise ValueError(f"atten must be in (0, 1], got {atten}")
    img = np.asarray(image, dtype=np.float64)
    phase = int(np.random.Generator(np.random.PCG64(phase_seed)).integers(0, period))
    r = np.arange(img.shape[0])
    banded = ((r + phase) % period) < width
    out = img.copy()
    out[banded] *= atten
    return out


def corrupt(image: np.ndarray, spec: SceneSpec, profile: str,
            speckle_seed: int, phase_seed: int) -> np.ndarray:
    """Apply the named corruption profile using the spec's noise fields."""
    if profile not in PROFILES:
        raise ValueError(f"unknown noise profile {profile!r}; choose from {PROFILES}")
    out = image
    if "speckle" in profile:
        out = apply_speckle(out, spec.speckle_sigma, spec.speckle_grain, speckle_seed)
    if "occlusion" in profile:
        out = apply_occlusion(out, spec.occl_period, spec.occl_width,
                              spec.occl_atten, phase_seed)
    return out


def _derived_seeds(base_seed: int, index: int) -> tuple[int, int, int]:
    ss = np.random.SeedSequence((base_seed, index))
    scene, speckle, phase = ss.generate_state(3)
    return int(scene), int(speckle), int(phase)


def generate_dataset(n: int, template: SceneSpec, split: tuple[int, int],
                     profile: str, out_dir: str, max_workers: int = 1) -> str:
    """Write n scenes plus a manifest CSV under out_dir; returns the manifest path.

    Scene i uses seeds derived from (template.seed, i), so the dataset is a
    pure function of its arguments.  The split assigns the first scenes to
    train and the rest to test, by scene index.  Images carry the requested
    corruption profile; masks always come from the clean geometry.
    """
    if n < 2:
        raise ValueError(f"need at least 2 scenes, got {n}")
    n_train, n_test = split
    if n_train < 0 or n_test < 0 or n_train + n_test != n:
        raise ValueError(f"split {n_train}:{n_test} does not partition {n} scenes")
    if profile not in PROFILES:
        raise ValueError(f"unknown noise profile {profile!r}; choose from {PROFILES}")
    os.makedirs(out_dir, exist_ok=True)
    digits = max(3, len(str(n - 1)))

    def make_one(i: int) -> tuple:
        scene_seed, speckle_seed, phase_seed = _derived_seeds(template.seed, i)
        spec = replace(template, seed=scene_seed)
        clean, mask = generate_scene(spec)
        image = corrupt(clean, spec, profile, speckle_seed, phase_seed)
        img_name = f"img_{i:0{digits}d}.pgm"
        mask_name = f"mask_{i:0{digits}d}.pgm"
        write_pgm(image, os.path.join(out_dir, img_name))
        write_pgm(mask.astype(np.float64), os.path.join(out_dir, mask_name))
        tag = "train" if i < n_train else "test"
        return i, img_name, mask_name, tag, scene_seed

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(make_one, range(n)))
    else:
        records = [make_one(i) for i in range(n)]
    records.sort(key=lambda r: r[0])

    lines = ["index,image_path,mask_path,split,seed"]
    lines += [f"{i},{img},{msk},{tag},{seed}" for i, img, msk, tag, seed in records]
    manifest = os.path.join(out_dir, "manifest.csv")
    atomic_write_bytes(manifest, ("\n".join(lines) + "\n").encode())
    return manifest


def load_manifest(path: str) -> list[dict]:
    """Parse a dataset manifest into records with absolute image/mask paths."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    except OSError as e:
        raise ValueError(f"cannot read manifest {path}: {e}") from None
    if not lines or lines[0] != "index,image_path,mask_path,split,seed":
        raise ValueError(f"{path}: not a dataset manifest (bad header)")
    records = []
    for ln in lines[1:]:
        idx, img, msk, tag, seed = ln.split(",")
        records.append({"index": int(idx),
                        "image_path": os.path.join(base, img),
                        "mask_path": os.path.join(base, msk),
                        "split": tag,
                        "seed": int(seed)})
    return records


def load_pair(record: dict) -> tuple[np.ndarray, np.ndarray]:
    """Load one manifest record as (image in [0,1], {0,1} uint8 mask)."""
    for key in ("image_path", "mask_path"):
        if not os.path.exists(record[key]):
            raise FileNotFoundError(f"dataset file missing: {record[key]}")
    image = read_pgm(record["image_path"])
    mask = (read_pgm(record["mask_path"]) >= 0.5).astype(np.uint8)
    return image, mask
