"""Camera frame preprocessing: grayscale, 32x32 resize, [0, 1] scaling."""
from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from .. import IMAGE_SIZE
from .records import FrameSet

log = logging.getLogger(__name__)

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
FRAME_SUFFIXES = (".png", ".pgm")


def to_grayscale(image) -> np.ndarray:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B; 2-D input passes through."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an RGB (H, W, 3) or grayscale (H, W) image, got shape {img.shape}")
    r, g, b = GRAY_WEIGHTS
    return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]


def _axis_weights(n_in, n_out):
    # Half-pixel centres; identity when n_in == n_out.
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize(image, size=IMAGE_SIZE) -> np.ndarray:
    """Bilinear resize of a 2-D image to ``size`` x ``size``."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"cannot resize image of shape {img.shape}")
    lo, hi, w = _axis_weights(img.shape[0], size)
    rows = img[lo] + w[:, None] * (img[hi] - img[lo])
    lo, hi, w = _axis_weights(img.shape[1], size)
    return rows[:, lo] + w[None, :] * (rows[:, hi] - rows[:, lo])


def resize_32(image) -> np.ndarray:
    return resize(image, IMAGE_SIZE)


def scale_pixels(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.size and (img.min() < 0 or img.max() > 255):
        raise ValueError(f"pixel values must lie in [0, 255], got [{img.min()}, {img.max()}]")
    return img / 255.0


def preprocess_frame(image) -> np.ndarray:
    return scale_pixels(resize_32(to_grayscale(image)))


def read_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        elif im.mode in ("RGBA", "LA"):
            im = im.convert("RGB" if im.mode == "RGBA" else "L")
        return np.asarray(im)


def write_image(path, pixels01) -> None:
    """Write a [0, 1] grayscale frame as an 8-bit PNG/PGM."""
    from PIL import Image

    arr = np.rint(np.asarray(pixels01) * 255.0).clip(0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def frame_timestamp(path) -> float:
    stem = Path(path).stem
    try:
        return int(stem) / 1000.0
    except ValueError:
        raise ValueError(f"frame file name {Path(path).name!r} is not <epoch_millis>.png") from None


def load_frames(directory, camera_id: int) -> FrameSet:
    """Load and preprocess every frame in ``directory``, sorted by timestamp.

    Frames sharing a timestamp are redundant; only the first (by file name) is kept.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"camera {camera_id}: no such directory {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    stamped = sorted(((frame_timestamp(p), p) for p in files), key=lambda tp: tp[0])
    times, images = [], []
    for t, path in stamped:
        if times and t == times[-1]:
            continue
        try:
            images.append(preprocess_frame(read_image(path)))
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
        times.append(t)
    n_redundant = len(stamped) - len(times)
    if n_redundant:
        log.info("camera %d: dropped %d redundant frames", camera_id, n_redundant)
    imgs = np.array(images).reshape(len(times), IMAGE_SIZE, IMAGE_SIZE)
    return FrameSet(camera_id, np.array(times, dtype=np.float64), imgs)


def write_frames(directory, frames: FrameSet, suffix=".png") -> None:
    os.makedirs(directory, exist_ok=True)
    for t, img in zip(frames.timestamps, frames.images):
        write_image(Path(directory) / f"{int(round(t * 1000))}{suffix}", img)
