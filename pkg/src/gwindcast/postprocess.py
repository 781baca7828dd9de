"""Distribution calibration of model outputs by CDF matching.

A :class:`CdfMap` is fitted per output channel from the *train split only*:
the source distribution is the model's train-split predictions, the target
distribution the train-split observations. Two modes:

* ``gaussian_affine`` -- y' = (y - mu_src) / sigma_src * sigma_tgt + mu_tgt;
  channels whose source std is 0 pass through unchanged.
* ``empirical_quantile`` -- y is pushed through the piecewise-linear source
  CDF built on evenly spaced quantiles, then through the inverse target CDF;
  values beyond the sampled range clamp to the end quantiles.

Both modes are monotone non-decreasing per channel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ChannelMismatch, ConfigError, EmptyTrain

MODES = ("gaussian_affine", "empirical_quantile")
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CdfMap:
    mode: str
    n_channels: int
    mu_src: np.ndarray | None = None
    sigma_src: np.ndarray | None = None
    mu_tgt: np.ndarray | None = None
    sigma_tgt: np.ndarray | None = None
    src_quantiles: np.ndarray | None = None
    tgt_quantiles: np.ndarray | None = None

    @property
    def n_quantiles(self) -> int:
        return 0 if self.src_quantiles is None else self.src_quantiles.shape[1]


def fit_cdf_map(model, samples, mode: str = "gaussian_affine", n_quantiles: int = 101) -> CdfMap:
    """Fit a calibration map on the train split of ``samples``.

    Touches only train inputs and train targets; val/test rows never enter.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if n_quantiles < 2:
        raise ConfigError("n_quantiles must be at least 2")
    tr = samples.indices("train")
    if len(tr) == 0:
        raise EmptyTrain("calibration requires a non-empty train split")
    stats = samples.norm_stats
    preds = stats.denormalize_targets(model.predict(stats.normalize_inputs(samples.inputs[tr])))
    targets = samples.targets[tr]
    n_channels = targets.shape[1]
    if mode == "gaussian_affine":
        return CdfMap(
            mode=mode,
            n_channels=n_channels,
            mu_src=preds.mean(axis=0),
            sigma_src=preds.std(axis=0),
            mu_tgt=targets.mean(axis=0),
            sigma_tgt=targets.std(axis=0),
        )
    q = np.linspace(0.0, 1.0, n_quantiles)
    return CdfMap(
        mode=mode,
        n_channels=n_channels,
        src_quantiles=np.quantile(preds, q, axis=0).T,
        tgt_quantiles=np.quantile(targets, q, axis=0).T,
    )


def apply_cdf_map(cdf: CdfMap, raw: np.ndarray) -> np.ndarray:
    """Calibrate raw per-channel outputs, shape (n, n_channels)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != cdf.n_channels:
        got = raw.shape[1] if raw.ndim == 2 else raw.ndim
        raise ChannelMismatch(f"map has {cdf.n_channels} channels, input has {got}")
    if cdf.mode == "gaussian_affine":
        gain = np.where(cdf.sigma_src > 0, cdf.sigma_tgt / np.where(cdf.sigma_src > 0, cdf.sigma_src, 1.0), 1.0)
        offset = np.where(cdf.sigma_src > 0, cdf.mu_tgt - cdf.mu_src * gain, 0.0)
        return raw * gain + offset
    out = np.empty_like(raw)
    positions = np.linspace(0.0, 1.0, cdf.n_quantiles)
    for c in range(cdf.n_channels):
        src = cdf.src_quantiles[c]
        # collapse ties so the forward CDF keeps a strictly increasing support;
        # a tied node maps to the top of its probability jump
        values = np.unique(src)
        top = np.searchsorted(src, values, side="right") - 1
        u = np.interp(raw[:, c], values, positions[top])
        out[:, c] = np.interp(u, positions, cdf.tgt_quantiles[c])
    return out


def cdf_map_to_dict(cdf: CdfMap) -> dict:
    d = {"format_version": _FORMAT_VERSION, "mode": cdf.mode, "n_channels": cdf.n_channels}
    if cdf.mode == "gaussian_affine":
        d.update(
            mu_src=cdf.mu_src.tolist(),
            sigma_src=cdf.sigma_src.tolist(),
            mu_tgt=cdf.mu_tgt.tolist(),
            sigma_tgt=cdf.sigma_tgt.tolist(),
        )
    else:
        d.update(
            src_quantiles=cdf.src_quantiles.tolist(),
            tgt_quantiles=cdf.tgt_quantiles.tolist(),
        )
    return d


def cdf_map_from_dict(d: dict) -> CdfMap:
    if d.get("format_version") != _FORMAT_VERSION:
        raise ConfigError(f"unsupported calibration file version: {d.get('format_version')}")
    if d["mode"] == "gaussian_affine":
        return CdfMap(
            mode=d["mode"],
            n_channels=int(d["n_channels"]),
            mu_src=np.array(d["mu_src"]),
            sigma_src=np.array(d["sigma_src"]),
            mu_tgt=np.array(d["mu_tgt"]),
            sigma_tgt=np.array(d["sigma_tgt"]),
        )
    return CdfMap(
        mode=d["mode"],
        n_channels=int(d["n_channels"]),
        src_quantiles=np.array(d["src_quantiles"]),
        tgt_quantiles=np.array(d["tgt_quantiles"]),
    )


def write_cdf_map(path, cdf: CdfMap) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(cdf_map_to_dict(cdf), f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def read_cdf_map(path) -> CdfMap:
    with open(path, "r", encoding="utf-8") as f:
        return cdf_map_from_dict(json.load(f))
