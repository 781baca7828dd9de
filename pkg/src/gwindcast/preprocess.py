"""Turning raw observations into model-ready tensors.

Covers gap filling of delay panels, temporal resampling, the height->pressure
map, vertical interpolation onto pressure levels, speed/direction <-> (u, v)
conversion, nearest-station selection, and sliding-window sample assembly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import geo
from .core import (
    HEIGHT_M,
    PRESSURE_HPA,
    LevelSpec,
    NormStats,
    SampleSet,
    StationTable,
    TimeAxis,
    WindCube,
    ZtdPanel,
)
from .errors import (
    AllMissing,
    ConfigError,
    EmptyOverlap,
    KTooLarge,
    Misaligned,
    NegativeSpeed,
    NoSamples,
)

_IDW_NEIGHBORS = 4


@dataclass(frozen=True)
class PressureMapParams:
    """Exponential pressure profile: p(h) = p0 * exp(-h / h_scale)."""

    p0_hpa: float = 1013.25
    h_scale_m: float = 8000.0


@dataclass(frozen=True)
class SplitConfig:
    """Seeded random train/val/test split proportions (must sum to 1)."""

    ratios: tuple = (0.7, 0.15, 0.15)
    seed: int = 0

    def validate(self) -> None:
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ConfigError(f"split ratios must be 3 non-negative numbers, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {sum(self.ratios)}")


def fill_gaps(panel: ZtdPanel) -> ZtdPanel:
    """Fill missing delay entries; observed entries are never altered.

    Interior gaps are linearly interpolated in time per station; gaps at the
    series boundary take the nearest observed value. Stations with no
    observations at all are reconstructed per time step by inverse-distance
    weighting of the 4 nearest stations that do have observations.
    """
    mask = panel.mask
    if not mask.any():
        raise AllMissing("panel has no observed values")
    n_t, n_s = panel.values.shape
    filled = panel.values.copy()
    t = np.arange(n_t, dtype=np.float64)
    has_obs = mask.any(axis=0)
    for s in np.nonzero(has_obs)[0]:
        obs = np.nonzero(mask[:, s])[0]
        if len(obs) < n_t:
            # np.interp clamps to edge values, which is the wanted boundary rule
            filled[:, s] = np.interp(t, t[obs], panel.values[obs, s])
    for s in np.nonzero(~has_obs)[0]:
        donors = np.nonzero(has_obs)[0]
        d = geo.haversine_km(
            panel.stations.lats[s], panel.stations.lons[s],
            panel.stations.lats[donors], panel.stations.lons[donors],
        )
        order = np.argsort(d, kind="stable")[:_IDW_NEIGHBORS]
        nb, nd = donors[order], d[order]
        if nd[0] == 0.0:
            filled[:, s] = filled[:, nb[0]]
        else:
            w = 1.0 / nd
            filled[:, s] = filled[:, nb] @ (w / w.sum())
    return ZtdPanel(panel.axis, panel.stations, filled, np.ones_like(mask))


def gap_report(panel: ZtdPanel) -> dict:
    """Per-station counts of entries a fill_gaps call would synthesize."""
    missing = (~panel.mask).sum(axis=0)
    has_obs = panel.mask.any(axis=0)
    per_station = {}
    for i, sid in enumerate(panel.stations.ids):
        per_station[sid] = {
            "missing": int(missing[i]),
            "observed": int(panel.axis.count - missing[i]),
            "method": "temporal_interpolation" if has_obs[i] else "inverse_distance_weighting",
        }
    return {
        "n_stations": len(panel.stations),
        "n_steps": panel.axis.count,
        "total_cells": int(panel.mask.size),
        "missing_cells": int(missing.sum()),
        "stations_fully_missing": [
            sid for sid, ok in zip(panel.stations.ids, has_obs) if not ok
        ],
        "stations": per_station,
    }


def resample_time(cube: WindCube, target_step: int) -> WindCube:
    """Linear temporal interpolation onto a grid with spacing ``target_step``.

    The output grid is anchored at the source start and covers the source
    span. Each (level, station, component) series is interpolated through its
    observed points only; series without any observation stay fully masked.
    """
    if target_step <= 0:
        raise ConfigError("target_step must be positive")
    axis = cube.axis
    count = (axis.end - axis.start) // int(target_step) + 1
    if count < 1:
        raise EmptyOverlap("no target timestamp inside the source span")
    new_axis = TimeAxis(axis.start, int(target_step), count)
    src_t = axis.timestamps().astype(np.float64)
    dst_t = new_axis.timestamps().astype(np.float64)
    n_l, n_s = len(cube.levels), len(cube.stations)
    values = np.full((count, n_l, n_s, 3), np.nan)
    mask = np.zeros(values.shape, dtype=bool)
    for l in range(n_l):
        for s in range(n_s):
            for c in range(3):
                obs = cube.mask[:, l, s, c]
                if not obs.any():
                    continue
                values[:, l, s, c] = np.interp(dst_t, src_t[obs], cube.values[obs, l, s, c])
                mask[:, l, s, c] = True
    return WindCube(new_axis, cube.levels, cube.stations, values, mask)


def height_to_pressure(height_m, params: PressureMapParams = PressureMapParams()):
    """Map height above the surface to pressure via p0 * exp(-h / h_scale)."""
    return params.p0_hpa * np.exp(-np.asarray(height_m, dtype=np.float64) / params.h_scale_m)


def interpolate_to_pressure_levels(
    cube: WindCube,
    target_levels: LevelSpec,
    params: PressureMapParams = PressureMapParams(),
) -> WindCube:
    """Re-grid a height-level cube onto pressure levels.

    Source heights are mapped to pressures with :func:`height_to_pressure`;
    interpolation is linear in log-pressure. Targets outside the source range
    take the nearest source level. A target entry is observed only when every
    source level it draws from is observed.
    """
    if cube.levels.kind != HEIGHT_M:
        raise ConfigError(f"source cube must be on height levels, got {cube.levels.kind}")
    if not isinstance(target_levels, LevelSpec):
        target_levels = LevelSpec(PRESSURE_HPA, tuple(float(p) for p in target_levels))
    if target_levels.kind != PRESSURE_HPA:
        raise ConfigError(f"target levels must be pressures, got {target_levels.kind}")
    src_p = height_to_pressure(np.array(cube.levels.values), params)
    # heights ascend, so log-pressure descends; flip to ascending for interp
    x_src = np.log(src_p)[::-1]
    v_src = cube.values[:, ::-1]
    m_src = cube.mask[:, ::-1]
    n_src = len(cube.levels)
    n_t, _, n_s, _ = cube.values.shape
    values = np.empty((n_t, len(target_levels), n_s, 3))
    mask = np.empty(values.shape, dtype=bool)
    for j, p_tgt in enumerate(target_levels.values):
        x = np.log(p_tgt)
        if x <= x_src[0]:
            i0 = i1 = 0
            w = 0.0
        elif x >= x_src[-1]:
            i0 = i1 = n_src - 1
            w = 0.0
        else:
            i1 = int(np.searchsorted(x_src, x))
            i0 = i1 - 1
            w = (x - x_src[i0]) / (x_src[i1] - x_src[i0])
        values[:, j] = (1.0 - w) * v_src[:, i0] + w * v_src[:, i1]
        mask[:, j] = m_src[:, i0] & m_src[:, i1]
    return WindCube(cube.axis, target_levels, cube.stations, values, mask)


def decompose_wind(speed_ms, direction_deg):
    """Speed and meteorological direction (degrees the wind blows *from*,
    clockwise from north) -> eastward u and northward v components."""
    speed = np.asarray(speed_ms, dtype=np.float64)
    if np.any(speed < 0):
        raise NegativeSpeed("wind speed must be non-negative")
    rad = np.radians(np.asarray(direction_deg, dtype=np.float64))
    u = -speed * np.sin(rad)
    v = -speed * np.cos(rad)
    return u, v


def compose_wind(u_ms, v_ms):
    """(u, v) components -> speed and meteorological direction in [0, 360).

    Calm air (speed exactly 0) reports direction 0 by convention.
    """
    u = np.asarray(u_ms, dtype=np.float64)
    v = np.asarray(v_ms, dtype=np.float64)
    speed = np.hypot(u, v)
    direction = np.degrees(np.arctan2(-u, -v)) % 360.0
    direction = np.where(speed == 0.0, 0.0, direction)
    if direction.ndim == 0:
        return float(speed), float(direction)
    return speed, direction


def select_nearest_stations(table: StationTable, ref_lat: float, ref_lon: float, k: int) -> StationTable:
    """The k stations closest (great-circle) to a reference point, ordered by
    ascending distance; exact distance ties break by ascending station id."""
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if k > len(table):
        raise KTooLarge(f"k={k} exceeds the {len(table)} stations available")
    order = geo.nearest_station_order(table, ref_lat, ref_lon)
    return table.subset(order[:k])


def build_samples(
    ztd: ZtdPanel,
    wind: WindCube,
    window_steps: int,
    lead_steps: int,
    split: SplitConfig = SplitConfig(),
) -> SampleSet:
    """Assemble sliding-window samples: a window of delay rows ending at time
    t paired with the flattened wind field at t + lead_steps.

    Both inputs must sit on the same time grid (equal step, offsets congruent
    modulo the step). Windows or targets touching any unobserved entry are
    dropped. Normalization statistics come from the train split only.
    """
    if window_steps < 1:
        raise ConfigError("window_steps must be at least 1")
    if lead_steps < 1:
        raise ConfigError("lead_steps must be at least 1")
    split.validate()
    step = ztd.axis.step
    if wind.axis.step != step:
        raise Misaligned(f"time steps differ: delays {step}s, wind {wind.axis.step}s")
    if (wind.axis.start - ztd.axis.start) % step != 0:
        raise Misaligned("delay and wind axes are offset by a fraction of the step")

    window_ok = np.ones(ztd.axis.count, dtype=bool)  # window ending at i fully observed
    obs_row = ztd.mask.all(axis=1) & np.isfinite(ztd.values).all(axis=1)
    for off in range(window_steps):
        shifted = np.zeros_like(window_ok)
        shifted[off:] = obs_row[: ztd.axis.count - off] if off else obs_row
        window_ok &= shifted
    window_ok[: window_steps - 1] = False

    target_ok = wind.mask.reshape(wind.axis.count, -1).all(axis=1)
    target_ok &= np.isfinite(wind.values.reshape(wind.axis.count, -1)).all(axis=1)

    ends, times = [], []
    for i in np.nonzero(window_ok)[0]:
        tt = ztd.axis.time_at(int(i)) + lead_steps * step
        if wind.axis.covers(tt) and target_ok[wind.axis.index_of(tt)]:
            ends.append(int(i))
            times.append(tt)
    if not ends:
        raise NoSamples("no (window, target) pair satisfies the alignment constraints")

    n = len(ends)
    inputs = np.stack([ztd.values[i - window_steps + 1 : i + 1] for i in ends])
    targets = np.stack([wind.values[wind.axis.index_of(t)].reshape(-1) for t in times])

    labels = _assign_splits(n, split)
    train = labels == 0
    if train.any():
        tr_in = inputs[train]
        tr_tg = targets[train]
        stats = NormStats(
            input_mean=tr_in.mean(axis=(0, 1)),
            input_std=tr_in.std(axis=(0, 1)),
            target_mean=tr_tg.mean(axis=0),
            target_std=tr_tg.std(axis=0),
        )
    else:
        stats = None

    return SampleSet(
        inputs=inputs,
        targets=targets,
        window_steps=window_steps,
        lead_steps=lead_steps,
        step_seconds=step,
        target_times=np.array(times, dtype=np.int64),
        split_labels=labels,
        levels=wind.levels,
        target_stations=wind.stations,
        input_stations=ztd.stations,
        norm_stats=stats,
    )


def _assign_splits(n: int, split: SplitConfig) -> np.ndarray:
    """Largest-remainder quota split of a seeded shuffle; each split size is
    within one sample of its exact proportion."""
    quotas = np.array(split.ratios, dtype=np.float64) * n
    sizes = np.floor(quotas).astype(int)
    frac_order = np.argsort(-(quotas - sizes), kind="stable")
    for j in range(n - sizes.sum()):
        sizes[frac_order[j % 3]] += 1
    rng = np.random.default_rng(split.seed)
    perm = rng.permutation(n)
    labels = np.empty(n, dtype=np.uint8)
    pos = 0
    for code, size in enumerate(sizes):
        labels[perm[pos : pos + size]] = code
        pos += size
    return labels
