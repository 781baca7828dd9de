"""Experiment orchestration: config handling, seeded end-to-end runs,
lead sweeps, station-count ablations, gridded-baseline comparison, and
plot-ready table emission.

Every run writes a ``manifest.json`` recording the full configuration, its
hash, library versions and input digests; identical configurations produce
byte-identical artifacts. Randomness is derived per (base seed, lead,
purpose) so that runs sharing a lead share their split, initialization and
batch order regardless of which entry point launched them.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__, fileio, geo
from .core import (
    COMPONENTS,
    LevelSpec,
    StationTable,
    TimeAxis,
    WindCube,
    WindSeries,
    ZtdPanel,
    format_iso8601,
    parse_iso8601,
)
from .errors import ConfigError, DataError, KTooLarge, Misaligned, NoTemporalOverlap
from .metrics import MetricReport, evaluate_series, write_mosaic_tables, write_report
from .model import ModelConfig, WindModel, predict_denormalized, save_model
from .postprocess import apply_cdf_map, fit_cdf_map, write_cdf_map
from .preprocess import SplitConfig, build_samples, fill_gaps
from .synthgen import SynthConfig, generate
from .trainer import TrainConfig, train, write_history

DEFAULT_CONFIG = {
    "seed": 20250807,
    "data": {"kind": "synthetic"},
    "synth": {
        "seed": 20250601,
        "n_ztd_stations": 60,
        "n_wind_stations": 3,
        "n_levels": 3,
        "n_steps": 4000,
        "latent_dim": 8,
        "noise_std": 0.05,
        "missing_rate": 0.02,
        "lead_coupling_steps": 6,
        "step_seconds": 300,
        "linear_gain": 1.0,
        "tanh_gain": 0.35,
        "center_lat": 29.36,
        "center_lon": 120.07,
        "start_epoch": 1746595800,
    },
    "window_steps": 6,
    "leads_minutes": [5, 10, 15, 20, 25, 30],
    "ablation_lead_minutes": 30,
    "station_counts": [5, 10, 20, 60],
    "reference": {"lat": 29.3619, "lon": 120.0717},
    "split": {"ratios": [0.7, 0.15, 0.15]},
    "model": {"arch": "transformer", "n_encoder_blocks": 2, "heads": 4},
    "train": {
        "lr": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "max_epochs": 120,
        "patience": 30,
        "batch_size": 128,
    },
    "postprocess": {"mode": "gaussian_affine", "n_quantiles": 101},
    "time_start": None,
    "time_end": None,
}

_SEED_SPLIT, _SEED_INIT, _SEED_TRAIN = 1, 2, 3


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins, nested dicts merge key-wise."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(text: str) -> dict:
    """'a.b=value' -> nested dict; values parse as JSON, else stay strings."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = value
    for part in reversed(key.split(".")):
        if not part:
            raise ConfigError(f"bad override key {key!r}")
        out = {part: out}
    return out


def _expect_keys(d: dict, allowed, where: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown config keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated view over the experiment config dict."""

    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = merge_config(DEFAULT_CONFIG, d)
        _expect_keys(d, DEFAULT_CONFIG, "config")
        _expect_keys(d["synth"], DEFAULT_CONFIG["synth"], "synth")
        _expect_keys(d["train"], DEFAULT_CONFIG["train"], "train")
        _expect_keys(d["model"], DEFAULT_CONFIG["model"], "model")
        _expect_keys(d["reference"], DEFAULT_CONFIG["reference"], "reference")
        _expect_keys(d["split"], DEFAULT_CONFIG["split"], "split")
        _expect_keys(d["postprocess"], DEFAULT_CONFIG["postprocess"], "postprocess")
        if d["data"].get("kind") not in ("synthetic", "files"):
            raise ConfigError("data.kind must be 'synthetic' or 'files'")
        if d["data"]["kind"] == "files":
            _expect_keys(d["data"], ("kind", "ztd_stations", "ztd", "wind_stations", "wind"),
                         "data")
        cfg = cls(raw=d)
        cfg.synth_config()  # validates
        cfg.train_config(seed=0)
        if not d["leads_minutes"]:
            raise ConfigError("leads_minutes must not be empty")
        if d["window_steps"] < 1:
            raise ConfigError("window_steps must be at least 1")
        return cfg

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def window_steps(self) -> int:
        return int(self.raw["window_steps"])

    @property
    def leads_minutes(self) -> list:
        return [float(x) for x in self.raw["leads_minutes"]]

    @property
    def station_counts(self) -> list:
        return [int(k) for k in self.raw["station_counts"]]

    @property
    def ablation_lead_minutes(self) -> float:
        return float(self.raw["ablation_lead_minutes"])

    @property
    def reference(self) -> tuple:
        return (float(self.raw["reference"]["lat"]), float(self.raw["reference"]["lon"]))

    def synth_config(self) -> SynthConfig:
        cfg = SynthConfig(**self.raw["synth"])
        cfg.validate()
        return cfg

    def train_config(self, seed: int) -> TrainConfig:
        cfg = TrainConfig(seed=seed, **self.raw["train"])
        cfg.validate()
        return cfg

    def model_config(self, n_stations: int, output_dim: int) -> ModelConfig:
        cfg = ModelConfig(
            arch=self.raw["model"]["arch"],
            window_steps=self.window_steps,
            n_stations=n_stations,
            output_dim=output_dim,
            n_encoder_blocks=int(self.raw["model"]["n_encoder_blocks"]),
            heads=int(self.raw["model"]["heads"]),
        )
        cfg.validate()
        return cfg

    def split_config(self, seed: int) -> SplitConfig:
        cfg = SplitConfig(ratios=tuple(self.raw["split"]["ratios"]), seed=seed)
        cfg.validate()
        return cfg


def derive_seed(base: int, *key: int) -> int:
    """Stable per-purpose seed derivation from a base seed and integer keys."""
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def lead_steps_for(cfg: ExperimentConfig, lead_minutes: float, step_seconds: int) -> int:
    lead_s = lead_minutes * 60.0
    steps = int(round(lead_s / step_seconds))
    if steps < 1 or abs(steps * step_seconds - lead_s) > 1e-9:
        raise ConfigError(
            f"lead of {lead_minutes} min is not a positive multiple of the {step_seconds}s step"
        )
    return steps


def load_raw_scene(cfg: ExperimentConfig):
    """Generate or read the (panel, cube) pair, time-sliced but unfilled."""
    data = cfg.raw["data"]
    if data["kind"] == "synthetic":
        _, panel, cube, _ = generate(cfg.synth_config())
    else:
        zst = fileio.read_station_csv(data["ztd_stations"])
        wst = fileio.read_station_csv(data["wind_stations"])
        panel = fileio.read_ztd_csv(data["ztd"], zst)
        cube = fileio.read_wind_csv(data["wind"], wst)
    t0, t1 = cfg.raw.get("time_start"), cfg.raw.get("time_end")
    if t0 is not None or t1 is not None:
        panel = _slice_panel(panel, t0, t1)
        cube = _slice_cube(cube, t0, t1)
    return panel, cube


def finish_scene(panel: ZtdPanel, cube: WindCube, cfg: ExperimentConfig):
    """Fill delay gaps and order delay stations by ascending distance from
    the reference point (ties by id).

    The canonical ordering makes 'first k stations' of every run agree with
    :func:`gwindcast.preprocess.select_nearest_stations`.
    """
    panel = fill_gaps(panel)
    ref_lat, ref_lon = cfg.reference
    order = geo.nearest_station_order(panel.stations, ref_lat, ref_lon)
    return panel.select_stations(order), cube


def prepare_scene(cfg: ExperimentConfig):
    """load_raw_scene followed by finish_scene."""
    panel, cube = load_raw_scene(cfg)
    return finish_scene(panel, cube, cfg)


def _time_window_indices(axis: TimeAxis, t0, t1):
    ts = axis.timestamps()
    lo = 0 if t0 is None else int(np.searchsorted(ts, parse_iso8601(t0), side="left"))
    hi = axis.count if t1 is None else int(np.searchsorted(ts, parse_iso8601(t1), side="right"))
    if hi <= lo:
        raise DataError("time window leaves no samples")
    return lo, hi


def _slice_panel(panel: ZtdPanel, t0, t1) -> ZtdPanel:
    lo, hi = _time_window_indices(panel.axis, t0, t1)
    return panel.slice_time(lo, hi)


def _slice_cube(cube: WindCube, t0, t1) -> WindCube:
    lo, hi = _time_window_indices(cube.axis, t0, t1)
    return cube.slice_time(lo, hi)


# --------------------------------------------------------- single run ----


def build_run_samples(panel: ZtdPanel, cube: WindCube, cfg: ExperimentConfig, lead_steps: int):
    split = cfg.split_config(seed=derive_seed(cfg.seed, lead_steps, _SEED_SPLIT))
    return build_samples(panel, cube, cfg.window_steps, lead_steps, split)


def train_run_model(samples, cfg: ExperimentConfig, lead_steps: int):
    mcfg = cfg.model_config(
        n_stations=samples.inputs.shape[2], output_dim=samples.output_dim
    )
    model = WindModel(mcfg, seed=derive_seed(cfg.seed, lead_steps, _SEED_INIT))
    tcfg = cfg.train_config(seed=derive_seed(cfg.seed, lead_steps, _SEED_TRAIN))
    result = train(model, samples, tcfg)
    return model, result


def calibrated_predictions(model, samples, cfg: ExperimentConfig, cdf=None):
    """Test-split predictions pushed through the calibration map.

    Returns (cdf_map, calibrated WindSeries, truth WindSeries)."""
    if cdf is None:
        cdf = fit_cdf_map(
            model,
            samples,
            mode=cfg.raw["postprocess"]["mode"],
            n_quantiles=int(cfg.raw["postprocess"]["n_quantiles"]),
        )
    pred = predict_denormalized(model, samples, "test")
    flat = pred.values.reshape(pred.values.shape[0], -1)
    cal = apply_cdf_map(cdf, flat).reshape(pred.values.shape)
    pred_cal = WindSeries(pred.times, pred.levels, pred.stations, cal, pred.mask)
    te = samples.indices("test")
    order = np.argsort(samples.target_times[te], kind="stable")
    te = te[order]
    truth_values = samples.targets[te].reshape(pred.values.shape)
    truth = WindSeries(pred.times, pred.levels, pred.stations, truth_values,
                       np.ones(truth_values.shape, dtype=bool))
    return cdf, pred_cal, truth


def mean_predictor_report(samples, lead_minutes: float, eval_station: int | None = None) -> MetricReport:
    """Score the constant per-channel train-mean prediction on the test split."""
    tr = samples.indices("train")
    te = samples.indices("test")
    order = np.argsort(samples.target_times[te], kind="stable")
    te = te[order]
    mean = samples.targets[tr].mean(axis=0)
    n_l, n_s = len(samples.levels), len(samples.target_stations)
    shape = (len(te), n_l, n_s, 3)
    pred = WindSeries(
        times=samples.target_times[te],
        levels=samples.levels,
        stations=samples.target_stations,
        values=np.broadcast_to(mean.reshape(1, n_l, n_s, 3), shape).copy(),
        mask=np.ones(shape, dtype=bool),
    )
    truth = WindSeries(
        times=samples.target_times[te],
        levels=samples.levels,
        stations=samples.target_stations,
        values=samples.targets[te].reshape(shape),
        mask=np.ones(shape, dtype=bool),
    )
    if eval_station is not None:
        pred = pred.select_stations([eval_station])
        truth = truth.select_stations([eval_station])
    return evaluate_series(pred, truth, lead_minutes)


def run_single_lead(
    panel: ZtdPanel,
    cube: WindCube,
    cfg: ExperimentConfig,
    lead_minutes: float,
    out_dir,
    eval_station: int | None = None,
):
    """Train, calibrate, predict and evaluate one lead; write run artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    lead_steps = lead_steps_for(cfg, lead_minutes, panel.axis.step)
    samples = build_run_samples(panel, cube, cfg, lead_steps)
    model, result = train_run_model(samples, cfg, lead_steps)
    cdf, pred_cal, truth = calibrated_predictions(model, samples, cfg)
    if eval_station is not None:
        pred_eval = pred_cal.select_stations([eval_station])
        truth_eval = truth.select_stations([eval_station])
    else:
        pred_eval, truth_eval = pred_cal, truth
    report = evaluate_series(pred_eval, truth_eval, lead_minutes)
    baseline = mean_predictor_report(samples, lead_minutes, eval_station)

    save_model(os.path.join(out_dir, "checkpoint.gwc"), model)
    write_history(os.path.join(out_dir, "history.csv"), result.history)
    write_cdf_map(os.path.join(out_dir, "cdf_map.json"), cdf)
    fileio.write_series(os.path.join(out_dir, "predictions.gwcs"), pred_cal)
    fileio.write_series(os.path.join(out_dir, "truth.gwcs"), truth)
    write_report(os.path.join(out_dir, "report.json"), report)
    write_report(os.path.join(out_dir, "baseline_mean_report.json"), baseline)
    return report


def _lead_dir_name(lead_minutes: float) -> str:
    return f"lead_{format(lead_minutes, 'g')}min"


def run_lead_sweep(cfg: ExperimentConfig, out_dir) -> dict:
    """Full sweep over ``leads_minutes``; writes per-lead artifacts, the
    (level x lead) mosaic tables, and the run manifest."""
    os.makedirs(out_dir, exist_ok=True)
    panel, cube = prepare_scene(cfg)
    reports = {}
    for lead in cfg.leads_minutes:
        reports[lead] = run_single_lead(
            panel, cube, cfg, lead, os.path.join(out_dir, _lead_dir_name(lead))
        )
    write_mosaic_tables(out_dir, reports)
    for lead, report in reports.items():
        write_report(os.path.join(out_dir, f"report_{_lead_dir_name(lead)}.json"), report)
    write_manifest(out_dir, cfg, panel, cube)
    return reports


def reference_wind_station(cube: WindCube, cfg: ExperimentConfig) -> int:
    ref_lat, ref_lon = cfg.reference
    return geo.nearest_station_order(cube.stations, ref_lat, ref_lon)[0]


def run_station_ablation(cfg: ExperimentConfig, out_dir) -> dict:
    """Retrain with the k nearest delay stations for each configured k and
    evaluate at the wind station nearest the reference point."""
    os.makedirs(out_dir, exist_ok=True)
    panel, cube = prepare_scene(cfg)
    counts = cfg.station_counts
    if len(set(counts)) != len(counts) or counts != sorted(counts):
        raise ConfigError("station_counts must be strictly ascending")
    if counts and counts[-1] > len(panel.stations):
        raise KTooLarge(
            f"station count {counts[-1]} exceeds the {len(panel.stations)} stations available"
        )
    if any(k < 1 for k in counts):
        raise ConfigError("station counts must be at least 1")
    ref_idx = reference_wind_station(cube, cfg)
    reports = {}
    for k in counts:
        sub = panel.select_stations(range(k))
        reports[k] = run_single_lead(
            sub, cube, cfg, cfg.ablation_lead_minutes,
            os.path.join(out_dir, f"k_{k}"), eval_station=ref_idx,
        )
    _write_ablation_tables(out_dir, reports)
    for k, report in reports.items():
        write_report(os.path.join(out_dir, f"report_k{k}.json"), report)
    write_manifest(out_dir, cfg, panel, cube)
    return reports


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _write_ablation_tables(out_dir, reports: dict) -> None:
    lines = ["stations,component,metric,value"]
    radar = ["stations,component,rmse_over_10,mae_over_10,rmspe,one_minus_r"]
    for k in sorted(reports):
        for comp in COMPONENTS:
            row = reports[k].row("all", comp)
            for metric in ("rmse", "mae", "rmspe", "r"):
                lines.append(f"{k},{comp},{metric},{_fmt(getattr(row, metric))}")
            radar.append(
                f"{k},{comp},{_fmt(row.rmse / 10.0)},{_fmt(row.mae / 10.0)},"
                f"{_fmt(row.rmspe)},{_fmt(1.0 - row.r)}"
            )
    with open(os.path.join(out_dir, "ablation_metrics.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "ablation_radar.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(radar) + "\n")


def write_manifest(out_dir, cfg: ExperimentConfig, panel: ZtdPanel, cube: WindCube) -> None:
    manifest = {
        "config": cfg.raw,
        "config_sha256": fileio.sha256_of_bytes(fileio.canonical_json(cfg.raw).encode()),
        "seed": cfg.seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "inputs": {
            "panel_sha256": fileio.sha256_of_bytes(fileio.panel_to_bytes(panel)),
            "cube_sha256": fileio.sha256_of_bytes(fileio.cube_to_bytes(cube)),
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(fileio.canonical_json(manifest))
        f.write("\n")


# ------------------------------------------------- gridded baseline ----


@dataclass(frozen=True)
class GriddedBaseline:
    """A regular lat/lon/level/time wind grid, e.g. extracted reanalysis.

    values has shape (time, level, lat, lon, 3) with components (u, v, w).
    """

    times: np.ndarray
    levels: LevelSpec
    lats: np.ndarray
    lons: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.int64))
        object.__setattr__(self, "lats", np.asarray(self.lats, dtype=np.float64))
        object.__setattr__(self, "lons", np.asarray(self.lons, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


def read_baseline_csv(path) -> GriddedBaseline:
    """Delimited grid: ``timestamp,lat,lon,level,u_ms,v_ms,w_ms`` preceded by
    a ``# level_kind=...`` metadata line; every grid combination must appear."""
    from .core import LEVEL_KINDS

    rows = []
    kind = "pressure_hPa"
    with open(path, "r", encoding="utf-8") as f:
        line = f.readline().strip()
        if line.startswith("#"):
            key, _, val = line.lstrip("# ").partition("=")
            if key.strip() != "level_kind" or val.strip() not in LEVEL_KINDS:
                raise DataError(f"unexpected baseline metadata line: {line!r}")
            kind = val.strip()
            line = f.readline().strip()
        if line != "timestamp,lat,lon,level,u_ms,v_ms,w_ms":
            raise DataError(f"unexpected baseline header: {line!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            ts, la, lo, lev, u, v, w = line.split(",")
            rows.append((parse_iso8601(ts), float(la), float(lo), float(lev),
                         float(u), float(v), float(w)))
    if not rows:
        raise DataError("baseline file contains no data rows")
    times = sorted({r[0] for r in rows})
    lats = sorted({r[1] for r in rows})
    lons = sorted({r[2] for r in rows})
    levs = sorted({r[3] for r in rows}, reverse=(kind == "pressure_hPa"))
    shape = (len(times), len(levs), len(lats), len(lons))
    if len(rows) != int(np.prod(shape)):
        raise DataError(f"baseline grid incomplete: {len(rows)} rows for shape {shape}")
    t_i = {t: i for i, t in enumerate(times)}
    la_i = {v: i for i, v in enumerate(lats)}
    lo_i = {v: i for i, v in enumerate(lons)}
    le_i = {v: i for i, v in enumerate(levs)}
    values = np.empty(shape + (3,))
    for ts, la, lo, lev, u, v, w in rows:
        values[t_i[ts], le_i[lev], la_i[la], lo_i[lo]] = (u, v, w)
    return GriddedBaseline(
        times=np.array(times, dtype=np.int64),
        levels=LevelSpec(kind, tuple(levs)),
        lats=np.array(lats),
        lons=np.array(lons),
        values=values,
    )


def compare_gridded_baseline(baseline: GriddedBaseline, truth: WindCube) -> MetricReport:
    """Score nearest-neighbor baseline extraction against observed winds.

    For each truth station the closest grid point (great-circle), for each
    truth time the closest baseline time (earlier wins ties; no temporal
    interpolation), and for each truth level the closest baseline level are
    taken. Only time steps with a fully observed truth enter the score,
    reported with lead label 0.
    """
    if baseline.levels.kind != truth.levels.kind:
        raise Misaligned(
            f"level kinds differ: baseline {baseline.levels.kind}, truth {truth.levels.kind}"
        )
    t_truth = truth.axis.timestamps()
    if t_truth[-1] < baseline.times[0] or t_truth[0] > baseline.times[-1]:
        raise NoTemporalOverlap("baseline and truth time ranges do not intersect")

    # nearest baseline time per truth time; ties -> earlier baseline time
    pos = np.searchsorted(baseline.times, t_truth)
    pos_lo = np.clip(pos - 1, 0, len(baseline.times) - 1)
    pos_hi = np.clip(pos, 0, len(baseline.times) - 1)
    d_lo = np.abs(t_truth - baseline.times[pos_lo])
    d_hi = np.abs(baseline.times[pos_hi] - t_truth)
    t_idx = np.where(d_lo <= d_hi, pos_lo, pos_hi)

    lev_idx = [
        int(np.argmin(np.abs(np.array(baseline.levels.values) - lv)))
        for lv in truth.levels.values
    ]
    grid_lat, grid_lon = np.meshgrid(baseline.lats, baseline.lons, indexing="ij")
    st_idx = []
    for la, lo in zip(truth.stations.lats, truth.stations.lons):
        d = geo.haversine_km(la, lo, grid_lat.ravel(), grid_lon.ravel())
        st_idx.append(int(np.argmin(d)))
    ii = [i // len(baseline.lons) for i in st_idx]
    jj = [i % len(baseline.lons) for i in st_idx]

    matched = baseline.values[t_idx][:, lev_idx][:, :, ii, jj]
    # fancy-indexing the paired (lat, lon) lists puts stations on one axis
    rows_ok = truth.mask.reshape(truth.axis.count, -1).all(axis=1)
    if not rows_ok.any():
        raise DataError("truth cube has no fully observed time steps")
    times = t_truth[rows_ok]
    pred = WindSeries(
        times=times,
        levels=truth.levels,
        stations=truth.stations,
        values=matched[rows_ok],
        mask=np.ones(matched[rows_ok].shape, dtype=bool),
    )
    truth_series = WindSeries(
        times=times,
        levels=truth.levels,
        stations=truth.stations,
        values=truth.values[rows_ok],
        mask=truth.mask[rows_ok],
    )
    return evaluate_series(pred, truth_series, lead_minutes=0.0)


# ------------------------------------------------------- time series ----


def emit_timeseries(pred: WindSeries, truth: WindSeries, out_dir) -> list:
    """Write plot-ready per-(level, component) station-mean series.

    Files ``timeseries_{level}_{component}.csv`` with columns
    ``timestamp,pred,truth``; one row per target time.
    """
    if not np.array_equal(pred.times, truth.times):
        raise Misaligned("prediction and truth target times differ")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for l, lab in enumerate(pred.levels.labels()):
        safe = lab.replace(".", "p").replace("-", "m")
        for c, comp in enumerate(COMPONENTS):
            p_mean = pred.values[:, l, :, c].mean(axis=1)
            t_mean = truth.values[:, l, :, c].mean(axis=1)
            path = os.path.join(out_dir, f"timeseries_{safe}_{comp}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write("timestamp,pred,truth\n")
                for ts, pv, tv in zip(pred.times, p_mean, t_mean):
                    f.write(f"{format_iso8601(ts)},{_fmt(pv)},{_fmt(tv)}\n")
            paths.append(path)
    return paths
