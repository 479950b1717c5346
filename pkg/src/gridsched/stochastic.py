"""Exogenous random processes: seasonal factor, day-ahead forecasts, hourly
biased random walks, and topology sampling for proxy training."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import Topology

DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
_MONTH_START = np.cumsum((0,) + DAYS_IN_MONTH[:-1]) + 1


def month_of_day(day_of_year):
    """Calendar month (1..12) of a day-of-year in a 365-day year."""
    if not 1 <= day_of_year <= 365:
        raise ValidationError(f"day_of_year {day_of_year} outside 1..365")
    return int(np.searchsorted(_MONTH_START, day_of_year, side="right"))


@dataclass(frozen=True)
class SeasonalFactor:
    """Monthly weather intensity for wind and demand (both dimensionless)."""

    wind_level: float
    load_level: float


@dataclass(frozen=True)
class DayAheadForecast:
    wind: np.ndarray  # n_wind x H, MW
    load: np.ndarray  # n_bus x H, MW

    @property
    def hours(self):
        return self.wind.shape[1]


@dataclass(frozen=True)
class HourlyRealization:
    wind: np.ndarray
    load: np.ndarray
    wind_delta: np.ndarray
    load_delta: np.ndarray


@dataclass
class ProcessParams:
    """Parameters of every stochastic process, with the published defaults."""

    monthly_wind_profile: np.ndarray
    monthly_load_profile: np.ndarray
    daily_wind_profile_MW: np.ndarray  # n_wind x H
    daily_load_profile_MW: np.ndarray  # n_bus x H
    p_w_sigma: float = 0.15
    p_d_sigma: float = 0.02
    wind_walk_noise_frac: float = 0.005
    load_walk_noise_frac: float = 0.001
    seasonal_ar_coeff: float = 0.5
    seasonal_noise_sd: float = 0.05
    forced_outage_rate: float = 0.0  # per line per hour; no published rate

    def __post_init__(self):
        self.monthly_wind_profile = np.asarray(self.monthly_wind_profile, dtype=float)
        self.monthly_load_profile = np.asarray(self.monthly_load_profile, dtype=float)
        self.daily_wind_profile_MW = np.atleast_2d(np.asarray(self.daily_wind_profile_MW, dtype=float))
        self.daily_load_profile_MW = np.atleast_2d(np.asarray(self.daily_load_profile_MW, dtype=float))

    @property
    def hours_per_day(self):
        return self.daily_load_profile_MW.shape[1]

    def to_dict(self):
        return {
            "monthly_wind_profile": self.monthly_wind_profile.tolist(),
            "monthly_load_profile": self.monthly_load_profile.tolist(),
            "daily_wind_profile_MW": self.daily_wind_profile_MW.tolist(),
            "daily_load_profile_MW": self.daily_load_profile_MW.tolist(),
            "p_w_sigma": self.p_w_sigma,
            "p_d_sigma": self.p_d_sigma,
            "wind_walk_noise_frac": self.wind_walk_noise_frac,
            "load_walk_noise_frac": self.load_walk_noise_frac,
            "seasonal_ar_coeff": self.seasonal_ar_coeff,
            "seasonal_noise_sd": self.seasonal_noise_sd,
            "forced_outage_rate": self.forced_outage_rate,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)

    def validate(self, case=None):
        for nm in ("p_w_sigma", "p_d_sigma", "wind_walk_noise_frac", "load_walk_noise_frac",
                   "forced_outage_rate"):
            v = getattr(self, nm)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"process.{nm}: {v} outside [0, 1]")
        if not 0.0 <= self.seasonal_ar_coeff < 1.0:
            raise ValidationError("process.seasonal_ar_coeff: must be in [0, 1)")
        if self.seasonal_noise_sd < 0:
            raise ValidationError("process.seasonal_noise_sd: negative")
        for nm in ("monthly_wind_profile", "monthly_load_profile"):
            prof = getattr(self, nm)
            if prof.shape != (12,):
                raise ValidationError(f"process.{nm}: needs exactly 12 entries")
            if np.any(prof < 0) or np.any(prof > 1):
                raise ValidationError(f"process.{nm}: entries must lie in [0, 1]")
        if self.daily_wind_profile_MW.shape[1] != self.daily_load_profile_MW.shape[1]:
            raise ValidationError("process: daily wind/load profiles disagree on hours per day")
        if case is not None:
            if self.daily_wind_profile_MW.shape[0] != case.n_wind:
                raise ValidationError("process.daily_wind_profile_MW: row count != wind generators")
            if self.daily_load_profile_MW.shape[0] != case.n_buses:
                raise ValidationError("process.daily_load_profile_MW: row count != buses")
        return self


def load_profile_csv(path):
    """Profile table: one row per element id, then hour or month columns."""
    ids, rows = [], []
    with open(path) as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    return ids, np.array(rows)


def default_process_params(case, profile_dir, tag):
    """Assemble ProcessParams from the bundled profile CSVs for a case."""
    profile_dir = Path(profile_dir)
    _, mload = load_profile_csv(profile_dir / f"{tag}_monthly_load.csv")
    _, mwind = load_profile_csv(profile_dir / f"{tag}_monthly_wind.csv")
    lids, dload = load_profile_csv(profile_dir / f"{tag}_daily_load.csv")
    wids, dwind = load_profile_csv(profile_dir / f"{tag}_daily_wind.csv")
    order_l = [lids.index(str(b.id)) for b in case.buses]
    order_w = [wids.index(str(w.id)) for w in case.wind_generators]
    return ProcessParams(
        monthly_wind_profile=mwind[0],
        monthly_load_profile=mload[0],
        daily_wind_profile_MW=dwind[order_w] if len(order_w) else np.zeros((0, dload.shape[1])),
        daily_load_profile_MW=dload[order_l],
    ).validate(case)


def seasonal_step(prev, month, params, rng):
    """AR(1) draw around the monthly profile, truncated at zero.

    The previous factor's deviation from its own month's profile decays by
    the AR coefficient; month wraps 1 -> 12 for the predecessor.
    """
    if not 1 <= month <= 12:
        raise ValidationError(f"month {month} outside 1..12")
    prev_month = 12 if month == 1 else month - 1
    out = []
    for prof, level in (
        (params.monthly_wind_profile, prev.wind_level),
        (params.monthly_load_profile, prev.load_level),
    ):
        dev = level - prof[prev_month - 1]
        noise = params.seasonal_noise_sd * rng.standard_normal()
        out.append(max(0.0, prof[month - 1] + params.seasonal_ar_coeff * dev + noise))
    return SeasonalFactor(wind_level=out[0], load_level=out[1])


def initial_seasonal(params):
    """Chain start: December profile with zero deviation."""
    return SeasonalFactor(params.monthly_wind_profile[11], params.monthly_load_profile[11])


def sample_day_ahead(case, day_of_year, J, params, rng):
    """Day-ahead forecast draw.

    Entry means are the daily profile scaled by the realized seasonal level
    (whose expectation is the monthly profile, so the mean of the compound
    draw is the daily-times-monthly profile product).  Standard deviation is
    the fixed fraction of the mean; draws are clamped into physical range,
    wind generators mutually uncorrelated.
    """
    month_of_day(day_of_year)  # range check
    cap = case.wind_capacities[:, None]
    mu_w = params.daily_wind_profile_MW * J.wind_level
    mu_d = params.daily_load_profile_MW * J.load_level
    wind = mu_w + params.p_w_sigma * mu_w * rng.standard_normal(mu_w.shape)
    load = mu_d + params.p_d_sigma * mu_d * rng.standard_normal(mu_d.shape)
    np.clip(wind, 0.0, cap, out=wind)
    np.clip(load, 0.0, None, out=load)
    return DayAheadForecast(wind=wind, load=load)


def step_hourly(forecast_value_MW, prev, params, bounds, rng, day_start_forecast_MW=None):
    """One step of the biased random walks for wind and load.

    value = forecast + delta, clamped to bounds; delta accumulates Gaussian
    noise whose variance is the noise fraction times the day's hour-zero
    forecast (per element).  ``bounds`` is a ((wind_lo, wind_hi),
    (load_lo, load_hi)) pair of per-element arrays.
    """
    f_wind, f_load = forecast_value_MW
    if day_start_forecast_MW is None:
        day_start_forecast_MW = forecast_value_MW
    ref_w, ref_d = day_start_forecast_MW
    (w_lo, w_hi), (d_lo, d_hi) = bounds

    var_w = params.wind_walk_noise_frac * np.asarray(ref_w)
    var_d = params.load_walk_noise_frac * np.asarray(ref_d)
    eps_w = np.sqrt(np.maximum(var_w, 0.0)) * rng.standard_normal(np.shape(f_wind))
    eps_d = np.sqrt(np.maximum(var_d, 0.0)) * rng.standard_normal(np.shape(f_load))
    wind_delta = prev.wind_delta + eps_w
    load_delta = prev.load_delta + eps_d
    wind = np.clip(f_wind + wind_delta, w_lo, w_hi)
    load = np.clip(f_load + load_delta, d_lo, d_hi)
    return HourlyRealization(wind=wind, load=load, wind_delta=wind_delta, load_delta=load_delta)


def realization_at(forecast_value_MW, bounds, delta=None):
    """Realization with an explicit delta (zero at a fresh walk start)."""
    f_wind, f_load = forecast_value_MW
    (w_lo, w_hi), (d_lo, d_hi) = bounds
    dw = np.zeros_like(np.asarray(f_wind, dtype=float)) if delta is None else delta[0]
    dd = np.zeros_like(np.asarray(f_load, dtype=float)) if delta is None else delta[1]
    return HourlyRealization(
        wind=np.clip(f_wind + dw, w_lo, w_hi),
        load=np.clip(f_load + dd, d_lo, d_hi),
        wind_delta=dw,
        load_delta=dd,
    )


def sample_training_topology(outage_lines, n_lines, rng):
    """Uniform draw over the 2^|L| outage subsets; other lines stay in service."""
    if not outage_lines:
        raise ValidationError("outage_lines: must not be empty")
    status = [True] * n_lines
    for pos in outage_lines:
        status[pos] = bool(rng.integers(0, 2) == 0)
    return Topology(tuple(status))
