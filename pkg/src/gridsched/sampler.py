"""Hierarchical window scenario sampling.

A scenario is drawn top-down: a monthly seasonal chain, then for each month
a handful of windows of consecutive days (day-ahead forecasts), then per day
a handful of windows of consecutive hours (realization walks).  Window
lengths interpolate between full sequential simulation and snapshot
sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleWindowError, ValidationError
from .stochastic import (
    DAYS_IN_MONTH,
    DayAheadForecast,
    HourlyRealization,
    SeasonalFactor,
    initial_seasonal,
    realization_at,
    sample_day_ahead,
    seasonal_step,
    step_hourly,
)


@dataclass(frozen=True)
class SamplerParams:
    w_s: int = 3     # days per short-term window
    n_s: int = 4     # windows per month
    w_rt: int = 24   # hours per real-time window
    n_rt: int = 2    # real-time windows per day
    months: int = 12

    def validate(self, hours_per_day=24):
        for nm in ("w_s", "n_s", "w_rt", "n_rt", "months"):
            if getattr(self, nm) < 1:
                raise ValidationError(f"sampler.{nm}: must be positive")
        if self.w_rt > hours_per_day:
            raise ValidationError(f"sampler.w_rt: {self.w_rt} exceeds hours per day {hours_per_day}")
        if self.months > 12:
            raise ValidationError("sampler.months: at most 12")
        return self


@dataclass
class HourWindow:
    start_hour: int
    realizations: list  # HourlyRealization per hour of the window


@dataclass
class DayWindow:
    start_day: int  # day-of-year of the window's first day
    forecasts: list  # DayAheadForecast per day
    hour_windows: list  # list (per day) of lists of HourWindow


@dataclass
class MonthSample:
    month: int
    seasonal: SeasonalFactor
    day_windows: list


@dataclass
class ScenarioSample:
    months: list = field(default_factory=list)

    def simulated_days(self):
        return sum(len(dw.forecasts) for ms in self.months for dw in ms.day_windows)

    def simulated_hours(self):
        return sum(
            len(hw.realizations)
            for ms in self.months
            for dw in ms.day_windows
            for per_day in dw.hour_windows
            for hw in per_day
        )

    def covered_days(self, month):
        """Set of day-of-year indices the sampler visits in a month."""
        out = set()
        for ms in self.months:
            if ms.month != month:
                continue
            for dw in ms.day_windows:
                out.update(range(dw.start_day, dw.start_day + len(dw.forecasts)))
        return out

    # -- replay / debugging dump ------------------------------------------

    def to_json(self):
        def arr(a):
            return np.asarray(a).tolist()

        doc = []
        for ms in self.months:
            doc.append({
                "month": ms.month,
                "seasonal": [ms.seasonal.wind_level, ms.seasonal.load_level],
                "day_windows": [
                    {
                        "start_day": dw.start_day,
                        "forecasts": [{"wind": arr(f.wind), "load": arr(f.load)} for f in dw.forecasts],
                        "hour_windows": [
                            [
                                {
                                    "start_hour": hw.start_hour,
                                    "wind": [arr(r.wind) for r in hw.realizations],
                                    "load": [arr(r.load) for r in hw.realizations],
                                    "wind_delta": [arr(r.wind_delta) for r in hw.realizations],
                                    "load_delta": [arr(r.load_delta) for r in hw.realizations],
                                }
                                for hw in per_day
                            ]
                            for per_day in dw.hour_windows
                        ],
                    }
                    for dw in ms.day_windows
                ],
            })
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        months = []
        for ms in doc:
            dws = []
            for dw in ms["day_windows"]:
                forecasts = [DayAheadForecast(np.array(f["wind"]), np.array(f["load"]))
                             for f in dw["forecasts"]]
                hour_windows = [
                    [
                        HourWindow(hw["start_hour"], [
                            HourlyRealization(np.array(w), np.array(l), np.array(dwnd), np.array(dld))
                            for w, l, dwnd, dld in zip(hw["wind"], hw["load"],
                                                       hw["wind_delta"], hw["load_delta"])
                        ])
                        for hw in per_day
                    ]
                    for per_day in dw["hour_windows"]
                ]
                dws.append(DayWindow(dw["start_day"], forecasts, hour_windows))
            months.append(MonthSample(ms["month"], SeasonalFactor(*ms["seasonal"]), dws))
        return cls(months)


def _window_starts(days_in_month, w_s, n_s, rng):
    """Uniform draw of n_s non-overlapping starts for length-w_s windows.

    Bijection with combinations: subtracting (i-1)*(w_s-1) from the i-th
    sorted start maps valid placements onto plain combinations, which are
    sampled uniformly.
    """
    slots = days_in_month - n_s * (w_s - 1)
    if n_s > slots:
        raise InfeasibleWindowError(
            f"{n_s} windows of {w_s} days do not fit in a {days_in_month}-day month"
        )
    combo = np.sort(rng.choice(slots, size=n_s, replace=False))
    return [int(c) + 1 + i * (w_s - 1) for i, c in enumerate(combo)]


def scenario_weight(params):
    """Per-month factor scaling summed window-day costs to the month total.

    days_in_month / (n_s * w_s): with it, an estimator of a cost that is
    constant per day is exactly unbiased.
    """
    params.validate(hours_per_day=params.w_rt)
    return np.array([DAYS_IN_MONTH[m] / (params.n_s * params.w_s)
                     for m in range(params.months)])


def seasonal_chain(params, process, rng):
    """Sequential draw of the monthly seasonal factors for one scenario."""
    seasonal = []
    J = initial_seasonal(process)
    for month in range(1, params.months + 1):
        J = seasonal_step(J, month, process, rng)
        seasonal.append(J)
    return seasonal


def sample_scenario(case, params, process, rng):
    """Draw one full scenario: seasonal chain, day windows, hour windows."""
    H = process.hours_per_day
    params.validate(hours_per_day=H)
    process.validate(case)

    cap = case.wind_capacities
    w_bounds = (np.zeros(case.n_wind), cap)
    d_bounds = (np.zeros(case.n_buses), np.full(case.n_buses, np.inf))

    # the seasonal chain is sequential; everything below a month hangs off
    # its own child stream so months can be simulated independently
    seasonal = seasonal_chain(params, process, rng)

    months = []
    for month in range(1, params.months + 1):
        mrng = np.random.default_rng(rng.integers(2**63))
        months.append(sample_month(case, params, process, month, seasonal[month - 1],
                                   mrng, w_bounds, d_bounds))
    return ScenarioSample(months)


def sample_month(case, params, process, month, J, rng, w_bounds=None, d_bounds=None):
    """Sample one month's day windows given its seasonal factor."""
    H = process.hours_per_day
    if w_bounds is None:
        w_bounds = (np.zeros(case.n_wind), case.wind_capacities)
    if d_bounds is None:
        d_bounds = (np.zeros(case.n_buses), np.full(case.n_buses, np.inf))
    dim = DAYS_IN_MONTH[month - 1]
    month_start = 1 + sum(DAYS_IN_MONTH[: month - 1])
    starts = _window_starts(dim, params.w_s, params.n_s, rng)

    day_windows = []
    for s in starts:
        forecasts = []
        hour_windows = []
        for d in range(params.w_s):
            day_of_year = month_start + (s - 1) + d
            fc = sample_day_ahead(case, day_of_year, J, process, rng)
            forecasts.append(fc)
            per_day = []
            for _ in range(params.n_rt):
                h0 = 0 if params.w_rt >= H else int(rng.integers(0, H - params.w_rt + 1))
                day_ref = (fc.wind[:, 0], fc.load[:, 0])
                reals = [realization_at((fc.wind[:, h0], fc.load[:, h0]),
                                        (w_bounds, d_bounds))]
                for h in range(h0 + 1, h0 + params.w_rt):
                    reals.append(step_hourly((fc.wind[:, h], fc.load[:, h]), reals[-1],
                                             process, (w_bounds, d_bounds), rng,
                                             day_start_forecast_MW=day_ref))
                per_day.append(HourWindow(h0, reals))
            hour_windows.append(per_day)
        day_windows.append(DayWindow(month_start + (s - 1), forecasts, hour_windows))
    return MonthSample(month, J, day_windows)
