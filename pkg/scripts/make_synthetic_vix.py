#!/usr/bin/env python3
"""Regenerate data/synthetic_vix.csv deterministically.

The bundled series imitates a volatility index: its log returns carry a
slow trend, a period-15 seasonal oscillation, and heavy-tailed noise with
one-sided gamma jumps (drift-compensated so the price level stays in a
plausible range).  2857 weekday closes starting 2011-01-03.

Usage: python scripts/make_synthetic_vix.py [output.csv]
"""

import datetime as dt
import sys
from pathlib import Path

import numpy as np

N_DAYS = 2857
SEED = 101
START = dt.date(2011, 1, 3)

JUMP_PROBABILITY = 0.08
JUMP_SHAPE = 2.0
JUMP_SCALE = 0.015


def trading_days(start: dt.date, count: int) -> list[dt.date]:
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def synthetic_returns(n: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(1, n + 1)
    trend = 0.0015 * np.sin(2 * np.pi * t / 1400.0)
    seasonal = 0.004 * np.sin(2 * np.pi * t / 15.0)
    noise = 0.008 * rng.standard_t(df=3, size=n)
    jumps = rng.random(n) < JUMP_PROBABILITY
    noise[jumps] += rng.gamma(JUMP_SHAPE, JUMP_SCALE, jumps.sum())
    noise -= JUMP_PROBABILITY * JUMP_SHAPE * JUMP_SCALE
    return trend + seasonal + noise


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/synthetic_vix.csv")
    rng = np.random.default_rng(SEED)
    returns = synthetic_returns(N_DAYS - 1, rng)
    log_prices = np.log(20.0) + np.concatenate([[0.0], np.cumsum(returns)])
    prices = np.exp(log_prices)
    dates = trading_days(START, N_DAYS)
    lines = ["Date,Close"]
    lines += [f"{d.isoformat()},{float(p)!r}" for d, p in zip(dates, prices)]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print(f"wrote {out} ({len(prices)} rows, min {prices.min():.2f}, "
          f"max {prices.max():.2f})")


if __name__ == "__main__":
    main()
