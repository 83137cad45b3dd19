"""Synthetic per-item profit assignment from a truncated Gaussian.

Draws are Gaussian(mean, sigma) with rejection resampling until they land
inside [min, max]; rejection (rather than clipping) avoids probability mass
piling up exactly at the bounds.  Profits are independent of ratings and
popularity.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ProfitConfig:
    mean: float = 2.0
    min: float = 0.0
    max: float = 4.0
    sigma: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if not self.min < self.max:
            raise ValueError(f"profit min must be < max, got [{self.min}, {self.max}]")
        if not (self.min <= self.mean <= self.max):
            raise ValueError(f"profit mean {self.mean} outside [{self.min}, {self.max}]")
        if self.sigma <= 0:
            raise ValueError(f"profit sigma must be positive, got {self.sigma}")


class ProfitTable:
    """Profit in dollars per item index."""

    __slots__ = ("profit",)

    def __init__(self, profit):
        self.profit = np.asarray(profit, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.profit)

    def __getitem__(self, item):
        return self.profit[item]


def assign_profits(n_items: int, cfg: ProfitConfig) -> ProfitTable:
    """Draw one profit per item, deterministic given cfg.seed."""
    if n_items < 0:
        raise ValueError(f"n_items must be >= 0, got {n_items}")
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    values = rng.normal(cfg.mean, cfg.sigma, n_items)
    bad = (values < cfg.min) | (values > cfg.max)
    while bad.any():
        values[bad] = rng.normal(cfg.mean, cfg.sigma, int(bad.sum()))
        bad = (values < cfg.min) | (values > cfg.max)
    return ProfitTable(values)


def save_profits(table: ProfitTable, item_ids, path: str) -> None:
    """Write ``item_id,profit`` CSV with raw ids at 6 decimal places."""
    item_ids = np.asarray(item_ids)
    if len(item_ids) != len(table):
        raise ValueError("item id array length does not match the profit table")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("item_id,profit\n")
        for raw, p in zip(item_ids, table.profit):
            fh.write(f"{int(raw)},{p:.6f}\n")


def load_profits(path: str, item_map: dict) -> ProfitTable:
    """Read a profit CSV back into index order via the raw-id map."""
    profit = np.full(len(item_map), np.nan)
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        header = fh.readline()
        if not header.strip().lower().startswith("item_id,profit"):
            raise DataError(f"{path}:1: expected header 'item_id,profit'")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            try:
                raw_s, val_s = line.split(",")
                raw = int(raw_s)
                val = float(val_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed profit row") from None
            if raw not in item_map:
                raise DataError(f"{path}:{lineno}: unknown item id {raw}")
            profit[item_map[raw]] = val
    if np.isnan(profit).any():
        missing = int(np.isnan(profit).sum())
        raise DataError(f"{path}: profit table is missing {missing} item(s)")
    return ProfitTable(profit)
