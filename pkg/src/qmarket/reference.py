"""Published (q, alpha, beta, error) tables for the four demand experiments, N = 5..28."""

from __future__ import annotations

import csv
import io
from importlib import resources

# table number -> distribution spec understood by demand.parse_distribution
TABLE_DISTRIBUTIONS = {1: "uniform", 2: "power-left:2", 3: "power-right:2", 4: None}


def published_table(number: int) -> dict[int, dict[str, float]]:
    """Rows keyed by N.  Table 4's density is not published, so it is reference-only."""
    text = resources.files("qmarket.data").joinpath(f"table{number}.csv").read_text(encoding="utf-8")
    return {
        int(r["N"]): {k: float(v) for k, v in r.items() if k != "N"}
        for r in csv.DictReader(io.StringIO(text))
    }
