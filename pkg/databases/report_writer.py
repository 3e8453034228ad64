"""CSV, JSON and plot-data exports of a sweep."""
import json
import math
from pathlib import Path
from typing import Union

import pandas as pd

from components.bounds import SweepResult

CSV_HEADER = ["N", "x1", "d_K", "d_W", "N_dK", "N_dW_scaled", "checks_passed", "checks_total"]
PLOT_HEADER = "# N d_K d_W N_dK N_dW_scaled"

_RENAME = {"d_k": "d_K", "d_w": "d_W", "scaled_dk": "N_dK", "scaled_dw": "N_dW_scaled"}


def summary_frame(sweep: SweepResult) -> pd.DataFrame:
    """Per-N rows in the fixed CSV column order."""
    if sweep.reports.empty:
        return pd.DataFrame(columns=CSV_HEADER)
    return sweep.reports.rename(columns=_RENAME)[CSV_HEADER].reset_index(drop=True)


def _json_float(value: float):
    value = float(value)
    return value if math.isfinite(value) else None


def _check_records(frame: pd.DataFrame) -> list:
    records = []
    for row in frame.itertuples(index=False):
        records.append(
            {
                "N": int(row.N),
                "family": row.family,
                "name": row.name,
                "n_index": None if pd.isna(row.n_index) else int(row.n_index),
                "lhs": _json_float(row.lhs),
                "rhs": _json_float(row.rhs),
                "margin": _json_float(row.margin),
            }
        )
    return records


def to_json_dict(sweep: SweepResult) -> dict:
    rows = []
    for record in summary_frame(sweep).to_dict(orient="records"):
        n = int(record["N"])
        per_n = sweep.checks[(sweep.checks["N"] == n) & (sweep.checks["status"] != "skipped")]
        record["N"] = n
        record["checks_passed"] = int(record["checks_passed"])
        record["checks_total"] = int(record["checks_total"])
        record["worst_margins"] = {
            family: _json_float(margin) for family, margin in per_n.groupby("family")["margin"].min().items()
        }
        record["skipped"] = sorted(
            sweep.checks[(sweep.checks["N"] == n) & (sweep.checks["status"] == "skipped")]["family"].unique().tolist()
        )
        rows.append(record)
    return {
        "columns": CSV_HEADER,
        "rows": rows,
        "worst_margins": {k: _json_float(v) for k, v in sorted(sweep.worst_margins.items())},
        "wasserstein_constant": _json_float(sweep.wasserstein_constant),
        "failures": {str(k): v for k, v in sorted(sweep.failures.items())},
        "failed_checks": _check_records(sweep.failed_checks),
    }


def write_csv(sweep: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    summary_frame(sweep).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def write_json(sweep: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_json_dict(sweep), indent=2) + "\n", encoding="utf-8")
    return path


def write_plot_data(sweep: SweepResult, path: Union[str, Path]) -> Path:
    """Whitespace table: N, d_K, d_W, N d_K, N d_W / sqrt(log N)."""
    path = Path(path)
    frame = summary_frame(sweep)
    lines = [PLOT_HEADER]
    for row in frame.itertuples(index=False):
        lines.append(
            " ".join([str(int(row.N))] + ["%.17g" % v for v in (row.d_K, row.d_W, row.N_dK, row.N_dW_scaled)])
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
