"""CSV and JSON formats for surfaces, decompositions, cohorts, and fits.

Floats are written with Python's shortest round-trip representation, so
write -> read reproduces values bit-exactly.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .decompose import DecompositionConfig, DecomposedSurface
from .design import DailySurface, SparseDesign
from .exposure import Subject

__all__ = [
    "read_surfaces",
    "write_surfaces",
    "write_decomposition",
    "read_decomposition",
    "read_subjects",
    "subjects_from_frame",
    "write_subjects",
    "read_exposures",
    "write_exposures",
    "write_fit_json",
]

RESERVED_SUBJECT_COLUMNS = (
    "id",
    "x1",
    "x2",
    "birth_date",
    "gestation_days",
    "tract_id",
    "outcome",
)


def read_surfaces(path) -> list[DailySurface]:
    """Load daily surfaces from long-format CSV with date,x1,x2,value."""
    frame = pd.read_csv(path, parse_dates=["date"])
    required = {"date", "x1", "x2", "value"}
    if not required.issubset(frame.columns):
        raise ValueError(f"{path}: surface CSV needs columns {sorted(required)}")
    surfaces = []
    for date, day in frame.groupby("date", sort=True):
        surfaces.append(
            DailySurface(
                date.date() if hasattr(date, "date") else date,
                day[["x1", "x2"]].to_numpy(dtype=float),
                day["value"].to_numpy(dtype=float),
            )
        )
    return surfaces


def write_surfaces(surfaces: list[DailySurface], path) -> None:
    frames = [
        pd.DataFrame(
            {
                "date": s.date.isoformat(),
                "x1": s.points[:, 0],
                "x2": s.points[:, 1],
                "value": s.values,
            }
        )
        for s in surfaces
    ]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def write_decomposition(
    results: list[DecomposedSurface],
    config: DecompositionConfig,
    design: SparseDesign,
    out_dir,
) -> None:
    """Write per-day values, a coefficients sidecar, and a run manifest.

    Values go to ``surfaces.csv`` (date,x1,x2,mean,low,high,total), nonzero
    coefficients to ``coefficients.csv``, and the configuration plus
    per-day penalty and convergence diagnostics to ``manifest.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    value_frames = []
    coef_frames = []
    manifest_days = []
    for d in results:
        value_frames.append(
            pd.DataFrame(
                {
                    "date": d.date.isoformat(),
                    "x1": d.points[:, 0],
                    "x2": d.points[:, 1],
                    "mean": d.mean,
                    "low": d.low_values,
                    "high": d.high_values,
                    "total": d.total(),
                }
            )
        )
        active = np.flatnonzero(d.coefficients.coefficients)
        coef_frames.append(
            pd.DataFrame(
                {
                    "date": d.date.isoformat(),
                    "level_x1": design.col_level_x1[active],
                    "level_x2": design.col_level_x2[active],
                    "shift_x1": design.col_shift_x1[active],
                    "shift_x2": design.col_shift_x2[active],
                    "theta": d.coefficients.coefficients[active],
                }
            )
        )
        manifest_days.append(
            {
                "date": d.date.isoformat(),
                "lambda": d.selected_lambda,
                "sweeps": d.coefficients.iterations,
                "converged": bool(d.coefficients.converged),
                "n_active": d.coefficients.n_active,
                "mean": d.mean,
                "intercept": d.coefficients.intercept,
            }
        )
    pd.concat(value_frames, ignore_index=True).to_csv(out / "surfaces.csv", index=False)
    pd.concat(coef_frames, ignore_index=True).to_csv(out / "coefficients.csv", index=False)
    manifest = {
        "config": _config_dict(config),
        "days": manifest_days,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _config_dict(config) -> dict:
    out = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, datetime.date):
            value = value.isoformat()
        elif hasattr(value, "value"):
            value = value.value
        out[f.name] = value
    return out


def read_decomposition(out_dir) -> pd.DataFrame:
    """Load the per-day component values written by ``write_decomposition``."""
    return pd.read_csv(Path(out_dir) / "surfaces.csv", parse_dates=["date"])


def read_subjects(path) -> pd.DataFrame:
    """Load the cohort CSV; extra columns beyond the reserved ones are confounders."""
    frame = pd.read_csv(path, parse_dates=["birth_date"])
    missing = [c for c in RESERVED_SUBJECT_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: subjects CSV missing columns {missing}")
    frame["birth_date"] = frame["birth_date"].dt.date
    frame["id"] = frame["id"].astype(str)
    frame["tract_id"] = frame["tract_id"].astype(str)
    return frame


def subjects_from_frame(frame: pd.DataFrame) -> list[Subject]:
    confounders = [c for c in frame.columns if c not in RESERVED_SUBJECT_COLUMNS]
    subjects = []
    for row in frame.itertuples(index=False):
        subjects.append(
            Subject(
                id=str(row.id),
                location=(float(row.x1), float(row.x2)),
                birth_date=row.birth_date,
                gestation_days=int(row.gestation_days),
                tract_id=str(row.tract_id),
                outcome=float(row.outcome),
                confounders={c: float(getattr(row, c)) for c in confounders},
            )
        )
    return subjects


def write_subjects(frame: pd.DataFrame, path) -> None:
    out = frame.copy()
    out["birth_date"] = [d.isoformat() for d in out["birth_date"]]
    out.to_csv(path, index=False)


def read_exposures(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    required = {"id", "window", "mean_avg", "low_avg", "high_avg"}
    if not required.issubset(frame.columns):
        raise ValueError(f"{path}: exposures CSV needs columns {sorted(required)}")
    frame["id"] = frame["id"].astype(str)
    return frame


def write_exposures(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False)


def write_fit_json(
    path,
    fit,
    table,
    contrast: tuple[float, float, float, float] | None,
    spec,
    alpha: float,
) -> None:
    """Model-fit JSON: estimates, adjusted intervals, variance components."""
    payload = {
        "mode": spec.mode.value,
        "window": spec.window.value,
        "alpha": alpha,
        "n": fit.n,
        "n_groups": fit.n_groups,
        "fixed_effects": {
            name: {"estimate": float(est), "se": float(se)}
            for name, est, se in zip(
                fit.names, fit.fixed_effects, np.sqrt(np.diag(fit.cov_fixed))
            )
        },
        "adjusted_intervals": {
            name: {
                "estimate": float(est),
                "se": float(se),
                "lower": float(lo),
                "upper": float(hi),
                "family_size": table.family_size,
            }
            for name, est, se, lo, hi in zip(
                table.names, table.estimates, table.ses, table.lower, table.upper
            )
        },
        "variance_components": {
            "tract_sd": float(np.sqrt(fit.sigma_b2)),
            "residual_sd": float(np.sqrt(fit.sigma_e2)),
            "gamma": fit.gamma,
            "boundary": bool(fit.boundary),
        },
        "reml_loglik": fit.reml_loglik,
    }
    if contrast is not None:
        est, se, z, p = contrast
        payload["low_vs_high_contrast"] = {"estimate": est, "se": se, "z": z, "p": p}
    Path(path).write_text(json.dumps(payload, indent=2))
