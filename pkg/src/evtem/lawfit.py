"""Energy dependence of the measured decay lengths: reciprocal-law fit,
power-law diagnostic, and reciprocal-versus-square-root model discrimination.

All fits are weighted least squares through the origin (the laws carry no
offset); points are processed in ascending energy order so results do not
depend on input ordering.
"""

import csv
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .constants import HBAR_C


class PreferredModel(Enum):
    RECIPROCAL = "reciprocal"
    SQRT = "sqrt"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class DecaySeries:
    """Measured decay lengths x_i(delta_e) with 1-sigma errors."""

    delta_e: np.ndarray  # eV
    x_i: np.ndarray  # nm
    sigma: np.ndarray  # nm
    provenance: tuple = ()

    def __post_init__(self):
        de = np.asarray(self.delta_e, dtype=float)
        xi = np.asarray(self.x_i, dtype=float)
        sg = np.asarray(self.sigma, dtype=float)
        if not de.size == xi.size == sg.size:
            raise ValueError("delta_e, x_i, sigma must have equal length")
        if np.any(de <= 0):
            raise ValueError("all delta_e must be > 0")
        if np.unique(de).size != de.size:
            raise ValueError("delta_e values must be distinct")
        if np.any(sg <= 0):
            raise ValueError("all sigma must be > 0")
        order = np.argsort(de)
        object.__setattr__(self, "delta_e", de[order])
        object.__setattr__(self, "x_i", xi[order])
        object.__setattr__(self, "sigma", sg[order])

    def __len__(self):
        return self.delta_e.size


@dataclass(frozen=True)
class LawFitResult:
    """Joint outcome of the reciprocal fit, power-law diagnostic, and discrimination."""

    a: float  # (eV nm)^-1
    hbar_v: float  # eV nm, = 1/a
    v_over_c: float
    sigma_hbar_v: float
    chi2_reduced: float
    powerlaw: dict  # {"C", "p", "sigma_p"}
    preferred_model: PreferredModel
    rss_ratio: float  # RSS_sqrt / RSS_reciprocal


class ScaleLawFitter(RegressorMixin, BaseEstimator):
    """Weighted one-parameter fit of x_i = kappa * delta_e**(-exponent) through
    the origin in the regressor u = delta_e**(-exponent).

    exponent=1 is the reciprocal law, exponent=0.5 the tunneling-like law.
    After fit: kappa_, sigma_kappa_, rss_, chi2_reduced_.
    """

    def __init__(self, exponent=1.0):
        self.exponent = exponent

    def fit(self, delta_e, x_i, sigma):
        de = column_or_1d(np.asarray(delta_e, dtype=float))
        xi = column_or_1d(np.asarray(x_i, dtype=float))
        sg = column_or_1d(np.asarray(sigma, dtype=float))
        if de.size < 3:
            raise ValueError(f"need at least 3 points, got {de.size}")
        u = de**(-self.exponent)
        w = 1.0 / sg**2
        suu = np.sum(w * u * u)
        self.kappa_ = float(np.sum(w * u * xi) / suu)
        self.sigma_kappa_ = float(1.0 / np.sqrt(suu))
        resid = xi - self.kappa_ * u
        self.rss_ = float(np.sum(w * resid * resid))
        self.chi2_reduced_ = self.rss_ / max(de.size - 1, 1)
        return self

    def predict(self, delta_e):
        check_is_fitted(self, "kappa_")
        de = column_or_1d(np.asarray(delta_e, dtype=float))
        return self.kappa_ * de**(-self.exponent)


def fit_reciprocal(series):
    """Fit x_i = (1/a) / delta_e; returns a, hbar_v = 1/a, v/c, sigma, chi2."""
    f = ScaleLawFitter(exponent=1.0).fit(series.delta_e, series.x_i, series.sigma)
    return {
        "a": 1.0 / f.kappa_,
        "hbar_v": f.kappa_,
        "v_over_c": f.kappa_ / HBAR_C,
        "sigma_hbar_v": f.sigma_kappa_,
        "chi2_reduced": f.chi2_reduced_,
    }


def fit_powerlaw(series):
    """Weighted log-log regression ln x_i = ln C - p ln delta_e."""
    if len(series) < 3:
        raise ValueError(f"need at least 3 points, got {len(series)}")
    if np.any(series.x_i <= 0):
        raise ValueError("all x_i must be > 0 for a log-log fit")
    lx = np.log(series.x_i)
    le = np.log(series.delta_e)
    w = (series.x_i / series.sigma) ** 2  # sigma_ln = sigma / x_i
    eb = np.average(le, weights=w)
    xb = np.average(lx, weights=w)
    sdd = np.sum(w * (le - eb) ** 2)
    slope = np.sum(w * (le - eb) * (lx - xb)) / sdd
    return {
        "C": float(np.exp(xb - slope * eb)),
        "p": float(-slope),
        "sigma_p": float(1.0 / np.sqrt(sdd)),
    }


def discriminate(series, ratio_threshold=5.0):
    """Fit both one-parameter laws and pick the model by weighted-RSS ratio.

    rss_ratio = RSS_sqrt / RSS_reciprocal; RECIPROCAL above `ratio_threshold`,
    SQRT below its inverse, UNDECIDED in between.
    """
    if len(series) < 4:
        raise ValueError(f"need at least 4 points to discriminate, got {len(series)}")
    rec = ScaleLawFitter(exponent=1.0).fit(series.delta_e, series.x_i, series.sigma)
    sq = ScaleLawFitter(exponent=0.5).fit(series.delta_e, series.x_i, series.sigma)
    ratio = sq.rss_ / rec.rss_ if rec.rss_ > 0 else np.inf
    if ratio > ratio_threshold:
        preferred = PreferredModel.RECIPROCAL
    elif ratio < 1.0 / ratio_threshold:
        preferred = PreferredModel.SQRT
    else:
        preferred = PreferredModel.UNDECIDED
    power = fit_powerlaw(series)
    return LawFitResult(
        a=1.0 / rec.kappa_, hbar_v=rec.kappa_, v_over_c=rec.kappa_ / HBAR_C,
        sigma_hbar_v=rec.sigma_kappa_, chi2_reduced=rec.chi2_reduced_,
        powerlaw=power, preferred_model=preferred, rss_ratio=float(ratio),
    )


def read_series_csv(path):
    """Read a `dE_eV,xi_nm,sigma_nm` CSV into a DecaySeries."""
    de, xi, sg = [], [], []
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(r for r in fh if not r.startswith("#")):
            de.append(float(row["dE_eV"]))
            xi.append(float(row["xi_nm"]))
            sg.append(float(row["sigma_nm"]))
    return DecaySeries(delta_e=np.array(de), x_i=np.array(xi), sigma=np.array(sg))


def write_series_csv(path, series, comment=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("dE_eV,xi_nm,sigma_nm\n")
        for de, xi, sg in zip(series.delta_e, series.x_i, series.sigma):
            fh.write(f"{de:.6e},{xi:.6e},{sg:.6e}\n")


def lawfit_to_dict(result):
    return {
        "schema_version": 1,
        "a_per_eV_nm": result.a,
        "hbar_v_eV_nm": result.hbar_v,
        "v_over_c": result.v_over_c,
        "sigma_hbar_v_eV_nm": result.sigma_hbar_v,
        "chi2_reduced": result.chi2_reduced,
        "powerlaw": result.powerlaw,
        "preferred_model": result.preferred_model.value,
        "rss_ratio": result.rss_ratio,
    }


def write_lawfit_json(path, result, provenance=None):
    doc = lawfit_to_dict(result)
    if provenance:
        doc["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
