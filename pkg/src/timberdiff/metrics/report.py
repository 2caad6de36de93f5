"""Distance statistics, thresholds and pass/warn/fail categories."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyInput

LEVELS = ("assembly", "beam", "joint", "face")
ENTITY_KEYS = ("beam", "joint", "face")


def summarize(distances, threshold=None):
    """Statistics of a distance list (meters).

    ``mean``, ``mse`` (mean of squares), population ``std``, ``min``,
    ``max``, and when ``threshold`` is given the fraction of distances
    ``<= threshold`` plus category counts: pass ``<= t``, warn ``<= 2t``,
    fail ``> 2t``.
    """
    d = np.asarray(distances, dtype=np.float64).ravel()
    if len(d) == 0:
        raise EmptyInput("cannot summarise an empty distance list")
    stats = {
        "n_points": int(len(d)),
        "mean": float(np.mean(d)),
        "mse": float(np.mean(d * d)),
        "std": float(np.std(d)),
        "min": float(d.min()),
        "max": float(d.max()),
        "threshold": None,
        "pass_fraction": None,
        "categories": None,
    }
    if threshold is not None:
        t = float(threshold)
        n_pass = int(np.sum(d <= t))
        n_warn = int(np.sum((d > t) & (d <= 2 * t)))
        stats.update(
            threshold=t,
            pass_fraction=n_pass / len(d),
            categories={"pass": n_pass, "warn": n_warn, "fail": int(len(d) - n_pass - n_warn)},
        )
    return stats


def categorize(distances, threshold):
    """Per-point category: 0 pass, 1 warn, 2 fail."""
    d = np.asarray(distances, dtype=np.float64)
    return np.where(d <= threshold, 0, np.where(d <= 2 * threshold, 1, 2))


@dataclass(eq=False)
class ErrorReport:
    """Distance statistics for one entity.

    ``entity`` is a dict such as ``{"beam": 3}`` or
    ``{"beam": 0, "joint": 1, "face": 2}``.
    """

    entity: dict
    level: str
    per_point_distances: np.ndarray
    n_points: int
    mean: float
    mse: float
    std: float
    min: float
    max: float
    threshold: float | None = None
    pass_fraction: float | None = None
    categories: dict | None = None
    n_clamped: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        assert self.level in LEVELS, self.level
        assert self.min <= self.mean + 1e-15 and self.mean <= self.max + 1e-15
        assert self.std >= 0
        assert self.mse >= self.mean**2 * (1 - 1e-12) - 1e-300
        if self.pass_fraction is not None:
            assert 0.0 <= self.pass_fraction <= 1.0

    @classmethod
    def from_distances(cls, entity, level, distances, threshold=None, **extra):
        d = np.asarray(distances, dtype=np.float64).ravel()
        return cls(entity=dict(entity), level=level, per_point_distances=d, extra=extra, **summarize(d, threshold))

    @property
    def label(self):
        keys = sorted(self.entity, key=lambda k: ENTITY_KEYS.index(k) if k in ENTITY_KEYS else len(ENTITY_KEYS))
        return "/".join(f"{k}{self.entity[k]}" for k in keys)

    def to_dict(self, per_point=False):
        out = {
            "entity": self.entity,
            "level": self.level,
            "n_points": self.n_points,
            "mean": self.mean,
            "mse": self.mse,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "threshold": self.threshold,
            "pass_fraction": self.pass_fraction,
            "categories": self.categories,
            "n_clamped": self.n_clamped,
        }
        out.update(self.extra)
        if per_point:
            out["per_point_distances"] = self.per_point_distances.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        """Rebuild a report; statistics are recomputed when per-point distances are present."""
        known = {"entity", "level", "n_points", "mean", "mse", "std", "min", "max",
                 "threshold", "pass_fraction", "categories", "n_clamped", "per_point_distances"}
        extra = {k: v for k, v in data.items() if k not in known}
        if "per_point_distances" in data:
            rep = cls.from_distances(data["entity"], data["level"], data["per_point_distances"], data.get("threshold"), **extra)
            rep.n_clamped = data.get("n_clamped", 0)
            return rep
        return cls(
            entity=data["entity"], level=data["level"], per_point_distances=np.zeros(0),
            n_points=data["n_points"], mean=data["mean"], mse=data["mse"], std=data["std"],
            min=data["min"], max=data["max"], threshold=data.get("threshold"),
            pass_fraction=data.get("pass_fraction"), categories=data.get("categories"),
            n_clamped=data.get("n_clamped", 0), extra=extra,
        )

    def csv_row(self):
        """Values for ``entity,level,mean_mm,mse_mm2,std_mm,min_mm,max_mm,n_points,pass_fraction``."""
        pf = "" if self.pass_fraction is None else f"{self.pass_fraction:.6f}"
        return [
            self.label, self.level,
            f"{self.mean * 1e3:.6f}", f"{self.mse * 1e6:.6f}", f"{self.std * 1e3:.6f}",
            f"{self.min * 1e3:.6f}", f"{self.max * 1e3:.6f}", str(self.n_points), pf,
        ]


CSV_HEADER = ["entity", "level", "mean_mm", "mse_mm2", "std_mm", "min_mm", "max_mm", "n_points", "pass_fraction"]


def pooled_summary(reports):
    """Both readings of 'mean ± spread' over several entities.

    ``pooled``: statistics of all per-point distances together.
    ``across_entities``: mean and population std of the per-entity means.
    """
    reports = [r for r in reports if r.n_points]
    if not reports:
        return None
    means = np.array([r.mean for r in reports])
    out = {"across_entities": {"mean": float(means.mean()), "std": float(means.std()), "n_entities": len(reports)}}
    if all(len(r.per_point_distances) == r.n_points for r in reports):
        pooled = summarize(np.concatenate([r.per_point_distances for r in reports]))
        out["pooled"] = {k: pooled[k] for k in ("n_points", "mean", "mse", "std", "min", "max")}
    return out
