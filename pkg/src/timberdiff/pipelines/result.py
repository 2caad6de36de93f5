"""Evaluation results and their JSON/CSV forms."""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..metrics import CSV_HEADER, ErrorReport, pooled_summary
from ..registration import RigidTransform

SCHEMA = 1


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_arrays(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _json_key(k):
    return "/".join(str(x) for x in k) if isinstance(k, tuple) else str(k)


@dataclass(eq=False)
class EvaluationResult:
    """Outcome of one pipeline run.

    ``reports`` maps a level name to a list of :class:`ErrorReport`;
    ``unassociated`` lists entity dicts that got no scan points at their
    level. ``clouds`` keeps the evaluated point clouds by entity label
    for colouring and is not serialised.
    """

    kind: str
    t1: RigidTransform
    reports: dict
    unassociated: list
    residue_size: int
    provenance: dict
    t2: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    clouds: dict = field(default_factory=dict, repr=False)

    @property
    def complete(self):
        return not self.unassociated

    def summary(self):
        return {level: pooled_summary(reps) for level, reps in self.reports.items()}

    def to_dict(self, per_point=False):
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "t1": self.t1.to_dict(),
            "t2": {_json_key(k): v.to_dict() for k, v in self.t2.items()},
            "reports": {lvl: [r.to_dict(per_point) for r in reps] for lvl, reps in self.reports.items()},
            "summary": self.summary(),
            "unassociated": self.unassociated,
            "residue_size": self.residue_size,
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
        }

    def to_json(self, per_point=False):
        return json.dumps(self.to_dict(per_point), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        t2 = {tuple(int(x) for x in k.split("/")): RigidTransform.from_dict(v) for k, v in data.get("t2", {}).items()}
        return cls(
            kind=data["kind"],
            t1=RigidTransform.from_dict(data["t1"]),
            reports={lvl: [ErrorReport.from_dict(r) for r in reps] for lvl, reps in data["reports"].items()},
            unassociated=data["unassociated"],
            residue_size=data["residue_size"],
            provenance=data["provenance"],
            t2=t2,
            diagnostics=data.get("diagnostics", {}),
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for reps in self.reports.values():
            for r in reps:
                w.writerow(r.csv_row())
        return buf.getvalue()

    def save(self, directory, per_point=False):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(self.to_json(per_point))
        (d / "report.csv").write_text(self.to_csv())
        return d


def make_provenance(stages, config, inputs):
    return {
        "stages": list(stages),
        "config": config.to_dict(),
        "inputs": dict(sorted(inputs.items())),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
