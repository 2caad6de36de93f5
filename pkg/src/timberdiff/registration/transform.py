"""Rigid transforms and registration results."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidParameter, IoError, ParseError

_ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """``p -> rotation @ p + translation`` with ``rotation`` in SO(3)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise InvalidParameter("transform contains non-finite values")
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise InvalidParameter("rotation is not orthonormal with det +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        M = np.asarray(matrix, dtype=np.float64)
        if M.shape != (4, 4):
            raise InvalidParameter(f"expected a 4x4 matrix, got {M.shape}")
        return cls(M[:3, :3], M[:3, 3])

    @property
    def matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def apply_cloud(self, cloud):
        return cloud.transformed(self.rotation, self.translation)

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self):
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def rotation_angle_to(self, other):
        """Angle (radians) of ``self.rotation^T other.rotation``."""
        R = self.rotation.T @ other.rotation
        # atan2 keeps full precision near 0 and pi, unlike arccos of the trace
        s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        c = (np.trace(R) - 1.0) / 2.0
        return float(np.arctan2(s, c))

    def translation_distance_to(self, other):
        return float(np.linalg.norm(self.translation - other.translation))

    def to_dict(self):
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["rotation"], data["translation"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameter):
                raise
            raise ParseError(f"malformed transform: {exc!r}") from None


def save_transform(transform, path):
    try:
        Path(path).write_text(json.dumps(transform.to_dict(), indent=1) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_transform(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    return RigidTransform.from_dict(data)


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    fitness: float
    inlier_rmse: float
    iterations: int
