"""Joint single-cavity two-qubit readout model.

The cavity response clusters into three Gaussian balls in the I-Q plane:
|gg>, |ee>, and a shared middle ball carrying both |eg> and |ge|. The module
provides shot simulation, triangle geometry metrics on the centroids,
pairwise separation fidelity, nearest-centroid classification, and the
shuffle-pulse scheme that disentangles the middle-ball populations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

OUTCOMES = ("gg", "middle", "ee")
STATE_LABELS = ("gg", "ge", "eg", "ee")
_STATE_TO_OUTCOME = {"gg": 0, "ge": 1, "eg": 1, "ee": 2}


class CollinearCentroidsError(ValueError):
    """Ball centroids lie on a line; triangle metrics undefined."""


class SingularSystemError(ValueError):
    """Shuffle settings do not resolve the middle-ball ambiguity."""


@dataclass(frozen=True)
class BallModel:
    """Three I-Q response balls: gg, middle (eg and ge), ee."""

    centroids: tuple  # three (I, Q) points, volts
    sigma: tuple  # three standard deviations, volts

    def __post_init__(self):
        c = tuple((float(x), float(y)) for x, y in self.centroids)
        s = tuple(float(x) for x in self.sigma)
        if len(c) != 3 or len(s) != 3:
            raise ValueError("need exactly three centroids and sigmas")
        if any(x <= 0 for x in s):
            raise ValueError("sigmas must be positive")
        for i in range(3):
            for j in range(i + 1, 3):
                if math.dist(c[i], c[j]) == 0.0:
                    raise ValueError("centroids must be distinct")
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "sigma", s)

    def to_dict(self) -> dict:
        return {"centroids": [list(p) for p in self.centroids],
                "sigma": list(self.sigma)}

    @classmethod
    def from_dict(cls, d: dict) -> "BallModel":
        return cls(centroids=tuple(tuple(p) for p in d["centroids"]),
                   sigma=tuple(d["sigma"]))


@dataclass(frozen=True)
class TriangleMetrics:
    angles: tuple[float, float, float]  # radians, sum pi
    lengths: tuple[float, float, float]  # volts, side opposite each vertex


def simulate_shots(populations, model: BallModel, shots: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw I-Q points: outcome by population, then a Gaussian around its
    centroid. Populations are (gg, ge, eg, ee) and must sum to 1."""
    pops = np.asarray(populations, dtype=float)
    if pops.shape != (4,) or np.any(pops < -1e-12):
        raise ValueError("populations must be a nonnegative 4-vector")
    if abs(pops.sum() - 1.0) > 1e-9:
        raise ValueError("populations must sum to 1")
    ball_probs = np.array([pops[0], pops[1] + pops[2], pops[3]])
    ball_probs = np.clip(ball_probs, 0.0, None)
    ball_probs /= ball_probs.sum()
    which = rng.choice(3, size=shots, p=ball_probs)
    centroids = np.array(model.centroids)
    sigma = np.array(model.sigma)
    return centroids[which] + rng.normal(size=(shots, 2)) * sigma[which, None]


def triangle_metrics(model: BallModel, area_tol: float = 1e-12) -> TriangleMetrics:
    """Interior angles and side lengths of the centroid triangle."""
    p = [np.array(c) for c in model.centroids]
    # side i is opposite vertex i
    sides = [np.linalg.norm(p[(i + 1) % 3] - p[(i + 2) % 3]) for i in range(3)]
    u, v = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
    if area <= area_tol:
        raise CollinearCentroidsError("centroids are (nearly) collinear")
    angles = []
    for i in range(3):
        a, b, c = sides[i], sides[(i + 1) % 3], sides[(i + 2) % 3]
        angles.append(math.acos(np.clip((b * b + c * c - a * a) / (2 * b * c),
                                        -1.0, 1.0)))
    # close the angle sum exactly on the largest angle
    k = int(np.argmax(angles))
    angles[k] = math.pi - sum(angles[:k] + angles[k + 1:])
    return TriangleMetrics(angles=tuple(angles), lengths=tuple(sides))


def separation_fidelity(model: BallModel):
    """(fidelity, per-pair errors) from Gaussian overlap.

    Per pair: eps = 0.5 erfc(S / (2 sqrt(2) sigma_eff)), sigma_eff the mean
    of the two sigmas; fidelity = 1 - sum over the three pairs.
    """
    errors = {}
    for i in range(3):
        for j in range(i + 1, 3):
            s = math.dist(model.centroids[i], model.centroids[j])
            sigma_eff = 0.5 * (model.sigma[i] + model.sigma[j])
            errors[(OUTCOMES[i], OUTCOMES[j])] = 0.5 * float(
                erfc(s / (2.0 * math.sqrt(2.0) * sigma_eff))
            )
    fidelity = 1.0 - sum(errors.values())
    return fidelity, errors


def classify(point, model: BallModel) -> str:
    """Nearest centroid in Mahalanobis distance; ties go gg < middle < ee."""
    p = np.asarray(point, dtype=float)
    d = [np.linalg.norm(p - np.array(c)) / s
         for c, s in zip(model.centroids, model.sigma)]
    return OUTCOMES[int(np.argmin(d))]


def classify_shots(points, model: BallModel) -> dict:
    """Counts of each outcome over an array of I-Q points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centroids = np.array(model.centroids)
    sigma = np.array(model.sigma)
    d = np.linalg.norm(pts[:, None, :] - centroids[None, :, :], axis=2) / sigma
    idx = np.argmin(d, axis=1)
    return {name: int((idx == i).sum()) for i, name in enumerate(OUTCOMES)}


# shuffle settings: which computational state each ball count draws from.
# A pi pulse on L swaps g<->e on the left qubit; on R likewise.
_SETTING_PERMUTATION = {
    "bare": {"gg": "gg", "ge": "ge", "eg": "eg", "ee": "ee"},
    "pi_l": {"gg": "eg", "ge": "ee", "eg": "gg", "ee": "ge"},
    "pi_r": {"gg": "ge", "ge": "gg", "eg": "ee", "ee": "eg"},
}


def shuffle_recover(measurements: dict, decay_factor: float = 1.0):
    """Recover 4-state populations from ball counts under shuffle pulses.

    ``measurements`` maps setting name ("bare", "pi_l", "pi_r") to outcome
    counts {gg, middle, ee}. Least-squares inversion of the stacked
    outcome-probability maps; needs at least one pi setting to split eg
    from ge. Returns (populations (gg, ge, eg, ee), condition number).

    ``decay_factor`` optionally scales each excited qubit's survival over
    the readout window (e^(-t_ro/T1) correction).
    """
    if not measurements:
        raise ValueError("no measurements given")
    unknown = set(measurements) - set(_SETTING_PERMUTATION)
    if unknown:
        raise ValueError(f"unknown settings {sorted(unknown)}")
    rows, rhs = [], []
    excitation = {"gg": 0, "ge": 1, "eg": 1, "ee": 2}
    for setting, counts in measurements.items():
        total = sum(counts.values())
        if total <= 0:
            raise ValueError(f"empty counts for setting {setting!r}")
        perm = _SETTING_PERMUTATION[setting]
        for outcome in OUTCOMES:
            row = np.zeros(4)
            for si, state in enumerate(STATE_LABELS):
                mapped = perm[state]
                if OUTCOMES[_STATE_TO_OUTCOME[mapped]] == outcome:
                    row[si] = decay_factor ** excitation[mapped]
            rows.append(row)
            rhs.append(counts.get(outcome, 0) / total)
    a = np.array(rows)
    svals = np.linalg.svd(a, compute_uv=False)
    # full column rank (4) needed to split eg from ge
    if len(svals) < 4 or svals[3] < 1e-10 * svals[0]:
        raise SingularSystemError(
            "settings do not separate eg from ge (add a pi-pulse setting)"
        )
    condition = float(svals[0] / svals[3])
    pops, *_ = np.linalg.lstsq(a, np.array(rhs), rcond=None)
    pops = np.clip(pops, 0.0, 1.0)
    total = pops.sum()
    if total <= 0:
        raise SingularSystemError("recovered populations degenerate")
    return pops / total, condition


def shots_to_csv(path, points, setting: str = "bare") -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["I", "Q", "setting"])
        for i, q in np.atleast_2d(points):
            w.writerow([repr(float(i)), repr(float(q)), setting])


def shots_from_csv(path):
    points, settings = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            points.append((float(row["I"]), float(row["Q"])))
            settings.append(row.get("setting", "bare"))
    return np.array(points), settings
