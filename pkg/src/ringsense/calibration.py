"""Per-axis deformation-to-wrench calibration.

Fits one 1-D polynomial model per wrench axis from synchronized
(deformation, wrench) pairs: a seeded 80/20 shuffle split, a least-squares
fit on the training part, and R^2/RMSE metrics on the held-out part. The
input pose component for each wrench axis is chosen by maximum absolute
Pearson correlation on the training data, which recovers the identity
pairing under diagonal compliance and adapts under coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    RankDeficient,
    TooFewSamples,
    UncoveredAxis,
    ValidationFailure,
    ZeroVariance,
)
from .geometry import DeformationVector
from .simulator import Wrench

Pair = tuple[DeformationVector, Wrench]


@dataclass(frozen=True)
class AxisModel:
    """Fitted map from one pose component to one wrench component.

    ``coefficients`` are polynomial coefficients in ascending degree,
    intercept first. Test metrics are None until evaluated on held-out data.
    """

    axis: int
    input_component: int
    coefficients: tuple[float, ...]
    degree: int
    r2_train: float
    rmse_train: float
    r2_test: float | None = None
    rmse_test: float | None = None

    def __post_init__(self) -> None:
        if self.degree not in (1, 3):
            raise ValidationFailure(f"degree must be 1 or 3, got {self.degree}")
        if len(self.coefficients) != self.degree + 1:
            raise ValidationFailure("coefficient count must be degree + 1")
        if not (0 <= self.axis <= 5 and 0 <= self.input_component <= 5):
            raise ValidationFailure("axis and input_component must be 0..5")
        if self.rmse_train < 0 or (self.rmse_test is not None and self.rmse_test < 0):
            raise ValidationFailure("rmse must be non-negative")
        if self.r2_test is not None and self.r2_test > 1:
            raise ValidationFailure("r2_test cannot exceed 1")

    @property
    def slope(self) -> float:
        return self.coefficients[1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros_like(x)
        for k, c in enumerate(self.coefficients):
            y = y + c * x**k
        return y

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "input_component": self.input_component,
            "coefficients": list(self.coefficients),
            "degree": self.degree,
            "r2_train": self.r2_train,
            "rmse_train": self.rmse_train,
            "r2_test": self.r2_test,
            "rmse_test": self.rmse_test,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AxisModel":
        return cls(
            axis=int(data["axis"]),
            input_component=int(data["input_component"]),
            coefficients=tuple(float(c) for c in data["coefficients"]),
            degree=int(data["degree"]),
            r2_train=float(data["r2_train"]),
            rmse_train=float(data["rmse_train"]),
            r2_test=None if data["r2_test"] is None else float(data["r2_test"]),
            rmse_test=None if data["rmse_test"] is None else float(data["rmse_test"]),
        )


@dataclass(frozen=True)
class CalibrationReport:
    """Six fitted axis models plus the split protocol that produced them."""

    models: tuple[AxisModel, ...]
    split_fraction: float
    split_seed: int
    sample_count: int

    def __post_init__(self) -> None:
        if len(self.models) != 6:
            raise ValidationFailure("report must contain exactly 6 axis models")
        if sorted(m.axis for m in self.models) != list(range(6)):
            raise ValidationFailure("report must contain one model per wrench axis")

    def model_for_axis(self, axis: int) -> AxisModel:
        for m in self.models:
            if m.axis == axis:
                return m
        raise ValidationFailure(f"no model for axis {axis}")

    def to_dict(self) -> dict:
        return {
            "models": [m.to_dict() for m in self.models],
            "split_fraction": self.split_fraction,
            "split_seed": self.split_seed,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationReport":
        return cls(
            models=tuple(AxisModel.from_dict(m) for m in data["models"]),
            split_fraction=float(data["split_fraction"]),
            split_seed=int(data["split_seed"]),
            sample_count=int(data["sample_count"]),
        )


@dataclass(frozen=True)
class CalibrationConfig:
    degree: int = 1
    split_fraction: float = 0.8
    seed: int = 0


def _as_arrays(pairs: list[Pair]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([p[0].as_array() for p in pairs])
    y = np.array([p[1].as_array() for p in pairs])
    return x, y


def split_indices(n: int, fraction: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) index arrays for a seeded shuffle-then-prefix split."""
    if not 0 < fraction < 1:
        raise ValidationFailure(f"fraction must be in (0, 1), got {fraction}")
    if n < 10:
        raise TooFewSamples(f"need at least 10 pairs to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = round(fraction * n)
    return order[:n_train], order[n_train:]


def split(pairs: list[Pair], fraction: float = 0.8, seed: int = 0) -> tuple[list[Pair], list[Pair]]:
    """Seeded shuffle then prefix split into (train, test).

    Exact partition: sizes round(fraction * n) and the remainder, no overlap.
    """
    train_idx, test_idx = split_indices(len(pairs), fraction, seed)
    return [pairs[i] for i in train_idx], [pairs[i] for i in test_idx]


def _select_input_component(x: np.ndarray, y_axis: np.ndarray) -> int:
    """Pose component with maximum |Pearson correlation| to the target axis."""
    scores = np.zeros(6)
    ys = y_axis - y_axis.mean()
    denom_y = float(np.sqrt(np.sum(ys**2)))
    for j in range(6):
        xs = x[:, j] - x[:, j].mean()
        denom_x = float(np.sqrt(np.sum(xs**2)))
        if denom_x > 0 and denom_y > 0:
            scores[j] = abs(float(np.sum(xs * ys)) / (denom_x * denom_y))
    return int(np.argmax(scores))


def fit_axis(train: list[Pair], axis: int, degree: int = 1) -> AxisModel:
    """Least-squares polynomial fit for one wrench axis on training pairs.

    The design matrix is solved by orthogonal decomposition (SVD-based
    lstsq), with an intercept in all fits.

    Raises:
        TooFewSamples: fewer than degree + 2 training samples.
        RankDeficient: the selected input column is constant.
    """
    if degree not in (1, 3):
        raise ValidationFailure(f"degree must be 1 or 3, got {degree}")
    if len(train) < degree + 2:
        raise TooFewSamples(f"need at least {degree + 2} samples for degree {degree}")
    x_all, y_all = _as_arrays(train)
    y = y_all[:, axis]
    component = _select_input_component(x_all, y)
    x = x_all[:, component]
    if np.ptp(x) == 0.0:
        raise RankDeficient(f"pose component {component} is constant on the training data")
    design = np.column_stack([x**k for k in range(degree + 1)])
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < degree + 1:
        raise RankDeficient("design matrix is rank deficient")
    pred = design @ coeffs
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance(f"wrench axis {axis} has zero variance on the training data")
    return AxisModel(
        axis=axis,
        input_component=component,
        coefficients=tuple(float(c) for c in coeffs),
        degree=degree,
        r2_train=1.0 - ss_res / ss_tot,
        rmse_train=float(np.sqrt(ss_res / len(train))),
    )


def evaluate(model: AxisModel, test: list[Pair]) -> tuple[float, float]:
    """(R^2, RMSE) of ``model`` on held-out pairs.

    R^2 = 1 - SS_res / SS_tot about the held-out mean; RMSE = sqrt(SS_res / n).

    Raises:
        TooFewSamples: fewer than 2 test samples.
        ZeroVariance: held-out targets are constant.
    """
    if len(test) < 2:
        raise TooFewSamples(f"need at least 2 test samples, got {len(test)}")
    x_all, y_all = _as_arrays(test)
    y = y_all[:, model.axis]
    pred = model.predict(x_all[:, model.input_component])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance(f"wrench axis {model.axis} has zero variance on the test data")
    return 1.0 - ss_res / ss_tot, float(np.sqrt(ss_res / len(test)))


def calibrate(pairs: list[Pair], config: CalibrationConfig = CalibrationConfig()) -> CalibrationReport:
    """Split once, then fit and evaluate all six axes on the same partition.

    The six per-axis fits are independent of each other and share only the
    immutable partition.

    Raises:
        UncoveredAxis: if a wrench axis has no excitation in the data or in
        either side of the split.
    """
    _, y = _as_arrays(pairs) if pairs else (None, np.zeros((0, 6)))
    for axis in range(6):
        if y.shape[0] == 0 or np.ptp(y[:, axis]) == 0.0:
            raise UncoveredAxis(f"wrench axis {axis} ({_axis_name(axis)}) has no excitation")
    train, test = split(pairs, config.split_fraction, config.seed)
    # A global split can starve an axis at small sample counts; fail with an
    # actionable message rather than an undefined R^2 downstream.
    for name, part in (("training", train), ("held-out", test)):
        _, y_part = _as_arrays(part)
        for axis in range(6):
            if np.ptp(y_part[:, axis]) == 0.0:
                raise UncoveredAxis(
                    f"wrench axis {axis} ({_axis_name(axis)}) has no excitation in the "
                    f"{name} split; increase the sample count or change the split seed"
                )
    models = []
    for axis in range(6):
        model = fit_axis(train, axis, config.degree)
        r2_test, rmse_test = evaluate(model, test)
        models.append(replace(model, r2_test=r2_test, rmse_test=rmse_test))
    return CalibrationReport(
        models=tuple(models),
        split_fraction=config.split_fraction,
        split_seed=config.seed,
        sample_count=len(pairs),
    )


def _axis_name(axis: int) -> str:
    return ("fx", "fy", "fz", "tx", "ty", "tz")[axis]
