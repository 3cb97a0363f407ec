"""Positive-cone vectors and the continuous multiplicative / logarithmic families.

Every evaluator here accepts either a :class:`PosVec`, a plain sequence of
``k`` numbers, or a numpy array whose last axis has length ``k``.  A single
point evaluates to a Python float, a batch of shape ``(n, k)`` to an array
of shape ``(n,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-9


class DimensionError(ValueError):
    """Operands live in cones of different dimension."""


class DomainError(ValueError):
    """A point lies outside the domain on which a function is defined."""


@dataclass(frozen=True)
class PosVec:
    """A point of the nonnegative cone.

    ``closed=False`` (the default) means every coordinate is strictly
    positive; ``closed=True`` admits zero coordinates.
    """

    coords: tuple
    closed: bool = False

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not coords:
            raise DimensionError("PosVec needs at least one coordinate")
        if not all(math.isfinite(c) for c in coords):
            raise DomainError(f"non-finite coordinate in {coords}")
        if self.closed:
            if any(c < 0 for c in coords):
                raise DomainError(f"negative coordinate in {coords}")
        elif any(c <= 0 for c in coords):
            raise DomainError(f"nonpositive coordinate in strict vector {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def k(self) -> int:
        return len(self.coords)

    @property
    def strict(self) -> bool:
        return not self.closed

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype or float)

    @classmethod
    def ones(cls, k: int) -> "PosVec":
        return cls((1.0,) * k)

    @classmethod
    def zeros(cls, k: int) -> "PosVec":
        return cls((0.0,) * k, closed=True)


def _pair(a: PosVec, b: PosVec):
    if a.k != b.k:
        raise DimensionError(f"dimension mismatch: {a.k} vs {b.k}")
    return a.closed or b.closed


def cw_add(a: PosVec, b: PosVec) -> PosVec:
    closed = _pair(a, b)
    return PosVec(tuple(p + q for p, q in zip(a, b)), closed=closed)


def cw_mul(a: PosVec, b: PosVec) -> PosVec:
    closed = _pair(a, b)
    return PosVec(tuple(p * q for p, q in zip(a, b)), closed=closed)


def cw_div(a: PosVec, b: PosVec) -> PosVec:
    closed = _pair(a, b)
    if any(q <= 0 for q in b):
        raise DomainError(f"divisor {b.coords} is not strictly positive")
    return PosVec(tuple(p / q for p, q in zip(a, b)), closed=closed)


def cw_scale(a: PosVec, lam: float) -> PosVec:
    if not lam > 0:
        raise DomainError(f"scale factor must be positive, got {lam}")
    return PosVec(tuple(lam * p for p in a), closed=a.closed)


def as_points(x, k: Optional[int] = None) -> np.ndarray:
    """Coerce ``x`` to a float array whose last axis is the cone dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 2:
        raise DimensionError(f"expected a point or a batch of points, got shape {arr.shape}")
    if k is not None and arr.shape[-1] != k:
        raise DimensionError(f"expected dimension {k}, got {arr.shape[-1]}")
    return arr


def _finish(arr: np.ndarray, single: bool):
    return float(arr[0]) if single else arr


def _batch(x, k):
    arr = as_points(x, k)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


@dataclass(frozen=True)
class MultFn:
    """A continuous multiplicative function on the cone.

    ``kind`` is ``"zero"`` (the zero map) or ``"power"`` with
    ``mu(x) = prod_i x_i ** alpha_i``.  The zero map carries no exponents;
    its dimension ``k`` is optional and only used for dimension checks.
    """

    kind: str
    alpha: Optional[tuple] = None
    k: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "power":
            if self.alpha is None or len(self.alpha) == 0:
                raise ValueError("power kind requires a nonempty exponent vector")
            alpha = tuple(float(a) for a in self.alpha)
            if not all(math.isfinite(a) for a in alpha):
                raise ValueError(f"non-finite exponent in {alpha}")
            object.__setattr__(self, "alpha", alpha)
            object.__setattr__(self, "k", len(alpha))
        elif self.kind == "zero":
            if self.alpha is not None:
                raise ValueError("zero kind takes no exponents")
        else:
            raise ValueError(f"unknown multiplicative kind {self.kind!r}")

    @classmethod
    def zero(cls, k: Optional[int] = None) -> "MultFn":
        return cls("zero", None, k)

    @classmethod
    def power(cls, alpha: Sequence[float]) -> "MultFn":
        return cls("power", tuple(alpha))

    @classmethod
    def one(cls, k: int) -> "MultFn":
        return cls("power", (0.0,) * k)

    @classmethod
    def identity(cls) -> "MultFn":
        return cls("power", (1.0,))

    @classmethod
    def coordinate(cls, j: int, k: int) -> "MultFn":
        """The coordinate projection ``x -> x_j``."""
        if not 0 <= j < k:
            raise DimensionError(f"coordinate {j} out of range for k={k}")
        return cls("power", tuple(1.0 if i == j else 0.0 for i in range(k)))

    def __call__(self, x):
        return mult_eval(self, x)

    def components(self):
        """The one-dimensional factors ``mu_i`` with ``mu(x) = prod mu_i(x_i)``."""
        if self.kind == "zero":
            return [MultFn.zero(1)]
        return [MultFn.power([a]) for a in self.alpha]

    def to_json(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": "power", "alpha": list(self.alpha)}

    @classmethod
    def from_json(cls, data: dict, k: Optional[int] = None) -> "MultFn":
        kind = data.get("kind")
        if kind == "zero":
            return cls.zero(k)
        if kind == "power":
            mu = cls.power(data["alpha"])
            if k is not None and mu.k != k:
                raise DimensionError(f"exponent vector has length {mu.k}, expected {k}")
            return mu
        raise ValueError(f"unknown multiplicative kind {kind!r}")


def mult_eval(mu: MultFn, x):
    """Evaluate ``mu`` on the closed cone with ``0**0 = 1`` and ``0**a = 0`` for ``a > 0``."""
    arr, single = _batch(x, mu.k)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("multiplicative functions live on the nonnegative cone")
    if mu.kind == "zero":
        return _finish(np.zeros(arr.shape[0]), single)
    out = np.ones(arr.shape[0])
    for i, a in enumerate(mu.alpha):
        col = arr[:, i]
        if a < 0 and np.any(col == 0):
            raise DomainError(f"zero coordinate {i} with negative exponent {a}")
        if a != 0:
            out = out * np.power(col, a)
    return _finish(out, single)


@dataclass(frozen=True)
class LogFn:
    """A continuous logarithmic function ``l(x) = sum_i c_i ln x_i``."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("LogFn needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def k(self) -> int:
        return len(self.coeffs)

    @classmethod
    def zero(cls, k: int) -> "LogFn":
        return cls((0.0,) * k)

    @classmethod
    def natural(cls, k: int = 1, j: int = 0, base: float = math.e) -> "LogFn":
        """``x -> log_base(x_j)``."""
        scale = 1.0 / math.log(base)
        return cls(tuple(scale if i == j else 0.0 for i in range(k)))

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __call__(self, x):
        return log_eval(self, x)

    def components(self):
        return [LogFn((c,)) for c in self.coeffs]

    def to_json(self) -> dict:
        return {"coeffs": list(self.coeffs)}

    @classmethod
    def from_json(cls, data: dict, k: Optional[int] = None) -> "LogFn":
        l = cls(data["coeffs"])
        if k is not None and l.k != k:
            raise DimensionError(f"coefficient vector has length {l.k}, expected {k}")
        return l


def log_eval(l: LogFn, x):
    arr, single = _batch(x, l.k)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("logarithmic functions need strictly positive coordinates")
    out = np.zeros(arr.shape[0])
    for i, c in enumerate(l.coeffs):
        if c != 0:
            out = out + c * np.log(arr[:, i])
    return _finish(out, single)


def is_zero(mu: MultFn) -> bool:
    return mu.kind == "zero"


def is_one(mu: MultFn) -> bool:
    return mu.kind == "power" and all(a == 0 for a in mu.alpha)


def _structural_projection(mu: MultFn) -> bool:
    if mu.kind == "zero":
        return True
    return sorted(mu.alpha) == [0.0] * (mu.k - 1) + [1.0]


def _log_uniform(rng: np.random.Generator, shape, lo=1e-3, hi=10.0) -> np.ndarray:
    pts = np.exp(rng.uniform(math.log(lo), math.log(hi), size=shape))
    return np.clip(pts, lo, hi)


@dataclass(frozen=True)
class ProbeResult:
    max_deviation: float
    worst: tuple
    passed: bool


def additivity_probe(mu: MultFn, n: int = 200, seed: int = 0, rtol: float = DEFAULT_RTOL) -> ProbeResult:
    """Largest relative gap ``|mu(x+y) - mu(x) - mu(y)| / (1 + |mu(x+y)|)`` over sampled pairs.

    The all-ones pair is always included so that an additivity failure is
    caught deterministically even for small ``n``.
    """
    k = mu.k or 1
    rng = np.random.default_rng(seed)
    x = np.vstack([np.ones(k), _log_uniform(rng, (n, k))])
    y = np.vstack([np.ones(k), _log_uniform(rng, (n, k))])
    lhs = mult_eval(mu, x + y)
    dev = np.abs(lhs - mult_eval(mu, x) - mult_eval(mu, y)) / (1.0 + np.abs(lhs))
    i = int(np.argmax(dev))
    worst = (tuple(x[i]), tuple(y[i]))
    return ProbeResult(float(dev[i]), worst, bool(dev[i] <= rtol))


def is_projection(mu: MultFn, n: int = 200, seed: int = 0) -> bool:
    """True for the zero map and the coordinate maps, confirmed by an additivity probe."""
    if not _structural_projection(mu):
        return False
    probe = additivity_probe(mu, n, seed)
    if not probe.passed:
        raise AssertionError(f"structural projection {mu} failed additivity at {probe.worst}")
    return True


def projection_counterexample(mu: MultFn, n: int = 200, seed: int = 0):
    """A pair ``(x, y)`` with ``mu(x+y) != mu(x) + mu(y)``, or None for projections."""
    probe = additivity_probe(mu, n, seed)
    if probe.passed:
        return None
    return probe.worst


def mult_property_probe(mu: MultFn, n: int = 1000, seed: int = 0) -> float:
    """Max relative deviation ``|mu(xy) - mu(x)mu(y)| / (1 + |mu(xy)|)`` on sampled pairs."""
    k = mu.k or 1
    rng = np.random.default_rng(seed)
    x = _log_uniform(rng, (n, k))
    y = _log_uniform(rng, (n, k))
    lhs = mult_eval(mu, x * y)
    dev = np.abs(lhs - mult_eval(mu, x) * mult_eval(mu, y)) / (1.0 + np.abs(lhs))
    return float(dev.max())


def log_property_probe(l: LogFn, n: int = 1000, seed: int = 0) -> float:
    """Max absolute deviation ``|l(xy) - l(x) - l(y)|`` on sampled pairs."""
    rng = np.random.default_rng(seed)
    x = _log_uniform(rng, (n, l.k))
    y = _log_uniform(rng, (n, l.k))
    return float(np.abs(log_eval(l, x * y) - log_eval(l, x) - log_eval(l, y)).max())
