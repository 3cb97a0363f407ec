"""Solution families of the modified entropy equation

    f(x, y, z) = f(x, y+z, 0) + mu(y+z) * f(0, y/(y+z), z/(y+z))

and of the fundamental equation of information of multiplicative type,
together with the derived views ``F(u, v) = f(0, u, v)`` and
``h(t) = F(1 - t, t)``.

Solutions are plain frozen dataclasses and can be built in any state (so a
broken descriptor can still be loaded and checked).  The ``make_*``
constructors enforce the normalization constraint at the all-ones vector
that makes each family an actual solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dsl
from .core import (
    DimensionError,
    DomainError,
    LogFn,
    MultFn,
    as_points,
    is_one,
    is_projection,
    is_zero,
    mult_eval,
)

EXPR_TOL = 1e-9


class NormalizationError(ValueError):
    """Parameters violate the value psi must take at the all-ones vector."""


def _log_scale(base: float) -> float:
    if not (base > 0 and base != 1 and math.isfinite(base)):
        raise ValueError(f"invalid logarithm base {base}")
    return 1.0 / math.log(base)


# --- psi -----------------------------------------------------------------

@dataclass(frozen=True)
class PsiFn:
    """Scalar function of the cone used as psi_1/psi_2/psi_3/Psi.

    kinds: ``const`` (``c``), ``linear`` (``s -> sum a_i s_i``),
    ``neg_x_log_x`` (``s -> -sum s_i log s_i`` in ``base``) and ``expr``
    (a DSL expression over ``s[0..k-1]``).  ``offset`` is added to every
    value; it exists so the normalization oracle can shift psi(1).
    """

    kind: str
    k: int
    c: float = 0.0
    a: Optional[tuple] = None
    base: float = math.e
    source: Optional[str] = None
    offset: float = 0.0
    node: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise DimensionError("psi needs k >= 1")
        if self.kind == "linear":
            if self.a is None or len(self.a) != self.k:
                raise DimensionError(f"linear psi needs {self.k} coefficients")
            object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        elif self.kind == "neg_x_log_x":
            _log_scale(self.base)
        elif self.kind == "expr":
            if not self.source:
                raise ValueError("expr psi needs a source string")
            object.__setattr__(self, "node", dsl.parse(self.source, self.k, dsl.PSI_VARS))
        elif self.kind != "const":
            raise ValueError(f"unknown psi kind {self.kind!r}")

    @classmethod
    def const(cls, c: float, k: int = 1) -> "PsiFn":
        return cls("const", k, c=float(c))

    @classmethod
    def linear(cls, a) -> "PsiFn":
        return cls("linear", len(a), a=tuple(a))

    @classmethod
    def neg_x_log_x(cls, k: int = 1, base: float = math.e) -> "PsiFn":
        return cls("neg_x_log_x", k, base=float(base))

    @classmethod
    def expr(cls, source: str, k: int = 1) -> "PsiFn":
        return cls("expr", k, source=source)

    def shifted(self, delta: float) -> "PsiFn":
        return PsiFn(self.kind, self.k, self.c, self.a, self.base, self.source, self.offset + delta)

    @property
    def builtin(self) -> bool:
        return self.kind != "expr"

    def __call__(self, s):
        arr = as_points(s, self.k)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if np.any(arr <= 0):
            raise DomainError("psi is defined on strictly positive vectors")
        n = arr.shape[0]
        if self.kind == "const":
            out = np.full(n, self.c)
        elif self.kind == "linear":
            out = np.zeros(n)
            for i, ai in enumerate(self.a):
                out = out + ai * arr[:, i]
        elif self.kind == "neg_x_log_x":
            out = np.zeros(n)
            for i in range(self.k):
                out = out - arr[:, i] * np.log(arr[:, i])
            out = out * _log_scale(self.base)
        else:
            out = np.atleast_1d(dsl.evaluate(self.node, {"s": arr}))
        if self.offset:
            out = out + self.offset
        return float(out[0]) if single else out

    def at_one(self) -> float:
        """psi at the all-ones vector, exact for builtin kinds."""
        if self.kind == "const":
            v = self.c
        elif self.kind == "linear":
            v = math.fsum(self.a)
        elif self.kind == "neg_x_log_x":
            v = 0.0
        else:
            v = dsl.evaluate(self.node, {"s": np.ones(self.k)})
        return v + self.offset

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "const":
            out["c"] = self.c
        elif self.kind == "linear":
            out["a"] = list(self.a)
        elif self.kind == "neg_x_log_x":
            out["base"] = self.base
        else:
            out["expr"] = self.source
        if self.offset:
            out["offset"] = self.offset
        return out

    @classmethod
    def from_json(cls, data: dict, k: int) -> "PsiFn":
        kind = data.get("kind")
        offset = float(data.get("offset", 0.0))
        if kind == "const":
            return cls("const", k, c=float(data["c"]), offset=offset)
        if kind == "linear":
            return cls("linear", k, a=tuple(data["a"]), offset=offset)
        if kind == "neg_x_log_x":
            return cls("neg_x_log_x", k, base=float(data.get("base", math.e)), offset=offset)
        if kind == "expr":
            return cls("expr", k, source=data["expr"], offset=offset)
        raise ValueError(f"unknown psi kind {kind!r}")


# --- three-variable solutions -------------------------------------------

def _rows(arg, k, name):
    """Split a batch into zero-vector rows and strictly positive rows."""
    zero = np.all(arg == 0, axis=1)
    pos = np.all(arg > 0, axis=1)
    if not np.all(zero | pos):
        raise DomainError(f"argument {name} has a zero coordinate inside an otherwise positive vector")
    return zero


def _zero_aware(fn, arg, zero, at_zero):
    safe = np.where(zero[:, None], 1.0, arg)
    return np.where(zero, at_zero, fn(safe))


def _mu_at_zero(mu: MultFn) -> float:
    # mu(0) = mu(0) mu(x) forces mu(0) = 0 unless mu == 1
    return 1.0 if is_one(mu) else 0.0


@dataclass(frozen=True)
class TriSolution:
    k: int

    case = ""

    def __call__(self, x, y, z):
        return f_eval(self, x, y, z)

    def declared_mu(self) -> Optional[MultFn]:
        return None

    def to_descriptor(self) -> dict:
        return {"k": self.k, "case": self.case}


@dataclass(frozen=True)
class CaseProjection(TriSolution):
    """``sum mu(t) l(t) + psi(x+y+z)`` with ``mu`` a projection."""

    mu: MultFn = None
    l: LogFn = None
    psi: PsiFn = None
    case = "projection"

    def declared_mu(self):
        return self.mu

    def _eval(self, args, s):
        out = None
        for name, t in zip("xyz", args):
            zero = _rows(t, self.k, name)
            term = _zero_aware(lambda p: mult_eval(self.mu, p) * self.l(p), t, zero, 0.0)
            out = term if out is None else out + term
        return out + self.psi(s)

    def to_descriptor(self):
        return {**super().to_descriptor(), "mu": self.mu.to_json(), "l": self.l.to_json(), "psi": self.psi.to_json()}


@dataclass(frozen=True)
class CaseOne(TriSolution):
    """``psi(x+y+z)`` for ``mu == 1``."""

    psi: PsiFn = None
    case = "one"

    def declared_mu(self):
        return MultFn.one(self.k)

    def _eval(self, args, s):
        for name, t in zip("xyz", args):
            _rows(t, self.k, name)
        return self.psi(s)

    def to_descriptor(self):
        return {**super().to_descriptor(), "psi": self.psi.to_json()}


@dataclass(frozen=True)
class CaseOther(TriSolution):
    """``b (mu(x) + mu(y) + mu(z)) + psi(x+y+z)`` for every other ``mu``."""

    mu: MultFn = None
    b: float = 0.0
    psi: PsiFn = None
    case = "other"

    def declared_mu(self):
        return self.mu

    def _eval(self, args, s):
        at_zero = _mu_at_zero(self.mu)
        total = None
        for name, t in zip("xyz", args):
            zero = _rows(t, self.k, name)
            term = _zero_aware(lambda p: mult_eval(self.mu, p), t, zero, at_zero)
            total = term if total is None else total + term
        return self.b * total + self.psi(s)

    def to_descriptor(self):
        return {**super().to_descriptor(), "mu": self.mu.to_json(), "b": self.b, "psi": self.psi.to_json()}


@dataclass(frozen=True)
class ZeroMu(TriSolution):
    """``mu == 0``: the logarithmic terms vanish and ``f = Psi(x+y+z)``."""

    l: LogFn = None
    psi: PsiFn = None
    case = "zero_mu"

    def declared_mu(self):
        return MultFn.zero(self.k)

    def _eval(self, args, s):
        for name, t in zip("xyz", args):
            _rows(t, self.k, name)
        return self.psi(s)

    def to_descriptor(self):
        return {**super().to_descriptor(), "l": self.l.to_json(), "psi": self.psi.to_json()}


@dataclass(frozen=True)
class Shannon(TriSolution):
    """``x log x + y log y + z log z - (x+y+z) log(x+y+z)`` with ``0 log 0 = 0`` (k = 1)."""

    base: float = math.e
    case = "shannon"

    def __post_init__(self):
        if self.k != 1:
            raise DimensionError("the Shannon solution is defined for k = 1 only")
        _log_scale(self.base)

    def declared_mu(self):
        return MultFn.identity()

    def _eval(self, args, s):
        scale = _log_scale(self.base)
        out = None
        for t in args:
            t = t[:, 0]
            term = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
            out = term if out is None else out + term
        s = s[:, 0]
        return (out - s * np.log(s)) * scale

    def to_descriptor(self):
        return {**super().to_descriptor(), "base": self.base}


@dataclass(frozen=True)
class UserExpr(TriSolution):
    """An arbitrary DSL expression over ``x``, ``y``, ``z``."""

    source: str = ""
    node: object = field(default=None, compare=False, repr=False)
    case = "expr"

    def __post_init__(self):
        object.__setattr__(self, "node", dsl.parse(self.source, self.k, dsl.F_VARS))

    def _eval(self, args, s):
        x, y, z = args
        return np.atleast_1d(dsl.evaluate(self.node, {"x": x, "y": y, "z": z}))

    def to_descriptor(self):
        return {**super().to_descriptor(), "expr": self.source}


def f_eval(f: TriSolution, x, y, z):
    """Evaluate ``f`` at one triple or a batch of triples.

    Arguments must be nonnegative with a strictly positive sum.  Apart from
    the Shannon and user-expression cases, each argument has to be either
    strictly positive or the zero vector.
    """
    arrs = [as_points(a, f.k) for a in (x, y, z)]
    single = all(a.ndim == 1 for a in arrs)
    n = max(np.atleast_2d(a).shape[0] for a in arrs)
    batch = []
    for a in arrs:
        a = np.atleast_2d(a)
        if a.shape[0] != n:
            a = np.repeat(a, n, axis=0)
        batch.append(a)
    if any(np.any(a < 0) or not np.all(np.isfinite(a)) for a in batch):
        raise DomainError("solutions are defined on the nonnegative cone")
    s = batch[0] + batch[1] + batch[2]
    if np.any(s <= 0):
        raise DomainError("x + y + z must be strictly positive")
    with np.errstate(all="ignore"):
        out = f._eval(batch, s)
    return float(out[0]) if single else out


def derive_F(f: TriSolution) -> Callable:
    """``F(u, v) = f(0, u, v)``."""

    def F(u, v):
        u = as_points(u, f.k)
        return f_eval(f, np.zeros_like(u), u, v)

    return F


def derive_h(f: TriSolution) -> Callable:
    """``h(t) = F(1 - t, t)`` on the open unit cube."""
    F = derive_F(f)

    def h(t):
        t = as_points(t, f.k)
        if np.any(t <= 0) or np.any(t >= 1):
            raise DomainError("h is defined on the open unit cube")
        return F(1.0 - t, t)

    return h


def derive_H(f: TriSolution) -> Callable:
    """``F`` with the per-argument terms removed; a function of ``u + v`` alone for solutions.

    projection / Shannon: ``F(u,v) - mu(u) l(u) - mu(v) l(v)``;
    other: ``F(u,v) - b mu(u) - b mu(v)``; every other case: ``F`` itself.
    """
    F = derive_F(f)
    if isinstance(f, Shannon):
        mu, l = MultFn.identity(), LogFn.natural(1, base=f.base)
        return lambda u, v: F(u, v) - mu(u) * l(u) - mu(v) * l(v)
    if isinstance(f, CaseProjection):
        return lambda u, v: F(u, v) - f.mu(u) * f.l(u) - f.mu(v) * f.l(v)
    if isinstance(f, CaseOther):
        return lambda u, v: F(u, v) - f.b * f.mu(u) - f.b * f.mu(v)
    return F


# --- FEIM branches -------------------------------------------------------

@dataclass(frozen=True)
class HFn:
    """A solution branch of the fundamental equation of information.

    ``projection``: ``mu(1-x) l(1-x) + mu(x) (l(x) + c)``
    ``one``:        ``l(1-x) + c``
    ``other``:      ``b mu(1-x) + c mu(x) - b``
    """

    branch: str
    k: int
    mu: Optional[MultFn] = None
    l: Optional[LogFn] = None
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.branch not in ("projection", "one", "other"):
            raise ValueError(f"unknown FEIM branch {self.branch!r}")
        if self.branch in ("projection", "one") and self.l is None:
            raise ValueError(f"{self.branch} branch needs a logarithmic function")
        if self.branch in ("projection", "other") and self.mu is None:
            raise ValueError(f"{self.branch} branch needs a multiplicative function")

    @classmethod
    def projection(cls, mu, l, c=0.0):
        return cls("projection", l.k, mu=mu, l=l, c=float(c))

    @classmethod
    def one(cls, l, c=0.0):
        return cls("one", l.k, l=l, c=float(c))

    @classmethod
    def other(cls, mu, b, c, k=None):
        return cls("other", k or mu.k, mu=mu, b=float(b), c=float(c))

    def is_symmetric_form(self) -> bool:
        if self.branch == "projection":
            return self.c == 0 or is_zero(self.mu)
        if self.branch == "one":
            return self.l.is_zero()
        return self.b == self.c

    def __call__(self, x):
        return h_eval(self, x)


def h_eval(h: HFn, x):
    arr = as_points(x, h.k)
    single = arr.ndim == 1
    x = np.atleast_2d(arr)
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("FEIM branches are evaluated on the open unit cube")
    y = 1.0 - x
    if h.branch == "projection":
        out = mult_eval(h.mu, y) * h.l(y) + mult_eval(h.mu, x) * (h.l(x) + h.c)
    elif h.branch == "one":
        out = h.l(y) + h.c
    else:
        out = h.b * mult_eval(h.mu, y) + h.c * mult_eval(h.mu, x) - h.b
    return float(out[0]) if single else out


def expected_h(f: TriSolution) -> HFn:
    """The FEIM branch that ``derive_h(f)`` reproduces for a constructor-built ``f``."""
    if isinstance(f, Shannon):
        return HFn.projection(MultFn.identity(), LogFn.natural(1, base=f.base))
    if isinstance(f, CaseProjection) and not is_zero(f.mu):
        return HFn.projection(f.mu, f.l, 0.0)
    if isinstance(f, CaseOther):
        return HFn.other(f.mu, f.b, f.b, f.k)
    if isinstance(f, (CaseOne, ZeroMu, CaseProjection)):
        return HFn.one(LogFn.zero(f.k), f.psi.at_one())
    raise TypeError(f"no FEIM branch is associated with {type(f).__name__}")


# --- validated constructors ---------------------------------------------

@dataclass(frozen=True)
class ConstraintCheck:
    label: str
    required: Optional[float]
    actual: Optional[float]
    ok: bool

    def message(self) -> str:
        if self.required is None:
            return f"{self.label}: none required"
        status = "ok" if self.ok else f"FAILED (got {self.actual!r})"
        return f"{self.label}={self.required!r}: {status}"


def normalization_check(f: TriSolution, tol: float = EXPR_TOL) -> ConstraintCheck:
    """The psi(1) condition ``f`` must meet to satisfy the equation with its declared mu."""
    if isinstance(f, (Shannon, UserExpr, ZeroMu)) or (isinstance(f, CaseProjection) and is_zero(f.mu)):
        return ConstraintCheck("psi(1)", None, None, True)
    required = -f.b if isinstance(f, CaseOther) else 0.0
    actual = f.psi.at_one()
    if f.psi.builtin:
        ok = actual == required
    else:
        ok = abs(actual - required) <= tol
    return ConstraintCheck("psi(1)", required, actual, bool(ok))


def _require(f: TriSolution) -> TriSolution:
    check = normalization_check(f)
    if not check.ok:
        raise NormalizationError(
            f"{f.case} case requires psi(1) = {check.required!r}, got {check.actual!r}"
        )
    return f


def _same_k(k, *objs):
    for o in objs:
        if o is not None and getattr(o, "k", None) not in (None, k):
            raise DimensionError(f"component of dimension {o.k} in a k={k} solution")


def make_projection(mu: MultFn, l: LogFn, psi: PsiFn) -> CaseProjection:
    k = l.k
    _same_k(k, mu, psi)
    if not is_projection(mu):
        raise ValueError(f"{mu} is not a projection")
    return _require(CaseProjection(k, mu=mu, l=l, psi=psi))


def make_one(psi: PsiFn) -> CaseOne:
    return _require(CaseOne(psi.k, psi=psi))


def make_other(mu: MultFn, b: float, psi: PsiFn) -> CaseOther:
    _same_k(psi.k, mu)
    if mu.kind != "power" or is_one(mu) or is_projection(mu):
        raise ValueError("the 'other' case needs a power map that is neither 1 nor a projection")
    return _require(CaseOther(psi.k, mu=mu, b=float(b), psi=psi))


def make_zero_mu(l: LogFn, psi: PsiFn) -> ZeroMu:
    _same_k(l.k, psi)
    return ZeroMu(l.k, l=l, psi=psi)


def make_shannon(base: float = math.e) -> Shannon:
    return Shannon(1, base=float(base))


def make_user(source: str, k: int) -> UserExpr:
    return UserExpr(k, source=source)


# --- descriptors ---------------------------------------------------------

def from_descriptor(data: dict) -> TriSolution:
    """Load a solution descriptor without enforcing the normalization constraint."""
    k = int(data["k"])
    case = data["case"]
    if case == "projection":
        return CaseProjection(
            k,
            mu=MultFn.from_json(data["mu"], k),
            l=LogFn.from_json(data["l"], k),
            psi=PsiFn.from_json(data["psi"], k),
        )
    if case == "one":
        return CaseOne(k, psi=PsiFn.from_json(data["psi"], k))
    if case == "other":
        return CaseOther(
            k, mu=MultFn.from_json(data["mu"], k), b=float(data["b"]), psi=PsiFn.from_json(data["psi"], k)
        )
    if case == "zero_mu":
        l = LogFn.from_json(data["l"], k) if "l" in data else LogFn.zero(k)
        return ZeroMu(k, l=l, psi=PsiFn.from_json(data["psi"], k))
    if case == "shannon":
        return Shannon(k, base=float(data.get("base", math.e)))
    if case == "expr":
        return UserExpr(k, source=data["expr"])
    raise ValueError(f"unknown solution case {case!r}")


# --- corollary helpers ---------------------------------------------------

def phi_from_l(l: LogFn) -> Callable:
    """``phi(x) = x l(x)``, which satisfies ``phi(xy) = x phi(y) + y phi(x)``."""
    if l.k != 1:
        raise DimensionError("phi_from_l is defined for k = 1")

    def phi(x):
        arr = np.asarray(x, dtype=float)
        out = arr * l(arr.reshape(-1, 1)).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    return phi


def psi_homogeneity_form(psi1_at_1: float, base: float = math.e) -> Callable:
    """``lam -> -lam log(lam) + lam * psi1_at_1``, the psi forced by degree-1 homogeneity."""
    scale = _log_scale(base)

    def psi(lam):
        lam = np.asarray(lam, dtype=float)
        out = -lam * np.log(lam) * scale + lam * psi1_at_1
        return float(out) if out.ndim == 0 else out

    return psi


def shannon_from_homogeneity(psi1_at_1: float = 0.0, base: float = math.e) -> Callable:
    """``f = x log x + y log y + z log z + psi(x+y+z)`` with psi from :func:`psi_homogeneity_form`."""
    scale = _log_scale(base)
    psi = psi_homogeneity_form(psi1_at_1, base)

    def f(x, y, z):
        x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
        terms = sum(v * np.log(v) * scale for v in (x, y, z))
        return terms + psi(x + y + z)

    return f
