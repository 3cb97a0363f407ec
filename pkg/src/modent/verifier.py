"""Residual engines, seeded domain samplers and witness searches.

Every check draws its points from a :class:`SampleSpec`, evaluates the
residual in fixed-size chunks (optionally on a thread pool) and reduces to a
:class:`ResidualReport`.  Chunk boundaries do not depend on the number of
threads, so the report is bit-identical however the work is scheduled.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dsl
from .core import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DimensionError,
    DomainError,
    LogFn,
    MultFn,
    as_points,
    log_eval,
    mult_eval,
)
from .solutions import (
    CaseOne,
    CaseOther,
    CaseProjection,
    PsiFn,
    TriSolution,
    ZeroMu,
    derive_h,
    f_eval,
)

CHUNK = 4096
REGIONS = ("open_cube", "cone", "feim_d")
_CUBE_LO = 2.0 ** -53


@dataclass(frozen=True)
class SampleSpec:
    """Where and how many points to draw.

    ``cone`` samples log-uniformly in ``(lo, hi]`` per coordinate; when
    ``lo`` is 0 the effective lower edge is ``hi * 1e-4``.
    """

    k: int
    count: int
    seed: int
    region: str = "cone"
    lo: float = 0.0
    hi: float = 10.0

    def __post_init__(self):
        if self.k < 1 or self.count < 1:
            raise ValueError("SampleSpec needs k >= 1 and count >= 1")
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if not (0 <= self.lo < self.hi):
            raise ValueError(f"invalid cone bounds ({self.lo}, {self.hi}]")

    def with_(self, **changes) -> "SampleSpec":
        return SampleSpec(**{**self.to_json(), **changes})

    def to_json(self) -> dict:
        return {"k": self.k, "count": self.count, "seed": self.seed, "region": self.region, "lo": self.lo, "hi": self.hi}


def _cone(rng, spec, shape):
    lo = spec.lo if spec.lo > 0 else spec.hi * 1e-4
    pts = np.exp(rng.uniform(math.log(lo), math.log(spec.hi), size=shape))
    return np.clip(pts, np.nextafter(spec.lo, np.inf), spec.hi)


def _cube(rng, shape):
    return np.clip(rng.random(shape), _CUBE_LO, 1.0 - _CUBE_LO)


def draw(spec: SampleSpec, arity: int = 1, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Points of shape ``(count, arity, k)``; ``feim_d`` always yields pairs."""
    rng = rng or np.random.default_rng(spec.seed)
    n, k = spec.count, spec.k
    if spec.region == "cone":
        return _cone(rng, spec, (n, arity, k))
    if spec.region == "open_cube":
        return _cube(rng, (n, arity, k))
    x = _cube(rng, (n, k))
    y = rng.random((n, k)) * (1.0 - x)
    bad = ~(np.all(y > 0, axis=1) & np.all(x + y < 1, axis=1))
    while bad.any():
        m = int(bad.sum())
        x[bad] = _cube(rng, (m, k))
        y[bad] = rng.random((m, k)) * (1.0 - x[bad])
        bad = ~(np.all(y > 0, axis=1) & np.all(x + y < 1, axis=1))
    return np.stack([x, y], axis=1)


def in_region(spec: SampleSpec, pts: np.ndarray) -> bool:
    """The region predicate, evaluated exactly."""
    if spec.region == "cone":
        return bool(np.all(pts > spec.lo) and np.all(pts <= spec.hi))
    if spec.region == "open_cube":
        return bool(np.all(pts > 0) and np.all(pts < 1))
    x, y = pts[:, 0], pts[:, 1]
    return bool(np.all(x > 0) and np.all(y > 0) and np.all(x + y < 1))


# --- reports -------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    equation_id: str
    sample_count: int
    max_abs_residual: float
    mean_abs_residual: float
    argmax: list
    tolerance: float
    passed: bool
    seed: int

    def to_json(self) -> dict:
        return {
            "equation_id": self.equation_id,
            "sample_count": self.sample_count,
            "max_abs_residual": self.max_abs_residual,
            "mean_abs_residual": self.mean_abs_residual,
            "argmax": self.argmax,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ResidualReport":
        return cls(
            data["equation_id"], data["sample_count"], data["max_abs_residual"], data["mean_abs_residual"],
            data["argmax"], data["tolerance"], data["pass"], data["seed"],
        )


@dataclass(frozen=True)
class Witness:
    claim_id: str
    found: bool
    points: list
    violation: float

    def to_json(self) -> dict:
        return {"claim_id": self.claim_id, "found": self.found, "points": self.points, "violation": self.violation}


def run_residuals(
    equation_id: str,
    points: np.ndarray,
    fn: Callable,
    seed: int,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    threads: int = 1,
) -> ResidualReport:
    """Evaluate ``fn`` (batch -> (residual, scale)) over ``points`` and reduce.

    The tolerance is ``atol + rtol * max(scale)``, where ``scale`` is the
    magnitude of the largest term entering each residual.  Ties in the
    argmax go to the lowest sample index; the mean uses ``math.fsum`` so it
    does not depend on the reduction order.
    """
    n = len(points)
    bounds = [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]

    def work(b):
        res, scale = fn(points[b[0]:b[1]])
        return np.broadcast_to(res, (b[1] - b[0],)), np.broadcast_to(scale, (b[1] - b[0],))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    res = np.concatenate([p[0] for p in parts])
    scale = np.concatenate([p[1] for p in parts])
    abs_res = np.nan_to_num(np.abs(res), nan=np.inf)
    i = int(np.argmax(abs_res))
    max_abs = float(abs_res[i])
    tol = float(atol + rtol * np.nan_to_num(np.abs(scale), nan=0.0).max())
    return ResidualReport(
        equation_id=equation_id,
        sample_count=n,
        max_abs_residual=max_abs,
        mean_abs_residual=math.fsum(abs_res.tolist()) / n,
        argmax=np.asarray(points[i]).tolist(),
        tolerance=tol,
        passed=bool(max_abs <= tol),
        seed=seed,
    )


def _scale(*terms):
    return np.max(np.abs(np.stack([np.atleast_1d(t) for t in terms])), axis=0)


# --- residuals -----------------------------------------------------------

def _modified_terms(f, mu, x, y, z):
    yz = y + z
    lhs = f_eval(f, x, y, z)
    first = f_eval(f, x, yz, np.zeros_like(x))
    second = mult_eval(mu, yz) * f_eval(f, np.zeros_like(x), y / yz, z / yz)
    return lhs - first - second, _scale(lhs, first, second)


def _strict(*args):
    for a in args:
        if np.any(a <= 0):
            raise DomainError("residuals are sampled on strictly positive points")


def _triple(f, x, y, z):
    arrs = [as_points(a, f.k) for a in (x, y, z)]
    single = all(a.ndim == 1 for a in arrs)
    arrs = [np.atleast_2d(a) for a in arrs]
    n = max(a.shape[0] for a in arrs)
    arrs = [a if a.shape[0] == n else np.repeat(a, n, axis=0) for a in arrs]
    _strict(*arrs)
    return arrs, single


def _out(v, single):
    return float(v[0]) if single else v


def residual_modified(f: TriSolution, mu: MultFn, x, y, z):
    """``f(x,y,z) - f(x, y+z, 0) - mu(y+z) f(0, y/(y+z), z/(y+z))``."""
    (x, y, z), single = _triple(f, x, y, z)
    return _out(_modified_terms(f, mu, x, y, z)[0], single)


def _classic_terms(f, x, y, z):
    zero = np.zeros_like(x)
    lhs = f_eval(f, x, y, z)
    a = f_eval(f, x + y, z, zero)
    b = f_eval(f, x, y, zero)
    return lhs - a - b, _scale(lhs, a, b)


def _need_k1(f):
    if f.k != 1:
        raise DimensionError("this equation is stated for k = 1")


def residual_entropy_classic(f: TriSolution, x, y, z):
    """``f(x,y,z) - f(x+y, z, 0) - f(x, y, 0)``."""
    _need_k1(f)
    (x, y, z), single = _triple(f, x, y, z)
    return _out(_classic_terms(f, x, y, z)[0], single)


_IDENTITY = MultFn.identity()


def residual_ent_special(f: TriSolution, x, y, z):
    """The modified residual with ``mu(t) = t``."""
    _need_k1(f)
    return residual_modified(f, _IDENTITY, x, y, z)


def _in_d(x, y):
    if np.any(x <= 0) or np.any(y <= 0) or np.any(x + y >= 1):
        raise DomainError("FEIM pairs must satisfy x, y > 0 and x + y < 1")


def _feim_terms(h, mu, x, y):
    _in_d(x, y)
    a = h(x)
    b = mult_eval(mu, 1.0 - x) * h(y / (1.0 - x))
    c = h(y)
    d = mult_eval(mu, 1.0 - y) * h(x / (1.0 - y))
    return (a + b) - (c + d), _scale(a, b, c, d)


def residual_feim(h: Callable, mu: MultFn, x, y):
    """``h(x) + mu(1-x) h(y/(1-x)) - h(y) - mu(1-y) h(x/(1-y))`` on the set D."""
    x = as_points(x)
    y = as_points(y)
    single = x.ndim == 1 and y.ndim == 1
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    return _out(np.atleast_1d(_feim_terms(h, mu, x, y)[0]), single)


_PERMS = [p for p in itertools.permutations(range(3)) if p != (0, 1, 2)]


def _symmetry_terms(f, pts):
    args = [pts[:, 0], pts[:, 1], pts[:, 2]]
    base = f_eval(f, *args)
    worst = np.zeros_like(base)
    scale = np.abs(base)
    for p in _PERMS:
        other = f_eval(f, *(args[i] for i in p))
        worst = np.maximum(worst, np.nan_to_num(np.abs(other - base), nan=np.inf))
        scale = np.maximum(scale, np.abs(other))
    return worst, scale


# --- checks --------------------------------------------------------------

def _cone_spec(spec):
    return spec if spec.region == "cone" else spec.with_(region="cone")


def check_modified(f, mu=None, spec=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1, equation_id="modified"):
    mu = mu if mu is not None else f.declared_mu()
    if mu is None:
        raise ValueError("a multiplicative function is required for this solution")
    spec = _cone_spec(spec or SampleSpec(f.k, 100_000, 0))
    pts = draw(spec, 3)
    return run_residuals(
        equation_id, pts, lambda p: _modified_terms(f, mu, p[:, 0], p[:, 1], p[:, 2]), spec.seed, atol, rtol, threads
    )


def check_entropy_classic(f, spec=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    _need_k1(f)
    spec = _cone_spec(spec or SampleSpec(1, 100_000, 0))
    pts = draw(spec, 3)
    return run_residuals(
        "entropy_classic", pts, lambda p: _classic_terms(f, p[:, 0], p[:, 1], p[:, 2]), spec.seed, atol, rtol, threads
    )


def check_ent_special(f, spec=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    _need_k1(f)
    return check_modified(f, _IDENTITY, spec, atol, rtol, threads, equation_id="ent_special")


def check_feim(h, mu, spec, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    """FEIM residual of ``h`` (an HFn or a derived h) with multiplier ``mu`` on D."""
    spec = spec.with_(region="feim_d")
    pts = draw(spec)
    return run_residuals("feim", pts, lambda p: _feim_terms(h, mu, p[:, 0], p[:, 1]), spec.seed, atol, rtol, threads)


def check_h_symmetry(h, spec, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    """``|h(x) - h(1-x)|`` on the open unit cube."""
    spec = spec.with_(region="open_cube")
    pts = draw(spec)

    def fn(p):
        a, b = h(p[:, 0]), h(1.0 - p[:, 0])
        return a - b, _scale(a, b)

    return run_residuals("h_symmetry", pts, fn, spec.seed, atol, rtol, threads)


def check_symmetry(f, spec=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    """Largest ``|f(sigma(x,y,z)) - f(x,y,z)|`` over all permutations sigma."""
    spec = _cone_spec(spec or SampleSpec(f.k, 100_000, 0))
    pts = draw(spec, 3)
    return run_residuals("symmetry", pts, lambda p: _symmetry_terms(f, p), spec.seed, atol, rtol, threads)


def check_homogeneity(f, degree=1.0, spec=None, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, threads=1):
    """``|f(lam x, lam y, lam z) - lam**degree f(x, y, z)|`` with ``lam`` drawn from the cone."""
    spec = _cone_spec(spec or SampleSpec(f.k, 100_000, 0))
    rng = np.random.default_rng(spec.seed)
    pts = draw(spec, 3, rng)
    lam = _cone(rng, spec.with_(k=1), (spec.count, 1, 1))
    data = np.concatenate([pts, np.broadcast_to(lam, (spec.count, 1, spec.k))], axis=1)

    def fn(p):
        lam = p[:, 3, :1]
        scaled = f_eval(f, lam * p[:, 0], lam * p[:, 1], lam * p[:, 2])
        base = lam[:, 0] ** degree * f_eval(f, p[:, 0], p[:, 1], p[:, 2])
        return scaled - base, _scale(scaled, base)

    return run_residuals("homogeneity", data, fn, spec.seed, atol, rtol, threads)


# --- associativity -------------------------------------------------------

@dataclass(frozen=True)
class AssocResult:
    passed: bool
    phi: Callable
    witness: Witness
    reports: tuple = field(default=())


def bivariate_from_expr(source: str, k: int = 1) -> Callable:
    """``A(u, v)`` from a DSL expression in which ``x`` stands for u and ``y`` for v."""
    node = dsl.parse(source, k, ("x", "y"))

    def A(u, v):
        return dsl.evaluate(node, {"x": u, "y": v})

    return A


def exchange_gap(A: Callable, x, y, z) -> float:
    """``A(x, y+z) - A(y, x+z)``."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    return A(x, y + z) - A(y, x + z)


def check_associativity(A: Callable, spec: SampleSpec, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL) -> AssocResult:
    """Test whether ``A(u, v)`` depends only on ``u + v``.

    The candidate is ``phi(s) = A(s/2, s/2)``.  Both ``A(u,v) = phi(u+v)``
    and the exchange identity ``A(x, y+z) = A(y, x+z)`` must hold on every
    sampled triple.
    """
    spec = _cone_spec(spec)
    pts = draw(spec, 3)

    def phi(s):
        s = np.asarray(s, dtype=float)
        return A(s / 2.0, s / 2.0)

    def reduction(p):
        a = A(p[:, 0], p[:, 1])
        b = phi(p[:, 0] + p[:, 1])
        return a - b, _scale(a, b)

    def exchange(p):
        a = A(p[:, 0], p[:, 1] + p[:, 2])
        b = A(p[:, 1], p[:, 0] + p[:, 2])
        return a - b, _scale(a, b)

    with np.errstate(all="ignore"):
        red = run_residuals("assoc_reduction", pts, reduction, spec.seed, atol, rtol)
        exc = run_residuals("assoc_exchange", pts, exchange, spec.seed, atol, rtol)
    passed = red.passed and exc.passed
    worst = exc if exc.max_abs_residual / exc.tolerance >= red.max_abs_residual / red.tolerance else red
    witness = Witness("associativity", not passed, worst.argmax, worst.max_abs_residual)
    return AssocResult(passed, phi, witness, (red, exc))


# --- oracles -------------------------------------------------------------

def _symmetry_search(claim, fn, spec, min_gap):
    spec = spec.with_(region="open_cube")
    pts = draw(spec)[:, 0]
    gaps = np.abs(fn(pts) - fn(1.0 - pts))
    i = int(np.argmax(gaps))
    gap = float(gaps[i])
    return Witness(claim, bool(gap > min_gap), [pts[i].tolist()], gap)


def oracle_lemma_mult(mu: MultFn, spec: SampleSpec, min_gap: float = 0.0) -> Witness:
    """Search ]0,1[^k for ``|mu(x) - mu(1-x)| > min_gap``.

    Only the constant maps 1 and 0 are symmetric about the centre of the
    cube, so a witness exists exactly when ``mu`` is neither.
    """
    if spec.k != (mu.k or spec.k):
        raise DimensionError("sample dimension differs from mu")
    return _symmetry_search("lemma_mult_symmetry", lambda p: mult_eval(mu, p), spec, min_gap)


def oracle_lemma_log(l: LogFn, spec: SampleSpec, min_gap: float = 0.0) -> Witness:
    """Search ]0,1[^k for ``|l(x) - l(1-x)| > min_gap``; none exists for ``l == 0``."""
    if spec.k != l.k:
        raise DimensionError("sample dimension differs from l")
    return _symmetry_search("lemma_log_symmetry", lambda p: log_eval(l, p), spec, min_gap)


def default_solution(case: str, k: int) -> TriSolution:
    """A representative valid solution of each case, used by the normalization oracle."""
    if case == "projection":
        return CaseProjection(k, mu=MultFn.coordinate(0, k), l=LogFn.natural(k), psi=PsiFn.neg_x_log_x(k))
    if case == "one":
        return CaseOne(k, psi=PsiFn.neg_x_log_x(k))
    if case == "other":
        return CaseOther(k, mu=MultFn.power([2.0] * k), b=1.0, psi=PsiFn.const(-1.0, k))
    if case == "zero_mu":
        return ZeroMu(k, l=LogFn.natural(k), psi=PsiFn.neg_x_log_x(k))
    raise ValueError(f"no normalization constraint is attached to case {case!r}")


def oracle_normalization(
    case: str,
    delta: float,
    spec: SampleSpec,
    solution: Optional[TriSolution] = None,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
) -> Witness:
    """Shift psi(1) away from its required value by ``delta`` and look for a failing triple.

    For every case except ``zero_mu`` the residual equals
    ``-mu(y+z) * delta`` at each triple; the witness is the sampled triple
    with the largest violation.
    """
    if delta == 0:
        raise ValueError("delta must be nonzero")
    base = solution if solution is not None else default_solution(case, spec.k)
    if base.case != case:
        raise ValueError(f"solution is of case {base.case!r}, not {case!r}")
    broken = _replace_psi(base, base.psi.shifted(delta))
    report = check_modified(broken, base.declared_mu(), _cone_spec(spec), atol, rtol)
    return Witness(f"normalization_{case}", not report.passed, report.argmax, report.max_abs_residual)


def _replace_psi(f, psi):
    if isinstance(f, CaseProjection):
        return CaseProjection(f.k, mu=f.mu, l=f.l, psi=psi)
    if isinstance(f, CaseOne):
        return CaseOne(f.k, psi=psi)
    if isinstance(f, CaseOther):
        return CaseOther(f.k, mu=f.mu, b=f.b, psi=psi)
    if isinstance(f, ZeroMu):
        return ZeroMu(f.k, l=f.l, psi=psi)
    raise TypeError(f"{type(f).__name__} has no psi")


# --- classification ------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    case: str
    params: dict
    fit_residual: float
    note: str = ""

    def to_json(self) -> dict:
        return {"case": self.case, **self.params, "fit_residual": self.fit_residual, "note": self.note}


def _xlogx(t):
    return t * np.log(t) + (1.0 - t) * np.log(1.0 - t)


def classify(f, spec: Optional[SampleSpec] = None, tol: float = 1e-6) -> Classification:
    """Identify which solution family a k = 1 black-box solution belongs to.

    ``f`` is a :class:`TriSolution` or any callable ``f(x, y, z)`` accepting
    batches of shape ``(n, 1)`` and the zero vector.  The multiplier is
    recovered pointwise from the equation itself,
    ``mu(y+z) = (f(x,y,z) - f(x,y+z,0)) / f(0, y/(y+z), z/(y+z))``, and its
    exponent by log-log regression; the branch of ``h(t) = f(0, 1-t, t)``
    then fixes the remaining constants.  Anything that does not fit to
    ``tol`` comes back as ``unclassified``.
    """
    spec = spec or SampleSpec(1, 2000, 0)
    if spec.k != 1:
        raise DimensionError("classification is implemented for k = 1")
    ev = f if isinstance(f, TriSolution) else None

    def call(x, y, z):
        return f_eval(ev, x, y, z) if ev is not None else np.asarray(f(x, y, z), dtype=float)

    rng = np.random.default_rng(spec.seed)
    n = min(spec.count, 5000)
    t = np.sort(_cube(rng, (n, 1)), axis=0)
    t = t[(t[:, 0] > 1e-3) & (t[:, 0] < 1 - 1e-3)]
    h = np.atleast_1d(call(np.zeros_like(t), 1.0 - t, t))
    h_scale = max(1.0, float(np.abs(h).max()))
    spread = float(np.abs(h - h.mean()).max())

    if spread <= tol * h_scale:
        c = float(h.mean())
        if abs(c) <= tol * h_scale:
            return Classification(
                "one", {"psi_at_one": c}, spread, "h vanishes; zero_mu with Psi(1)=0 fits equally"
            )
        return Classification("zero_mu", {"psi_at_one": c}, spread, "h is a nonzero constant")

    pts = _cone(rng, spec.with_(lo=0.25, hi=4.0), (n, 3, 1))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    yz = y + z
    g = np.atleast_1d(call(np.zeros_like(x), y / yz, z / yz))
    num = np.atleast_1d(call(x, y, z)) - np.atleast_1d(call(x, yz, np.zeros_like(x)))
    keep = np.abs(g) > 1e-6 * h_scale
    if keep.sum() < 10:
        return Classification("unclassified", {}, math.inf, "too few points with h away from zero")
    m = num[keep] / g[keep]
    s = yz[keep, 0]
    if np.any(m <= 0):
        return Classification("unclassified", {}, math.inf, "recovered multiplier is not positive")
    slope, intercept = np.polyfit(np.log(s), np.log(m), 1)
    mu_fit = float(np.abs(np.log(m) - slope * np.log(s) - intercept).max())
    if mu_fit > tol or abs(intercept) > tol:
        return Classification("unclassified", {"alpha": [float(slope)]}, mu_fit, "multiplier is not a power map")
    alpha = float(slope)
    tt = t[:, 0]

    if abs(alpha - 1.0) <= tol:
        basis = _xlogx(tt)
        coef = float(basis @ h / (basis @ basis))
        fit = float(np.abs(h - coef * basis).max()) / h_scale
        if fit > tol:
            return Classification("unclassified", {"alpha": [alpha]}, fit, "h is not of projection shape")
        params = {"alpha": [alpha], "l": [coef]}
        if coef > 0:
            params["base"] = math.exp(1.0 / coef)
        return Classification("projection", params, fit)
    if abs(alpha) <= tol:
        return Classification("unclassified", {"alpha": [alpha]}, mu_fit, "mu = 1 but h is not constant")
    basis = tt ** alpha + (1.0 - tt) ** alpha - 1.0
    b = float(basis @ h / (basis @ basis))
    fit = float(np.abs(h - b * basis).max()) / h_scale
    if fit > tol:
        return Classification("unclassified", {"alpha": [alpha]}, fit, "h is not of the b(mu(1-t)+mu(t)-1) shape")
    return Classification("other", {"alpha": [alpha], "b": b}, fit)
