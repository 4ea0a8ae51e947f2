"""Conjugate Bayesian linear regression on engineered features.

The model is the standard normal-inverse-gamma (NIG) family:

    y | beta, s2  ~  Normal(X beta, s2 I)
    beta | s2     ~  Normal(m, s2 V)
    s2            ~  InverseGamma(a, c)        (shape a, rate c)

Posteriors, marginal likelihoods and predictive distributions are all exact.
Internally a posterior is stored in natural-statistic form

    prec  = V0^-1 + sum X'X
    shift = V0^-1 m0 + sum X'y
    quad  = c0 + (m0' V0^-1 m0)/2 + sum (y'y)/2
    shape = a0 + n/2

so that sequential updating and batch fitting are the same additions and
agree to floating-point accuracy.  The derived classical parameters are

    V = prec^-1,  m = V shift,  a = shape,  c = quad - (shift' m)/2.

Predictives are location-scale Student-t mixtures on the response (log) scale
and can be discretized to a nonnegative-integer ozone distribution with
half-integer bin edges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import gammaln, logsumexp
from scipy.stats import t as student_t

from .data import Dataset, SchemaError

LOG_2PI = math.log(2.0 * math.pi)


class ConditioningError(ArithmeticError):
    """A symmetric positive definite factorization failed."""


class ImproperPriorError(ValueError):
    """Prior or posterior hyperparameters are not a proper distribution."""


class DivergenceError(ArithmeticError):
    """A requested expectation does not exist (heavy tails)."""


class NumericalWarning(UserWarning):
    """Numerically degenerate but recoverable situation."""


# ---------------------------------------------------------------------------
# Feature transforms and design specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureTransform:
    """One engineered predictor column.

    kind:
      identity            (x - center) / scale    (defaults give plain x)
      log                 ln(x), requires x > 0
      quadratic           ((x - center) / scale)^2
      sine                sin(2 pi (x + phase) / period)
      indicator           1 when x == value else 0
      piecewise           max(0, x - knot)         (hinge at the knot)
      lagged              x shifted down by `lag` rows, front-filled
      interaction         product of two child transforms
    """

    kind: str
    col: str = ""
    period: float = 0.0
    phase: float = 0.0
    value: float = 0.0
    knot: float = 0.0
    center: float = 0.0
    scale: float = 1.0
    lag: int = 1
    of: tuple = ()

    KINDS = ("identity", "log", "quadratic", "sine", "indicator",
             "piecewise", "lagged", "interaction")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown transform kind: {self.kind!r}")
        if self.kind == "sine" and self.period <= 0:
            raise ValueError("sine transform requires period > 0")
        if self.kind in ("identity", "quadratic") and self.scale == 0:
            raise ValueError(f"{self.kind} transform requires scale != 0")
        if self.kind == "lagged" and self.lag < 1:
            raise ValueError("lagged transform requires lag >= 1")
        if self.kind == "interaction":
            if len(self.of) != 2 or not all(isinstance(t, FeatureTransform) for t in self.of):
                raise ValueError("interaction requires exactly two child transforms")

    @property
    def label(self) -> str:
        if self.kind == "identity":
            return self.col
        if self.kind == "quadratic":
            return f"{self.col}^2"
        if self.kind == "interaction":
            return f"{self.of[0].label}:{self.of[1].label}"
        if self.kind == "indicator":
            return f"{self.col}=={self.value:g}"
        if self.kind == "piecewise":
            return f"({self.col}-{self.knot:g})+"
        if self.kind == "sine":
            return f"sin({self.col})"
        if self.kind == "lagged":
            return f"{self.col}[-{self.lag}]"
        return f"{self.kind}({self.col})"

    def source_columns(self) -> set[str]:
        if self.kind == "interaction":
            return self.of[0].source_columns() | self.of[1].source_columns()
        return {self.col}

    def apply(self, data: Dataset) -> np.ndarray:
        if self.kind == "interaction":
            return self.of[0].apply(data) * self.of[1].apply(data)
        x = data.column(self.col)
        if self.kind == "identity":
            return (x - self.center) / self.scale
        if self.kind == "log":
            if np.any(x <= 0):
                raise ValueError(f"log transform of non-positive values in {self.col!r}")
            return np.log(x)
        if self.kind == "quadratic":
            return ((x - self.center) / self.scale) ** 2
        if self.kind == "sine":
            return np.sin(2.0 * math.pi * (x + self.phase) / self.period)
        if self.kind == "indicator":
            return (x == self.value).astype(float)
        if self.kind == "piecewise":
            return np.maximum(0.0, x - self.knot)
        if self.kind == "lagged":
            out = np.empty_like(x)
            out[self.lag:] = x[:-self.lag] if self.lag > 0 else x
            out[:self.lag] = x[0]
            return out
        raise AssertionError(self.kind)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind == "interaction":
            cfg["of"] = [t.to_config() for t in self.of]
            return cfg
        cfg["col"] = self.col
        if self.kind == "sine":
            cfg["period"] = self.period
            if self.phase:
                cfg["phase"] = self.phase
        elif self.kind == "indicator":
            cfg["value"] = self.value
        elif self.kind == "piecewise":
            cfg["knot"] = self.knot
        elif self.kind in ("identity", "quadratic"):
            if self.center:
                cfg["center"] = self.center
            if self.scale != 1.0:
                cfg["scale"] = self.scale
        elif self.kind == "lagged":
            cfg["lag"] = self.lag
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "FeatureTransform":
        cfg = dict(cfg)
        kind = cfg.pop("kind")
        if kind == "interaction":
            children = tuple(cls.from_config(c) for c in cfg.pop("of"))
            return cls(kind="interaction", of=children)
        return cls(kind=kind, **cfg)


def identity(col: str, center: float = 0.0, scale: float = 1.0) -> FeatureTransform:
    return FeatureTransform("identity", col, center=center, scale=scale)


def quadratic(col: str, center: float = 0.0, scale: float = 1.0) -> FeatureTransform:
    return FeatureTransform("quadratic", col, center=center, scale=scale)


def sine(col: str, period: float, phase: float = 0.0) -> FeatureTransform:
    return FeatureTransform("sine", col, period=period, phase=phase)


def indicator(col: str, value: float) -> FeatureTransform:
    return FeatureTransform("indicator", col, value=value)


def piecewise(col: str, knot: float) -> FeatureTransform:
    return FeatureTransform("piecewise", col, knot=knot)


def interaction(a: FeatureTransform, b: FeatureTransform) -> FeatureTransform:
    return FeatureTransform("interaction", of=(a, b))


@dataclass(frozen=True)
class ResponseSpec:
    """Which column is modeled, and whether on the natural-log scale."""

    column: str = "upo3"
    log: bool = True

    def apply(self, data: Dataset) -> np.ndarray:
        y = data.column(self.column)
        if self.log:
            if np.any(y < 1):
                raise ValueError(f"log response requires {self.column} >= 1")
            return np.log(y)
        return y.copy()

    def to_config(self) -> dict:
        return {"column": self.column, "log": self.log}

    @classmethod
    def from_config(cls, cfg: dict) -> "ResponseSpec":
        return cls(str(cfg.get("column", "upo3")), bool(cfg.get("log", True)))


@dataclass(frozen=True)
class DesignSpec:
    """An ordered feature list plus intercept flag and response definition."""

    transforms: tuple[FeatureTransform, ...]
    intercept: bool = True
    response: ResponseSpec = ResponseSpec()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))
        seen = set()
        for t in self.transforms:
            if t in seen:
                raise ValueError(f"duplicate transform: {t.label}")
            seen.add(t)
        for t in self.transforms:
            if t.kind == "interaction":
                for child in t.of:
                    if child not in seen:
                        raise ValueError(
                            f"interaction child {child.label!r} is not a transform of this spec")

    @property
    def dim(self) -> int:
        return len(self.transforms) + (1 if self.intercept else 0)

    def to_config(self) -> dict:
        return {
            "label": self.label,
            "intercept": self.intercept,
            "response": self.response.to_config(),
            "features": [t.to_config() for t in self.transforms],
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "DesignSpec":
        return cls(
            transforms=tuple(FeatureTransform.from_config(t) for t in cfg.get("features", [])),
            intercept=bool(cfg.get("intercept", True)),
            response=ResponseSpec.from_config(cfg.get("response", {})),
            label=str(cfg.get("label", "")),
        )


def build_design(data: Dataset, spec: DesignSpec) -> tuple[np.ndarray, np.ndarray]:
    """Build the design matrix and response vector for a dataset.

    The intercept column, when present, comes first; transformed columns
    follow in spec order.
    """
    for t in spec.transforms:
        for col in t.source_columns():
            if not data.has_column(col):
                raise SchemaError(f"missing column: {col}")
    cols = []
    if spec.intercept:
        cols.append(np.ones(data.n_rows))
    for t in spec.transforms:
        cols.append(t.apply(data))
    X = np.column_stack(cols) if cols else np.empty((data.n_rows, 0))
    y = spec.response.apply(data)
    return X, y


# ---------------------------------------------------------------------------
# Normal-inverse-gamma prior and posterior
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NigPrior:
    """Proper NIG prior: beta | s2 ~ N(m, s2 V), s2 ~ InvGamma(a, c)."""

    m: np.ndarray
    V: np.ndarray
    a: float
    c: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float)).copy()
        V = np.atleast_2d(np.asarray(self.V, dtype=float)).copy()
        if V.shape != (m.size, m.size):
            raise ValueError("V shape does not match m")
        if not np.allclose(V, V.T, rtol=0, atol=1e-10 * max(1.0, float(np.abs(V).max()))):
            raise ImproperPriorError("V must be symmetric")
        if self.a <= 0 or self.c <= 0:
            raise ImproperPriorError("a and c must be positive")
        m.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "V", V)

    @classmethod
    def vague(cls, dim: int, tau2: float = 1e4, a: float = 0.01, c: float = 0.01) -> "NigPrior":
        """Weakly informative default: zero mean, large diagonal scale."""
        return cls(np.zeros(dim), tau2 * np.eye(dim), a, c)

    @property
    def dim(self) -> int:
        return self.m.size


def _spd_cholesky(mat: np.ndarray, what: str):
    try:
        return cho_factor(mat, lower=True)
    except np.linalg.LinAlgError as e:
        raise ConditioningError(f"{what} is not positive definite: {e}") from None


@dataclass(frozen=True, eq=False)
class NigPosterior:
    """Exact NIG posterior in natural-statistic form.

    Exposes the classical parameters (m, V, a, c) as properties.  Zero
    observations reproduce the prior exactly.
    """

    prec: np.ndarray          # V0^-1 + sum X'X
    shift: np.ndarray         # V0^-1 m0 + sum X'y
    shape: float              # a0 + n/2
    quad: float               # c0 + m0'V0^-1 m0 / 2 + sum y'y / 2
    n_obs: int = 0

    def __post_init__(self):
        prec = np.atleast_2d(np.asarray(self.prec, dtype=float)).copy()
        shift = np.atleast_1d(np.asarray(self.shift, dtype=float)).copy()
        prec.setflags(write=False)
        shift.setflags(write=False)
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "shift", shift)
        if self.shape <= 0:
            raise ImproperPriorError("posterior shape must be positive")
        if self.c <= 0:
            raise ConditioningError("posterior rate collapsed to a non-positive value")

    @classmethod
    def from_prior(cls, prior: NigPrior) -> "NigPosterior":
        chol = _spd_cholesky(prior.V, "prior V")
        prec = cho_solve(chol, np.eye(prior.dim))
        prec = (prec + prec.T) / 2.0
        shift = prec @ prior.m
        quad = prior.c + 0.5 * float(prior.m @ shift)
        return cls(prec, shift, prior.a, quad, 0)

    @cached_property
    def _chol(self):
        return _spd_cholesky(self.prec, "posterior precision")

    @cached_property
    def m(self) -> np.ndarray:
        out = cho_solve(self._chol, self.shift)
        out.setflags(write=False)
        return out

    @cached_property
    def V(self) -> np.ndarray:
        out = cho_solve(self._chol, np.eye(self.dim))
        out = (out + out.T) / 2.0
        out.setflags(write=False)
        return out

    @property
    def a(self) -> float:
        return self.shape

    @cached_property
    def c(self) -> float:
        return self.quad - 0.5 * float(self.shift @ cho_solve(self._chol, self.shift))

    @cached_property
    def log_det_V(self) -> float:
        L = self._chol[0]
        return -2.0 * float(np.sum(np.log(np.diag(L))))

    @property
    def dim(self) -> int:
        return self.shift.size

    def sample_params(self, rng: np.random.Generator, size: int):
        """Draw (beta, s2) pairs from the joint posterior."""
        s2 = 1.0 / rng.gamma(shape=self.a, scale=1.0 / self.c, size=size)
        L = np.linalg.cholesky(self.V)
        z = rng.standard_normal((size, self.dim))
        betas = self.m + np.sqrt(s2)[:, None] * (z @ L.T)
        return betas, s2


def _as_posterior(model) -> NigPosterior:
    if isinstance(model, NigPrior):
        return NigPosterior.from_prior(model)
    if isinstance(model, NigPosterior):
        return model
    raise TypeError(f"expected NigPrior or NigPosterior, got {type(model).__name__}")


def _check_xy(post: NigPosterior, X: np.ndarray, y: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.shape[0] != y.size:
        raise ValueError(f"design has {X.shape[0]} rows but response has {y.size}")
    if X.shape[1] != post.dim:
        raise ValueError(f"design has {X.shape[1]} columns but model dimension is {post.dim}")
    return X, y


def update_nig(post, X, y) -> NigPosterior:
    """Absorb a batch; with zero rows the posterior is returned unchanged."""
    post = _as_posterior(post)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size == 0:
        return post
    X, y = _check_xy(post, X, y)
    return NigPosterior(
        post.prec + X.T @ X,
        post.shift + X.T @ y,
        post.shape + 0.5 * y.size,
        post.quad + 0.5 * float(y @ y),
        post.n_obs + y.size,
    )


def fit_nig(X, y, prior) -> NigPosterior:
    """Conjugate fit of a batch against a prior (or a posterior as prior)."""
    return update_nig(_as_posterior(prior), X, y)


def log_marginal_likelihood(post, X, y) -> float:
    """Exact log marginal density of a response batch.

    The posterior plays the prior role, so this is the predictive (marginal)
    likelihood of new data under the current state.  Satisfies the chain rule
    lml(D1 u D2) = lml(D1) + lml(D2 | posterior after D1) exactly, and an
    empty batch gives 0.
    """
    post = _as_posterior(post)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size == 0:
        return 0.0
    X, y = _check_xy(post, X, y)
    new = update_nig(post, X, y)
    n = y.size
    return (
        -0.5 * n * LOG_2PI
        + 0.5 * (new.log_det_V - post.log_det_V)
        + post.a * math.log(post.c) - new.a * math.log(new.c)
        + gammaln(new.a) - gammaln(post.a)
    )


# ---------------------------------------------------------------------------
# Predictive distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudentT:
    """One location-scale Student-t component."""

    df: float
    loc: float
    scale: float

    def __post_init__(self):
        if self.df <= 0 or self.scale <= 0:
            raise ValueError("df and scale must be positive")


def predictive(post, x) -> StudentT:
    """Posterior predictive at one predictor vector.

    Student-t with 2a degrees of freedom, location x'm and squared scale
    (c/a)(1 + x'Vx).
    """
    post = _as_posterior(post)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != post.dim:
        raise ValueError(f"x has {x.size} entries but model dimension is {post.dim}")
    q = float(x @ cho_solve(post._chol, x))
    return StudentT(2.0 * post.a, float(x @ post.m),
                    math.sqrt(post.c / post.a * (1.0 + q)))


def predictive_batch(post, X) -> tuple[np.ndarray, np.ndarray, float]:
    """Vectorized predictive parameters (locs, scales, df) for design rows."""
    post = _as_posterior(post)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != post.dim:
        raise ValueError(f"design has {X.shape[1]} columns but model dimension is {post.dim}")
    L = post._chol[0]
    W = solve_triangular(L, X.T, lower=True)
    q = np.sum(W * W, axis=0)
    locs = X @ post.m
    scales = np.sqrt(post.c / post.a * (1.0 + q))
    return locs, scales, 2.0 * post.a


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    """Mixture of location-scale Student-t components on the log scale."""

    weights: np.ndarray
    locs: np.ndarray
    scales: np.ndarray
    dfs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        locs = np.atleast_1d(np.asarray(self.locs, dtype=float))
        scales = np.atleast_1d(np.asarray(self.scales, dtype=float))
        dfs = np.atleast_1d(np.asarray(self.dfs, dtype=float))
        if not (w.shape == locs.shape == scales.shape == dfs.shape):
            raise ValueError("component arrays must have identical shapes")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")
        if np.any(scales <= 0) or np.any(dfs <= 0):
            raise ValueError("scales and dfs must be positive")
        w = w / total
        for arr in (w, locs, scales, dfs):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "dfs", dfs)

    @classmethod
    def from_components(cls, weighted: list[tuple[float, StudentT]]) -> "PredictiveDistribution":
        w = np.array([p for p, _ in weighted])
        return cls(w,
                   np.array([t.loc for _, t in weighted]),
                   np.array([t.scale for _, t in weighted]),
                   np.array([t.df for _, t in weighted]))

    @property
    def n_components(self) -> int:
        return self.weights.size

    def mean(self) -> float:
        """Mixture mean on the log scale (components need df > 1)."""
        if np.any(self.dfs <= 1):
            raise DivergenceError("component with df <= 1 has no mean")
        return float(self.weights @ self.locs)

    def variance(self) -> float:
        """Mixture variance on the log scale (components need df > 2)."""
        if np.any(self.dfs <= 2):
            raise DivergenceError("component with df <= 2 has no variance")
        comp_var = self.scales ** 2 * self.dfs / (self.dfs - 2.0)
        mu = self.mean()
        return float(self.weights @ (comp_var + self.locs ** 2) - mu ** 2)

    def logpdf(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        comp = student_t.logpdf((y[:, None] - self.locs) / self.scales, self.dfs) \
            - np.log(self.scales)
        out = logsumexp(comp + np.log(self.weights), axis=1)
        return out if out.size > 1 else out.reshape(())

    def cdf(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        comp = student_t.cdf((y[:, None] - self.locs) / self.scales, self.dfs)
        out = comp @ self.weights
        return out if out.size > 1 else float(out[0])

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise ValueError("q must be in (0, 1)")
        per_comp = self.locs + self.scales * student_t.ppf(q, self.dfs)
        lo, hi = float(per_comp.min()), float(per_comp.max())
        if lo == hi:
            return lo
        span = hi - lo
        lo -= 1e-9 * max(1.0, abs(lo)) + 1e-12 * span
        hi += 1e-9 * max(1.0, abs(hi)) + 1e-12 * span
        return float(optimize.brentq(lambda y: self.cdf(y) - q, lo, hi, xtol=1e-13))


@dataclass(frozen=True, eq=False)
class IntegerPredictive:
    """Probability mass over nonnegative integers 0..len(pmf)-1."""

    pmf: np.ndarray
    truncated_mass: float

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float).copy()
        if np.any(pmf < -1e-15):
            raise ValueError("probability masses must be nonnegative")
        np.clip(pmf, 0.0, None, out=pmf)
        total = pmf.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"masses must sum to 1, got {total}")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @property
    def support_max(self) -> int:
        return self.pmf.size - 1

    def mean(self) -> float:
        return float(np.arange(self.pmf.size) @ self.pmf)

    def cdf(self, j: int) -> float:
        if j < 0:
            return 0.0
        return float(self.pmf[:min(j, self.support_max) + 1].sum())

    def exceedance_prob(self, threshold: int) -> float:
        """P(value > threshold), i.e. mass at threshold+1 and above."""
        if threshold >= self.support_max:
            return 0.0
        return float(self.pmf[threshold + 1:].sum())


DEFAULT_TAIL_MASS = 1e-12
DEFAULT_MAX_SUPPORT = 1_000_000


def discretize(pred: PredictiveDistribution, tail_mass: float = DEFAULT_TAIL_MASS,
               max_support: int = DEFAULT_MAX_SUPPORT) -> IntegerPredictive:
    """Integrate a log-scale predictive into an integer distribution.

    Bin j covers [j - 0.5, j + 0.5) on the original scale, so
    P(O = j) = F(ln(j + 0.5)) - F(ln(j - 0.5)) for j >= 1 and
    P(O = 0) = F(ln 0.5).  The support is truncated at the first integer
    whose upper tail holds less than ``tail_mass`` (capped at
    ``max_support``) and the masses are renormalized; the pre-normalization
    tail is reported as ``truncated_mass``.
    """
    log_cap = math.log(max_support + 0.5)
    y_hi = pred.quantile(1.0 - tail_mass)
    if y_hi >= log_cap:
        j_max = max_support
    else:
        j_max = max(0, int(math.ceil(math.exp(y_hi) - 0.5)))
    edges = np.log(np.arange(j_max + 1) + 0.5)
    cdf_vals = np.asarray(pred.cdf(edges), dtype=float).reshape(-1)
    pmf = np.empty(j_max + 1)
    pmf[0] = cdf_vals[0]
    pmf[1:] = np.diff(cdf_vals)
    truncated = max(0.0, 1.0 - float(cdf_vals[-1]))
    total = pmf.sum()
    if total <= 0:
        raise DivergenceError("no probability mass on the retained support")
    return IntegerPredictive(pmf / total, truncated)


def predictive_mean_ozone(pred: PredictiveDistribution,
                          tail_mass: float = DEFAULT_TAIL_MASS,
                          max_support: int = DEFAULT_MAX_SUPPORT) -> float:
    """Mean of exp(Y) under the mixture, over the tail-truncated support.

    Student-t components have no finite exponential moments, so the
    integral runs over the same truncated range the discretization uses
    (upper bound at the 1 - tail_mass quantile, capped at the support
    limit).  Components with df close to 1 or below are rejected because
    even the truncated value is dominated by an essentially divergent tail.
    """
    if np.any(pred.dfs <= 1.0 + 1e-6):
        raise DivergenceError("exponential moment diverges for df <= 1")
    hi = min(pred.quantile(1.0 - tail_mass), math.log(max_support + 0.5))
    lo = min(float(np.min(pred.locs + pred.scales * student_t.ppf(1e-16, pred.dfs))), hi - 1.0)
    total = 0.0
    for w, loc, scale, df in zip(pred.weights, pred.locs, pred.scales, pred.dfs):
        def f(y, loc=loc, scale=scale, df=df):
            return np.exp(y) * student_t.pdf((y - loc) / scale, df) / scale
        pts = [p for p in (loc, loc + scale * scale) if lo < p < hi]
        val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=200)
        total += w * val
    return total
