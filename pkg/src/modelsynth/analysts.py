"""Stand-in analyst programs and mixture-of-conjugate-models machinery.

Three construction mechanisms are supported, selected by the program's rule:

  cv-geometric      candidate weights proportional to the geometric mean of
                    holdout predictive likelihoods over repeated random
                    train/holdout splits of the analyst's portion
  fixed-subjective  weights supplied verbatim in the program definition
  bic               weights proportional to exp(-BIC/2) of each candidate's
                    Gaussian maximum-likelihood fit; candidates may be given
                    explicitly or generated from a constrained least-angle
                    ordering (forced-in variables, hierarchy on derived terms)

A fitted analyst is a ModelMixture: weighted conjugate posteriors over
possibly different design specs, carrying the set of row ids it has absorbed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .linmodel import (
    ConditioningError,
    DesignSpec,
    FeatureTransform,
    NigPosterior,
    NigPrior,
    NumericalWarning,
    PredictiveDistribution,
    ResponseSpec,
    build_design,
    fit_nig,
    identity,
    interaction,
    log_marginal_likelihood,
    predictive_batch,
    quadratic,
    update_nig,
)

LOG_2PI = math.log(2.0 * math.pi)


def _normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise ValueError("all candidate weights vanished")
    shifted = log_w - log_w[finite].max()
    w = np.where(finite, np.exp(np.where(finite, shifted, 0.0)), 0.0)
    return w / w.sum()


# ---------------------------------------------------------------------------
# Mixtures of conjugate linear models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelMixture:
    """An analyst's summary: weighted conjugate posteriors plus provenance."""

    specs: tuple[DesignSpec, ...]
    posteriors: tuple[NigPosterior, ...]
    weights: np.ndarray
    absorbed: frozenset = frozenset()

    def __post_init__(self):
        if len(self.specs) == 0:
            raise ValueError("a mixture needs at least one component")
        if not (len(self.specs) == len(self.posteriors) == len(self.weights)):
            raise ValueError("component arrays must have matching lengths")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()}")
        w = (w / w.sum()).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "posteriors", tuple(self.posteriors))
        object.__setattr__(self, "absorbed", frozenset(self.absorbed))

    @property
    def n_components(self) -> int:
        return len(self.specs)


def mixture_log_marginal(mix: ModelMixture, batch: Dataset) -> float:
    """log sum_j w_j m_j(batch), each m_j the exact conjugate marginal."""
    lmls = np.empty(mix.n_components)
    for j, (spec, post) in enumerate(zip(mix.specs, mix.posteriors)):
        X, y = build_design(batch, spec)
        lmls[j] = log_marginal_likelihood(post, X, y)
    with np.errstate(divide="ignore"):
        log_w = np.log(mix.weights)
    out = float(logsumexp(log_w + lmls))
    if out == -np.inf:
        warnings.warn("all mixture components assign zero likelihood to the batch",
                      NumericalWarning)
    return out


def mixture_update(mix: ModelMixture, batch: Dataset) -> ModelMixture:
    """Absorb a batch: update every component and reweight by its marginal."""
    if batch.n_rows == 0:
        return mix
    overlap = mix.absorbed & batch.id_set()
    if overlap:
        raise ValueError(f"batch overlaps data already absorbed: {sorted(overlap)[:5]} ...")
    new_posts, lmls = [], np.empty(mix.n_components)
    for j, (spec, post) in enumerate(zip(mix.specs, mix.posteriors)):
        X, y = build_design(batch, spec)
        lmls[j] = log_marginal_likelihood(post, X, y)
        new_posts.append(update_nig(post, X, y))
    with np.errstate(divide="ignore"):
        new_w = _normalize_log_weights(np.log(mix.weights) + lmls)
    return ModelMixture(mix.specs, tuple(new_posts), new_w,
                        mix.absorbed | batch.id_set())


def mixture_predictive(mix: ModelMixture, rows: Dataset) -> list[PredictiveDistribution]:
    """Predictive mixtures (one per row): components weighted by mixture weights."""
    k = mix.n_components
    locs = np.empty((k, rows.n_rows))
    scales = np.empty((k, rows.n_rows))
    dfs = np.empty(k)
    for j, (spec, post) in enumerate(zip(mix.specs, mix.posteriors)):
        X, _ = build_design(rows, spec)
        locs[j], scales[j], dfs[j] = predictive_batch(post, X)
    return [
        PredictiveDistribution(mix.weights, locs[:, r], scales[:, r], dfs)
        for r in range(rows.n_rows)
    ]


# ---------------------------------------------------------------------------
# Weighting rules
# ---------------------------------------------------------------------------

def cv_geometric_weights(candidates, data: Dataset, prior_builder, n_train: int,
                         n_holdout: int, reps: int, seed: int) -> np.ndarray:
    """Weights proportional to the geometric mean of holdout predictive
    likelihoods.

    Each rep shuffles the portion, fits every candidate on ``n_train`` rows
    and evaluates the exact predictive likelihood of the remaining
    ``n_holdout`` rows.  A candidate whose fit fails on any rep gets weight
    zero.  Computed in log space: mean of log likelihoods, then normalized.
    """
    if n_train + n_holdout != data.n_rows:
        raise ValueError("n_train + n_holdout must equal the portion size")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rng = np.random.default_rng(seed)
    log_liks = np.zeros((len(candidates), reps))
    for r in range(reps):
        order = rng.permutation(data.n_rows)
        train = data.subset(data.ids[order[:n_train]])
        hold = data.subset(data.ids[order[n_train:]])
        for i, spec in enumerate(candidates):
            try:
                Xt, yt = build_design(train, spec)
                post = fit_nig(Xt, yt, prior_builder(spec))
                Xh, yh = build_design(hold, spec)
                log_liks[i, r] = log_marginal_likelihood(post, Xh, yh)
            except (ConditioningError, np.linalg.LinAlgError) as e:
                warnings.warn(f"candidate {i} failed on rep {r}: {e}", NumericalWarning)
                log_liks[i, r] = -np.inf
    return _normalize_log_weights(log_liks.mean(axis=1))


def fixed_subjective_weights(candidates, weights) -> np.ndarray:
    """Attach externally chosen weights verbatim (validated)."""
    w = np.asarray(weights, dtype=float)
    if len(w) != len(candidates):
        raise ValueError("weight count does not match candidate count")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    return w / w.sum()


def _ols_rss(X: np.ndarray, y: np.ndarray) -> float:
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def _gaussian_ic(rss: float, n: int, n_coef: int, penalty: float) -> float:
    # -2 max log likelihood + penalty * (#coefficients + 1 for the variance)
    sigma2 = max(rss / n, 1e-300)
    return n * (math.log(sigma2) + LOG_2PI + 1.0) + penalty * (n_coef + 1)


def bic_weights(candidates, data: Dataset) -> np.ndarray:
    """Weights proportional to exp(-BIC/2) of each candidate's ML fit."""
    n = data.n_rows
    log_w = np.empty(len(candidates))
    for i, spec in enumerate(candidates):
        try:
            X, y = build_design(data, spec)
            bic = _gaussian_ic(_ols_rss(X, y), n, X.shape[1], math.log(n))
            log_w[i] = -0.5 * bic
        except (np.linalg.LinAlgError, ValueError) as e:
            warnings.warn(f"candidate {i} failed to fit: {e}", NumericalWarning)
            log_w[i] = -np.inf
    return _normalize_log_weights(log_w)


# ---------------------------------------------------------------------------
# Constrained least-angle ordering
# ---------------------------------------------------------------------------

def _standardize(col: np.ndarray):
    centered = col - col.mean()
    norm = float(np.linalg.norm(centered))
    if norm < 1e-12:
        return None
    return centered / norm


def modified_lars_order(data: Dataset, mains, forced_in=(), hierarchy: bool = True,
                        response: ResponseSpec = ResponseSpec(),
                        max_terms: int | None = None) -> tuple[str, ...]:
    """Variable-entry order from least-angle steps with two modifications.

    Forced-in variables enter first, in the stated order, before any free
    variable; they are partialled out of the response and of every candidate
    column.  With ``hierarchy`` on, the squared term of a main effect becomes
    a candidate once the main effect is active, and the interaction of two
    mains becomes a candidate once both are active (labels ``v^2`` and
    ``a:b``).  Otherwise the ordering runs over the main effects only.

    Free variables enter by the usual criterion: walk the equiangular
    direction of the active set until an inactive candidate's absolute
    correlation with the residual ties the active set's.  Constant columns
    are excluded with a warning.  Ties within 1e-12 go to the earlier
    candidate.
    """
    mains = list(mains)
    forced_in = list(forced_in)
    for v in forced_in:
        if v not in mains:
            raise ValueError(f"forced-in variable {v!r} is not a candidate")
    y = response.apply(data)
    y = y - y.mean()

    raw = {}
    labels = []
    for v in mains:
        col = _standardize(data.column(v))
        if col is None:
            warnings.warn(f"constant column {v!r} excluded from the ordering",
                          NumericalWarning)
            continue
        raw[v] = col
        labels.append(v)

    order = [v for v in forced_in if v in raw]
    if order:
        forced_mat = np.column_stack([raw[v] for v in order])
        q, _ = np.linalg.qr(forced_mat)

        def project_out(col):
            return col - q @ (q.T @ col)

        y = project_out(y)
    else:
        def project_out(col):
            return col

    # candidate columns for the free phase, projected orthogonal to the
    # forced set; reg_index fixes the tie-breaking order
    cols: dict[str, np.ndarray] = {}
    reg_index: dict[str, int] = {}

    def register(label, raw_col):
        if label in cols or label in order:
            return
        col = _standardize(project_out(raw_col - raw_col.mean()))
        if col is None:
            warnings.warn(f"column {label!r} is degenerate after projection; excluded",
                          NumericalWarning)
            return
        reg_index[label] = len(reg_index)
        cols[label] = col

    for v in labels:
        if v not in order:
            register(v, data.column(v).astype(float))

    active_mains = set(order)

    def unlock(main):
        # entering main effect makes its squared term a candidate, plus its
        # interaction with every main already active
        if not hierarchy or main not in raw:
            return
        register(f"{main}^2", data.column(main).astype(float) ** 2)
        for other in sorted(active_mains):
            if other != main and other in raw:
                lab = f"{min(main, other)}:{max(main, other)}"
                register(lab, data.column(main) * data.column(other))

    for v in list(order):
        unlock(v)

    def pick_by_index(cands):
        return min(cands, key=lambda lab: reg_index[lab])

    active: list[str] = []
    r = y.copy()
    budget = max_terms if max_terms is not None else len(labels) * (len(labels) + 3)
    while len(order) < budget:
        elig = [lab for lab in cols if lab not in order]
        if not active:
            if not elig:
                break
            cors = {lab: abs(float(cols[lab] @ r)) for lab in elig}
            best = max(cors.values())
            pick = pick_by_index([lab for lab, c in cors.items() if c >= best - 1e-12])
            active.append(pick)
            order.append(pick)
            if pick in raw:
                active_mains.add(pick)
            unlock(pick)
            continue
        XA = np.column_stack([cols[lab] for lab in active])
        cA = XA.T @ r
        s = np.where(cA >= 0, 1.0, -1.0)
        XAs = XA * s
        G = XAs.T @ XAs
        try:
            w0 = np.linalg.solve(G, np.ones(len(active)))
        except np.linalg.LinAlgError:
            warnings.warn("active set became collinear; ordering stopped early",
                          NumericalWarning)
            break
        denom = float(np.ones(len(active)) @ w0)
        if denom <= 0:
            warnings.warn("equiangular direction degenerated; ordering stopped early",
                          NumericalWarning)
            break
        a_norm = denom ** -0.5
        u = XAs @ (a_norm * w0)
        if not elig:
            break
        C = float(np.max(np.abs(cA)))
        gammas = {}
        for lab in elig:
            cj = float(cols[lab] @ r)
            aj = float(cols[lab] @ u)
            opts = []
            for num, den in ((C - cj, a_norm - aj), (C + cj, a_norm + aj)):
                if den > 1e-15 and num / den > 1e-15:
                    opts.append(num / den)
            if opts:
                gammas[lab] = min(opts)
        if not gammas:
            break
        g_best = min(gammas.values())
        pick = pick_by_index([lab for lab, g in gammas.items() if g <= g_best + 1e-12])
        r = r - g_best * u
        active.append(pick)
        order.append(pick)
        if pick in raw:
            active_mains.add(pick)
        unlock(pick)
    return tuple(order)


def term_to_transform(label: str) -> FeatureTransform:
    """Map an ordering label back to a feature transform."""
    if ":" in label:
        a, b = label.split(":", 1)
        return interaction(identity(a), identity(b))
    if label.endswith("^2"):
        return quadratic(label[:-2])
    return identity(label)


def specs_from_order(order, sizes, response: ResponseSpec,
                     data: Dataset | None = None) -> list[DesignSpec]:
    """Nested design specs from ordering prefixes.

    When a reference dataset is given, every source column is centered and
    scaled by its statistics before entering, so products and squares of
    large-magnitude columns stay well-conditioned (the model space is
    unchanged up to the affine reparameterization).  Interactions list their
    parents first, so the specs respect the hierarchy by construction.
    """
    stats: dict[str, tuple[float, float]] = {}

    def std_identity(col: str) -> FeatureTransform:
        if data is None:
            return identity(col)
        if col not in stats:
            x = data.column(col)
            stats[col] = (float(x.mean()), float(x.std()) or 1.0)
        center, scale = stats[col]
        return identity(col, center=center, scale=scale)

    def std_quadratic(col: str) -> FeatureTransform:
        if data is None:
            return quadratic(col)
        t = std_identity(col)
        return quadratic(col, center=t.center, scale=t.scale)

    specs = []
    for size in sizes:
        size = min(size, len(order))
        transforms: list[FeatureTransform] = []
        seen = set()

        def add(t):
            if t not in seen:
                transforms.append(t)
                seen.add(t)

        for label in order[:size]:
            if ":" in label:
                a, b = label.split(":", 1)
                add(std_identity(a))
                add(std_identity(b))
                add(interaction(std_identity(a), std_identity(b)))
            elif label.endswith("^2"):
                col = label[:-2]
                add(std_identity(col))
                add(std_quadratic(col))
            else:
                add(std_identity(label))
        specs.append(DesignSpec(tuple(transforms), intercept=True, response=response,
                                label="+".join(order[:size])))
    return specs


# ---------------------------------------------------------------------------
# Analyst programs
# ---------------------------------------------------------------------------

RULES = ("cv-geometric", "fixed-subjective", "bic")


@dataclass(frozen=True)
class LarsRecipe:
    mains: tuple[str, ...]
    forced_in: tuple[str, ...] = ()
    hierarchy: bool = True
    model_sizes: tuple[int, ...] = (3, 5, 7, 9)

    @classmethod
    def from_config(cls, cfg: dict) -> "LarsRecipe":
        return cls(tuple(cfg["mains"]), tuple(cfg.get("forced_in", ())),
                   bool(cfg.get("hierarchy", True)),
                   tuple(int(s) for s in cfg.get("model_sizes", (3, 5, 7, 9))))

    def to_config(self) -> dict:
        return {"mains": list(self.mains), "forced_in": list(self.forced_in),
                "hierarchy": self.hierarchy, "model_sizes": list(self.model_sizes)}


@dataclass(frozen=True)
class AnalystProgram:
    """A declarative recipe: candidates plus a weighting rule."""

    name: str
    rule: str
    candidates: tuple[DesignSpec, ...] = ()
    lars: LarsRecipe | None = None
    rule_params: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)
    response: ResponseSpec = ResponseSpec()
    seed: int | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not self.candidates and self.lars is None:
            raise ValueError("program needs candidates or a lars recipe")
        if self.rule == "fixed-subjective":
            w = self.rule_params.get("weights")
            if w is None or len(w) != len(self.candidates):
                raise ValueError("fixed-subjective rule needs one weight per candidate")

    def prior_for(self, spec: DesignSpec) -> NigPrior:
        return NigPrior.vague(
            spec.dim,
            tau2=float(self.prior.get("tau2", 1e4)),
            a=float(self.prior.get("a", 0.01)),
            c=float(self.prior.get("c", 0.01)),
        )

    @classmethod
    def from_config(cls, cfg: dict) -> "AnalystProgram":
        response = ResponseSpec.from_config(cfg.get("response", {}))
        candidates = []
        for c in cfg.get("candidates", []):
            c = dict(c)
            c.setdefault("response", response.to_config())
            candidates.append(DesignSpec.from_config(c))
        lars = LarsRecipe.from_config(cfg["lars"]) if "lars" in cfg else None
        return cls(
            name=str(cfg["name"]),
            rule=str(cfg["rule"]),
            candidates=tuple(candidates),
            lars=lars,
            rule_params=dict(cfg.get("rule_params", {})),
            prior=dict(cfg.get("prior", {})),
            response=response,
            seed=cfg.get("seed"),
        )

    def to_config(self) -> dict:
        cfg = {
            "name": self.name,
            "rule": self.rule,
            "rule_params": dict(self.rule_params),
            "prior": dict(self.prior),
            "response": self.response.to_config(),
        }
        if self.candidates:
            cfg["candidates"] = [c.to_config() for c in self.candidates]
        if self.lars is not None:
            cfg["lars"] = self.lars.to_config()
        if self.seed is not None:
            cfg["seed"] = self.seed
        return cfg


def run_analyst(program: AnalystProgram, portion: Dataset, seed: int | None = None) -> ModelMixture:
    """Fit an analyst program on its portion of the data.

    Candidates are resolved (running the constrained ordering when the
    program carries a lars recipe), weighted per the program's rule, and
    fitted on the full portion.  Deterministic given (program, portion,
    seed).
    """
    if portion.n_rows == 0:
        raise ValueError("cannot run an analyst on an empty portion")
    seed = program.seed if program.seed is not None else (seed if seed is not None else 0)

    candidates = list(program.candidates)
    if program.lars is not None:
        order = modified_lars_order(portion, program.lars.mains, program.lars.forced_in,
                                    program.lars.hierarchy, program.response)
        candidates = candidates + specs_from_order(order, program.lars.model_sizes,
                                                   program.response, portion)
    if not candidates:
        raise ValueError("program produced no candidates")

    if program.rule == "cv-geometric":
        p = program.rule_params
        weights = cv_geometric_weights(
            candidates, portion, program.prior_for,
            n_train=int(p.get("n_train", portion.n_rows - max(1, portion.n_rows // 10))),
            n_holdout=int(p.get("n_holdout", max(1, portion.n_rows // 10))),
            reps=int(p.get("reps", 10)), seed=seed)
    elif program.rule == "fixed-subjective":
        weights = fixed_subjective_weights(candidates, program.rule_params["weights"])
    else:
        weights = bic_weights(candidates, portion)

    posteriors = []
    for spec in candidates:
        X, y = build_design(portion, spec)
        posteriors.append(fit_nig(X, y, program.prior_for(spec)))
    return ModelMixture(tuple(candidates), tuple(posteriors), weights, portion.id_set())


# ---------------------------------------------------------------------------
# Forward-selection baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SelectedLinearModel:
    """A Gaussian linear model chosen by greedy forward selection."""

    spec: DesignSpec
    coefs: np.ndarray
    mse_hat: float
    criterion: str
    ic_path: tuple[float, ...]
    candidates: tuple[FeatureTransform, ...]

    def predict_log(self, rows: Dataset) -> np.ndarray:
        X, _ = build_design(rows, self.spec)
        return X @ self.coefs

    def refit(self, data: Dataset) -> "SelectedLinearModel":
        return forward_selection_ic(data, self.candidates, self.criterion,
                                    response=self.spec.response)


def forward_selection_ic(data: Dataset, candidates, criterion: str = "BIC",
                         response: ResponseSpec = ResponseSpec()) -> SelectedLinearModel:
    """Greedy forward selection minimizing AIC or BIC.

    Starts from the intercept-only model and adds the candidate that lowers
    the criterion most, stopping when no addition improves it.  Returns the
    selected Gaussian fit with its in-sample mean squared error estimate
    (residual sum of squares over n - p).
    """
    criterion = criterion.upper()
    if criterion not in ("AIC", "BIC"):
        raise ValueError("criterion must be AIC or BIC")
    if len(candidates) == 0:
        raise ValueError("need at least one candidate")
    candidates = tuple(candidates)
    n = data.n_rows
    penalty = 2.0 if criterion == "AIC" else math.log(n)
    y = response.apply(data)
    feature_cols = {t: t.apply(data) for t in candidates}

    chosen: list[FeatureTransform] = []
    X = np.ones((n, 1))
    current_ic = _gaussian_ic(_ols_rss(X, y), n, 1, penalty)
    ic_path = [current_ic]
    remaining = list(candidates)
    while remaining:
        trials = []
        for t in remaining:
            Xt = np.column_stack([X, feature_cols[t]])
            trials.append((_gaussian_ic(_ols_rss(Xt, y), n, Xt.shape[1], penalty), t))
        best_ic, best_t = min(trials, key=lambda p: p[0])
        if best_ic >= current_ic:
            break
        chosen.append(best_t)
        remaining.remove(best_t)
        X = np.column_stack([X, feature_cols[best_t]])
        current_ic = best_ic
        ic_path.append(current_ic)

    spec = DesignSpec(tuple(chosen), intercept=True, response=response,
                      label=f"{criterion.lower()}-forward")
    Xf, _ = build_design(data, spec)
    coefs, _, _, _ = np.linalg.lstsq(Xf, y, rcond=None)
    resid = y - Xf @ coefs
    dof = max(n - Xf.shape[1], 1)
    return SelectedLinearModel(spec, coefs, float(resid @ resid) / dof,
                               criterion, tuple(ic_path), candidates)
