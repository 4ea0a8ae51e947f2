"""Combining independently built models through pairwise Bayes factors.

A Bayes factor between two models is the ratio of their marginal likelihoods
on common held-out data, computed only after both models have absorbed the
same data.  The synthesis weight of model i is the normalized geometric mean
of its row of estimated Bayes factors,

    log b_i = (1/k) sum_l L[i][l],        L[i][l] = log B_il,

which reduces to weights proportional to the marginal likelihoods whenever
the factor matrix is internally consistent.  Convex weights are a fixed
(default uniform) alternative that is never updated.

All weight arithmetic is done in log space; normalization subtracts the
maximum log weight before exponentiating.  Normalized weights below 1e-300
are clamped to zero and flagged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .analysts import ModelMixture, mixture_log_marginal, mixture_predictive, mixture_update
from .data import BatchSchedule, Dataset
from .linmodel import NumericalWarning, PredictiveDistribution

WEIGHT_FLOOR = 1e-300


class ProvenanceError(ValueError):
    """Models compared on data they should not have seen, or unequal states."""


def mc_log_marginal(draws, loglik, data) -> float:
    """Draw-averaged marginal likelihood estimate.

    ``draws`` are parameter draws from the model's current posterior and
    ``loglik(draw, data)`` returns the log likelihood of the evaluation data
    under one draw.  Returns log( N^-1 sum_j exp(loglik_j) ) via log-sum-exp.
    """
    draws = list(draws)
    if len(draws) == 0:
        raise ValueError("need at least one draw")
    vals = np.array([float(loglik(d, data)) for d in draws])
    if np.all(np.isneginf(vals)):
        warnings.warn("every draw assigned zero likelihood", NumericalWarning)
        return -np.inf
    return float(logsumexp(vals) - np.log(len(vals)))


def _check_common_provenance(models, eval_data: Dataset):
    absorbed = models[0].absorbed
    for m in models[1:]:
        if m.absorbed != absorbed:
            raise ProvenanceError("models not updated to common data")
    overlap = absorbed & eval_data.id_set()
    if overlap:
        raise ProvenanceError(
            f"evaluation data overlaps absorbed data: {sorted(overlap)[:5]} ...")
    return absorbed


def pairwise_log_bf(model_i: ModelMixture, model_j: ModelMixture,
                    eval_data: Dataset) -> float:
    """log B_ij on held-out data, after both models absorbed the same data."""
    _check_common_provenance((model_i, model_j), eval_data)
    return mixture_log_marginal(model_i, eval_data) - mixture_log_marginal(model_j, eval_data)


@dataclass(frozen=True, eq=False)
class BayesFactorMatrix:
    """k x k log pairwise Bayes factors with provenance.

    Antisymmetric with an exactly zero diagonal.  Instances built from a
    single vector of log marginals are internally consistent by
    construction: L[i][j] = L[i][l] + L[l][j] up to rounding.
    """

    L: np.ndarray
    log_marginals: np.ndarray | None = None
    eval_ids: frozenset = frozenset()
    absorbed: frozenset = frozenset()

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.L, dtype=float)).copy()
        if L.shape[0] != L.shape[1]:
            raise ValueError("factor matrix must be square")
        if np.any(np.diag(L) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        if np.any(L + L.T != 0.0):
            raise ValueError("matrix must be exactly antisymmetric")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        if self.log_marginals is not None:
            lm = np.asarray(self.log_marginals, dtype=float).copy()
            lm.setflags(write=False)
            object.__setattr__(self, "log_marginals", lm)

    @property
    def k(self) -> int:
        return self.L.shape[0]

    @classmethod
    def from_log_marginals(cls, log_marginals, eval_ids=frozenset(),
                           absorbed=frozenset()) -> "BayesFactorMatrix":
        lm = np.asarray(log_marginals, dtype=float)
        return cls(lm[:, None] - lm[None, :], lm, frozenset(eval_ids), frozenset(absorbed))


def bf_matrix(models, eval_data: Dataset) -> BayesFactorMatrix:
    """All pairwise log Bayes factors, from one vector of log marginals."""
    models = list(models)
    absorbed = _check_common_provenance(models, eval_data)
    lms = np.array([mixture_log_marginal(m, eval_data) for m in models])
    return BayesFactorMatrix.from_log_marginals(lms, eval_data.id_set(), absorbed)


@dataclass(frozen=True, eq=False)
class SynthesisWeights:
    """Normalized per-model weights plus the raw log-scale values."""

    weights: np.ndarray
    mode: str                      # "bayesian" or "convex"
    log_raw: np.ndarray
    clamped: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.mode not in ("bayesian", "convex"):
            raise ValueError(f"unknown mode {self.mode!r}")
        lr = np.asarray(self.log_raw, dtype=float).copy()
        w.setflags(write=False)
        lr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "log_raw", lr)

    @property
    def k(self) -> int:
        return self.weights.size


def _normalize(log_raw: np.ndarray, mode: str) -> SynthesisWeights:
    shifted = log_raw - log_raw.max()
    w = np.exp(shifted)
    w = w / w.sum()
    clamped = bool(np.any((w > 0) & (w < WEIGHT_FLOOR)))
    if clamped:
        warnings.warn("synthesis weight underflow clamped to 0", NumericalWarning)
        w = np.where(w < WEIGHT_FLOOR, 0.0, w)
        w = w / w.sum()
    return SynthesisWeights(w, mode, log_raw, clamped)


def geometric_mean_weights(matrix: BayesFactorMatrix) -> SynthesisWeights:
    """Normalized geometric-mean weights: log b_i = row mean of log factors."""
    return _normalize(matrix.L.mean(axis=1), "bayesian")


def equal_weights(k: int, mode: str = "bayesian") -> SynthesisWeights:
    """Uniform initial weights (the starting point of sequential updating)."""
    w = np.full(k, 1.0 / k)
    return SynthesisWeights(w, mode, np.log(w))


def convex_weights(k: int, fixed=None) -> SynthesisWeights:
    """Fixed convex weights, uniform 1/k by default; never updated."""
    if fixed is None:
        w = np.full(k, 1.0 / k)
    else:
        w = np.asarray(fixed, dtype=float)
        if w.size != k:
            raise ValueError("fixed weight count does not match k")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("fixed weights must be nonnegative and sum to 1")
        w = w / w.sum()
    with np.errstate(divide="ignore"):
        return SynthesisWeights(w, "convex", np.log(w))


@dataclass(frozen=True, eq=False)
class SynthesizedModel:
    """Analyst mixtures joined under synthesis weights."""

    mixtures: tuple[ModelMixture, ...]
    weights: SynthesisWeights

    def __post_init__(self):
        if len(self.mixtures) != self.weights.k:
            raise ValueError("weight count does not match model count")
        absorbed = self.mixtures[0].absorbed
        for m in self.mixtures[1:]:
            if m.absorbed != absorbed:
                raise ProvenanceError("models not updated to common data")
        object.__setattr__(self, "mixtures", tuple(self.mixtures))

    @property
    def absorbed(self) -> frozenset:
        return self.mixtures[0].absorbed

    @property
    def k(self) -> int:
        return len(self.mixtures)

    def predictive(self, rows: Dataset) -> list[PredictiveDistribution]:
        """Per-row predictive: the b-weighted mixture of analysts' mixtures."""
        per_analyst = [mixture_predictive(m, rows) for m in self.mixtures]
        out = []
        for r in range(rows.n_rows):
            parts = [per_analyst[i][r] for i in range(self.k)]
            w = np.concatenate([self.weights.weights[i] * p.weights
                                for i, p in enumerate(parts)])
            out.append(PredictiveDistribution(
                w,
                np.concatenate([p.locs for p in parts]),
                np.concatenate([p.scales for p in parts]),
                np.concatenate([p.dfs for p in parts]),
            ))
        return out


def synthesize(mixtures, weights: SynthesisWeights) -> SynthesizedModel:
    """Join analyst summaries under the given weights."""
    return SynthesizedModel(tuple(mixtures), weights)


@dataclass(frozen=True, eq=False)
class SynthesisStep:
    """One sequential-updating step (state recorded before absorbing)."""

    batch_ids: tuple[int, ...]
    state_before: SynthesizedModel
    log_marginals: np.ndarray
    weights_after: SynthesisWeights


@dataclass(frozen=True, eq=False)
class SynthesisTrajectory:
    steps: tuple[SynthesisStep, ...]
    final: SynthesizedModel

    def to_json(self) -> dict:
        return {
            "mode": self.final.weights.mode,
            "steps": [
                {
                    "batch": i,
                    "batch_ids": [int(x) for x in s.batch_ids],
                    "log_marginals": [float(v) for v in s.log_marginals],
                    "weights": [float(w) for w in s.weights_after.weights],
                }
                for i, s in enumerate(self.steps)
            ],
        }


def sequential_update(synth: SynthesizedModel, schedule: BatchSchedule,
                      data: Dataset) -> SynthesisTrajectory:
    """Absorb a batch schedule, adjusting weights as evidence accumulates.

    Per batch: the pre-batch state is recorded (predictions for a batch must
    come from it), every analyst's mixture absorbs the batch, and in bayesian
    mode each log weight grows by that analyst's batch log marginal before
    renormalization.  Convex weights stay fixed.  By the chain rule of
    marginal likelihoods the final bayesian weights equal the one-shot
    geometric-mean weights computed on all absorbed batches at once.
    """
    steps = []
    current = synth
    for ids in schedule.batches:
        batch = data.subset(ids)
        overlap = current.absorbed & batch.id_set()
        if overlap:
            raise ProvenanceError(
                f"batch overlaps absorbed data: {sorted(overlap)[:5]} ...")
        lmls = np.array([mixture_log_marginal(m, batch) for m in current.mixtures])
        if current.weights.mode == "bayesian":
            new_weights = _normalize(current.weights.log_raw + lmls, "bayesian")
        else:
            new_weights = current.weights
        new_mixtures = tuple(mixture_update(m, batch) for m in current.mixtures)
        next_state = SynthesizedModel(new_mixtures, new_weights)
        steps.append(SynthesisStep(tuple(int(x) for x in ids), current, lmls, new_weights))
        current = next_state
    return SynthesisTrajectory(tuple(steps), current)
