"""The two prediction protocols and every report metric.

Six comparisons make up the canonical experiment: each split in turn is
reserved as test data, the other splits train the models, and predictions
are scored either all at once ("once") or in seeded batches with models and
synthesis weights updating between batches ("ten by ten", eleven batches of
ten for a 110-case split).  Methods with a full predictive distribution are
scored through it; point baselines go through the lognormal-corrected
back-transform exp(yhat + MSE_hat / 2).

No method ever sees a test case before predicting it; the runners assert
this through the provenance sets carried by every model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysts import (
    AnalystProgram,
    ModelMixture,
    SelectedLinearModel,
    forward_selection_ic,
    mixture_predictive,
    mixture_update,
    run_analyst,
)
from .data import BatchSchedule, Dataset, SplitAssignment, batch_partition, derive_seed, split_random
from .linmodel import (
    IntegerPredictive,
    PredictiveDistribution,
    ResponseSpec,
    discretize,
    identity,
)
from .synthesis import (
    SynthesisWeights,
    SynthesizedModel,
    convex_weights,
    sequential_update,
    synthesize,
)

EXCEED_THRESHOLD = 8
POINT_LOG_THRESHOLD = math.log(8.5)


# ---------------------------------------------------------------------------
# Scalar metrics
# ---------------------------------------------------------------------------

def sse_log(predictions, truth) -> float:
    """Sum of squared errors on the modeling (log) scale."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError("predictions and truth must have equal length")
    return float(np.sum((p - t) ** 2))


def mse_ozone_bayes(integer_predictives, truth_ozone) -> float:
    """Mean squared error of integer-predictive means on the original scale."""
    t = np.asarray(truth_ozone, dtype=float)
    if len(integer_predictives) != t.size:
        raise ValueError("need one predictive per case")
    means = np.array([ip.mean() for ip in integer_predictives])
    return float(np.mean((means - t) ** 2))


def point_rule_ozone(point_log_predictions, mse_hat: float) -> np.ndarray:
    """Back-transform log-scale point predictions: exp(yhat + MSE_hat / 2)."""
    if mse_hat < 0:
        raise ValueError("mse_hat must be nonnegative")
    return np.exp(np.asarray(point_log_predictions, dtype=float) + 0.5 * mse_hat)


def mse_ozone_pointrule(point_log_predictions, mse_hat: float, truth_ozone) -> float:
    """Original-scale MSE of lognormal-corrected point predictions."""
    preds = point_rule_ozone(point_log_predictions, mse_hat)
    t = np.asarray(truth_ozone, dtype=float)
    if preds.shape != t.shape:
        raise ValueError("predictions and truth must have equal length")
    return float(np.mean((preds - t) ** 2))


def classify_exceedance_bayes(integer_predictive: IntegerPredictive,
                              threshold: int = EXCEED_THRESHOLD) -> bool:
    """Forecast exceed when P(value > threshold) > 0.5 (ties are not-exceed)."""
    return integer_predictive.exceedance_prob(threshold) > 0.5

def classify_exceedance_point(point_log_prediction: float,
                              log_threshold: float = POINT_LOG_THRESHOLD) -> bool:
    """Forecast exceed when the log-scale point prediction is strictly above
    the log threshold."""
    return point_log_prediction > log_threshold


def observed_exceedance(truth_ozone, threshold: int = EXCEED_THRESHOLD) -> np.ndarray:
    """A case exceeds when observed ozone is strictly above the threshold."""
    return np.asarray(truth_ozone, dtype=float) > threshold


def interval_coverage(predictives, truths, level: float = 0.90) -> float:
    """Percent of truths inside central predictive intervals.

    The interval cuts off (1 - level)/2 of the predictive distribution in
    each tail; for a continuous predictive, the truth lies inside exactly
    when its predictive CDF value falls in [(1-level)/2, 1-(1-level)/2].
    """
    if not 0.0 < level <= 1.0:
        raise ValueError("level must be in (0, 1]")
    t = np.asarray(truths, dtype=float)
    if len(predictives) != t.size:
        raise ValueError("need one predictive per case")
    lo = (1.0 - level) / 2.0
    hi = 1.0 - lo
    u = np.array([float(p.cdf(v)) for p, v in zip(predictives, t)])
    return 100.0 * float(np.mean((u >= lo) & (u <= hi)))


@dataclass(frozen=True)
class CalibrationSummary:
    avg_var: float
    mse: float
    optimism: float        # mse / avg_var; above one means over-optimistic


def calibration_summary(predictives, truths) -> CalibrationSummary:
    """Internal vs external accuracy on the modeling scale."""
    t = np.asarray(truths, dtype=float)
    variances = np.array([p.variance() for p in predictives])
    means = np.array([p.mean() for p in predictives])
    avg_var = float(np.mean(variances))
    mse = float(np.mean((means - t) ** 2))
    return CalibrationSummary(avg_var, mse, mse / avg_var)


# ---------------------------------------------------------------------------
# Method adapters
# ---------------------------------------------------------------------------

class AnalystPool:
    """Shared state for methods built on the same analyst mixtures.

    Several evaluation methods (each analyst row plus both syntheses) view
    the same underlying mixtures.  The pool absorbs每 batch exactly once, via
    the canonical sequential-update path, and records the weight trajectory.
    """

    def __init__(self, names, mixtures, data: Dataset):
        k = len(mixtures)
        if k < 1:
            raise ValueError("pool needs at least one mixture")
        self.names = list(names)
        self.data = data
        uniform = np.full(k, 1.0 / k)
        self.bayes_state = synthesize(
            mixtures, SynthesisWeights(uniform, "bayesian", np.log(uniform)))
        self.trajectory: list[dict] = []

    @property
    def k(self) -> int:
        return self.bayes_state.k

    @property
    def mixtures(self) -> tuple[ModelMixture, ...]:
        return self.bayes_state.mixtures

    @property
    def absorbed(self) -> frozenset:
        return self.bayes_state.absorbed

    @property
    def bayes_weights(self) -> np.ndarray:
        return self.bayes_state.weights.weights

    def convex_state(self) -> SynthesizedModel:
        return synthesize(self.mixtures, convex_weights(self.k))

    def absorb(self, batch: Dataset) -> None:
        ids = batch.id_set()
        if ids <= self.absorbed:
            return  # another view of this pool already absorbed the batch
        schedule = BatchSchedule(batch.n_rows, 0, (np.array(sorted(ids)),))
        traj = sequential_update(self.bayes_state, schedule, self.data)
        step = traj.steps[0]
        self.trajectory.append({
            "batch": len(self.trajectory),
            "batch_ids": list(step.batch_ids),
            "log_marginals": [float(v) for v in step.log_marginals],
            "weights": [float(w) for w in step.weights_after.weights],
        })
        self.bayes_state = traj.final

    def trajectory_json(self) -> dict:
        return {"analysts": list(self.names), "steps": list(self.trajectory)}


class AnalystMethod:
    """One analyst's own predictions, drawn from the shared pool."""

    is_bayes = True

    def __init__(self, pool: AnalystPool, index: int, name: str):
        self.pool = pool
        self.index = index
        self.name = name

    @property
    def absorbed(self) -> frozenset:
        return self.pool.absorbed

    def predictives(self, rows: Dataset) -> list[PredictiveDistribution]:
        return mixture_predictive(self.pool.mixtures[self.index], rows)

    def absorb(self, batch: Dataset) -> None:
        self.pool.absorb(batch)


class SynthesisMethod:
    """Synthesized predictions under bayesian or convex weights."""

    is_bayes = True

    def __init__(self, pool: AnalystPool, mode: str, name: str):
        if mode not in ("bayesian", "convex"):
            raise ValueError(f"unknown synthesis mode {mode!r}")
        self.pool = pool
        self.mode = mode
        self.name = name

    @property
    def absorbed(self) -> frozenset:
        return self.pool.absorbed

    def _state(self) -> SynthesizedModel:
        if self.mode == "bayesian":
            return self.pool.bayes_state
        return self.pool.convex_state()

    def predictives(self, rows: Dataset) -> list[PredictiveDistribution]:
        return self._state().predictive(rows)

    def absorb(self, batch: Dataset) -> None:
        self.pool.absorb(batch)

    def trajectory_json(self) -> dict:
        out = self.pool.trajectory_json()
        out["mode"] = self.mode
        if self.mode == "convex":
            out["steps"] = [
                {**s, "weights": [1.0 / self.pool.k] * self.pool.k} for s in out["steps"]
            ]
        return out


class PointBaselineMethod:
    """Forward-selection baseline; updating means refitting on seen data."""

    is_bayes = False

    def __init__(self, name: str, data: Dataset, train_ids, candidates,
                 criterion: str, response: ResponseSpec):
        self.name = name
        self.data = data
        self.seen = frozenset(int(i) for i in train_ids)
        self.candidates = tuple(candidates)
        self.criterion = criterion
        self.response = response
        self.model = forward_selection_ic(data.subset(sorted(self.seen)),
                                          self.candidates, criterion, response)

    @property
    def absorbed(self) -> frozenset:
        return self.seen

    @property
    def mse_hat(self) -> float:
        return self.model.mse_hat

    def predict_log(self, rows: Dataset) -> np.ndarray:
        return self.model.predict_log(rows)

    def absorb(self, batch: Dataset) -> None:
        self.seen = self.seen | batch.id_set()
        self.model = forward_selection_ic(self.data.subset(sorted(self.seen)),
                                          self.candidates, self.criterion, self.response)


# ---------------------------------------------------------------------------
# Plans, rows, protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """One cell of the comparison grid: a reserved test split and a protocol."""

    split: SplitAssignment
    test_index: int
    protocol: str                      # "once" or "ten"
    response: ResponseSpec = ResponseSpec()
    batch_size: int = 10
    schedule_seed: int = 0
    coverage_level: float = 0.90
    exceed_threshold: int = EXCEED_THRESHOLD

    def __post_init__(self):
        if self.protocol not in ("once", "ten"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if not 0 <= self.test_index < self.split.k:
            raise ValueError("test_index out of range")

    @property
    def test_ids(self) -> np.ndarray:
        return self.split.parts[self.test_index]

    @property
    def train_ids(self) -> np.ndarray:
        others = [p for i, p in enumerate(self.split.parts) if i != self.test_index]
        return np.sort(np.concatenate(others))

    def schedule(self) -> BatchSchedule:
        return batch_partition(self.test_ids, self.batch_size, self.schedule_seed)


@dataclass
class MetricRow:
    """All scored quantities for one method on one grid cell."""

    method: str
    test_split: int                    # 1-based, matching report labels
    protocol: str
    n_test: int
    sse_log: float
    mse_log_per_case: float
    mse_ozone: float | None = None
    classification_errors: float | None = None
    coverage_pct: float | None = None
    avg_pred_var: float | None = None
    optimism: float | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}

    @classmethod
    def from_json(cls, obj: dict) -> "MetricRow":
        return cls(**obj)


def _score_bayes(name: str, preds, rows: Dataset, plan: ExperimentPlan) -> MetricRow:
    truth_log = plan.response.apply(rows)
    pred_means = np.array([p.mean() for p in preds])
    sse = sse_log(pred_means, truth_log)
    cal = calibration_summary(preds, truth_log)
    row = MetricRow(
        method=name,
        test_split=plan.test_index + 1,
        protocol=plan.protocol,
        n_test=rows.n_rows,
        sse_log=sse,
        mse_log_per_case=sse / rows.n_rows,
        coverage_pct=interval_coverage(preds, truth_log, plan.coverage_level),
        avg_pred_var=cal.avg_var,
        optimism=cal.optimism,
    )
    if plan.response.log:
        truth_ozone = rows.column(plan.response.column)
        ips = [discretize(p) for p in preds]
        row.mse_ozone = mse_ozone_bayes(ips, truth_ozone)
        forecast = np.array([classify_exceedance_bayes(ip, plan.exceed_threshold)
                             for ip in ips])
        row.classification_errors = float(
            np.sum(forecast != observed_exceedance(truth_ozone, plan.exceed_threshold)))
    return row


def _score_point(name: str, preds_log: np.ndarray, mse_hat: float, rows: Dataset,
                 plan: ExperimentPlan) -> MetricRow:
    truth_log = plan.response.apply(rows)
    sse = sse_log(preds_log, truth_log)
    row = MetricRow(
        method=name,
        test_split=plan.test_index + 1,
        protocol=plan.protocol,
        n_test=rows.n_rows,
        sse_log=sse,
        mse_log_per_case=sse / rows.n_rows,
    )
    if plan.response.log:
        truth_ozone = rows.column(plan.response.column)
        row.mse_ozone = mse_ozone_pointrule(preds_log, mse_hat, truth_ozone)
        forecast = np.array([classify_exceedance_point(v) for v in preds_log])
        row.classification_errors = float(
            np.sum(forecast != observed_exceedance(truth_ozone, plan.exceed_threshold)))
    return row


def _assert_unseen(method, batch_ids: frozenset):
    overlap = method.absorbed & batch_ids
    if overlap:
        raise RuntimeError(
            f"method {method.name!r} saw test cases before predicting them: "
            f"{sorted(overlap)[:5]} ...")


def run_once(plan: ExperimentPlan, methods, data: Dataset) -> list[MetricRow]:
    """Static protocol: every test case predicted from the trained state."""
    test = data.subset(plan.test_ids)
    rows = []
    for m in methods:
        _assert_unseen(m, test.id_set())
        if m.is_bayes:
            rows.append(_score_bayes(m.name, m.predictives(test), test, plan))
        else:
            rows.append(_score_point(m.name, m.predict_log(test), m.mse_hat, test, plan))
    return rows


def run_ten_by_ten(plan: ExperimentPlan, methods, data: Dataset) -> list[MetricRow]:
    """Sequential protocol: predict a batch, absorb it, move on.

    All methods see the identical batch order.  Metrics accumulate over
    every prediction made along the way.
    """
    schedule = plan.schedule()
    bayes_preds = {m.name: [] for m in methods if m.is_bayes}
    point_preds = {m.name: [] for m in methods if not m.is_bayes}
    point_mse_hat = {}
    ordered_ids = []
    for ids in schedule.batches:
        batch = data.subset(ids)
        ordered_ids.extend(int(i) for i in ids)
        for m in methods:
            _assert_unseen(m, batch.id_set())
            if m.is_bayes:
                bayes_preds[m.name].extend(m.predictives(batch))
            else:
                point_preds[m.name].append(m.predict_log(batch))
                # the paper-style point rule uses the in-sample MSE of the
                # final refit state; keep the latest
                point_mse_hat[m.name] = m.mse_hat
        for m in methods:
            m.absorb(batch)
    test = data.subset(np.array(ordered_ids))
    rows = []
    for m in methods:
        if m.is_bayes:
            rows.append(_score_bayes(m.name, bayes_preds[m.name], test, plan))
        else:
            preds = np.concatenate(point_preds[m.name])
            rows.append(_score_point(m.name, preds, point_mse_hat[m.name], test, plan))
    return rows


def mean_analyst_row(row_a: MetricRow, row_b: MetricRow,
                     name: str = "mean-analyst") -> MetricRow:
    """Expected metrics when one of the two analysts is picked at random."""
    if (row_a.test_split, row_a.protocol) != (row_b.test_split, row_b.protocol):
        raise ValueError("rows come from different grid cells")

    def avg(x, y):
        if x is None or y is None:
            return None
        return (x + y) / 2.0

    return MetricRow(
        method=name,
        test_split=row_a.test_split,
        protocol=row_a.protocol,
        n_test=row_a.n_test,
        sse_log=avg(row_a.sse_log, row_b.sse_log),
        mse_log_per_case=avg(row_a.mse_log_per_case, row_b.mse_log_per_case),
        mse_ozone=avg(row_a.mse_ozone, row_b.mse_ozone),
        classification_errors=avg(row_a.classification_errors, row_b.classification_errors),
        coverage_pct=avg(row_a.coverage_pct, row_b.coverage_pct),
        avg_pred_var=avg(row_a.avg_pred_var, row_b.avg_pred_var),
        optimism=avg(row_a.optimism, row_b.optimism),
    )


# ---------------------------------------------------------------------------
# Full comparison grid
# ---------------------------------------------------------------------------

_METRIC_FIELDS = ("n_test", "sse_log", "mse_log_per_case", "mse_ozone",
                  "classification_errors", "coverage_pct", "avg_pred_var", "optimism")


@dataclass
class MetricsReport:
    rows: list[MetricRow]
    meta: dict = field(default_factory=dict)

    def to_records(self) -> list[dict]:
        """Long form: one (method, split, protocol, metric, value) per entry."""
        out = []
        for r in self.rows:
            for metric in _METRIC_FIELDS:
                value = getattr(r, metric)
                if value is None:
                    continue
                out.append({
                    "method": r.method,
                    "split": r.test_split,
                    "protocol": r.protocol,
                    "metric": metric,
                    "value": value,
                })
        return out

    def to_json(self) -> dict:
        return {"meta": dict(self.meta), "records": self.to_records()}

    @classmethod
    def from_json(cls, obj: dict) -> "MetricsReport":
        cells: dict[tuple, dict] = {}
        order: list[tuple] = []
        for rec in obj["records"]:
            key = (rec["method"], rec["split"], rec["protocol"])
            if key not in cells:
                cells[key] = {}
                order.append(key)
            cells[key][rec["metric"]] = rec["value"]
        rows = []
        for method, split, protocol in order:
            vals = cells[(method, split, protocol)]
            rows.append(MetricRow(
                method=method, test_split=split, protocol=protocol,
                n_test=int(vals.get("n_test", 0)),
                sse_log=vals.get("sse_log"),
                mse_log_per_case=vals.get("mse_log_per_case"),
                mse_ozone=vals.get("mse_ozone"),
                classification_errors=vals.get("classification_errors"),
                coverage_pct=vals.get("coverage_pct"),
                avg_pred_var=vals.get("avg_pred_var"),
                optimism=vals.get("optimism"),
            ))
        return cls(rows, dict(obj.get("meta", {})))

    def select(self, **filters) -> list[MetricRow]:
        out = []
        for r in self.rows:
            if all(getattr(r, k) == v for k, v in filters.items()):
                out.append(r)
        return out


@dataclass
class ExperimentResult:
    split: SplitAssignment
    report: MetricsReport
    trajectories: dict      # (test_split, mode) -> trajectory json


def build_eligible_analysts(programs, split: SplitAssignment, test_index: int,
                            data: Dataset, master_seed: int):
    """Fit the analysts whose home portions are training data, then update
    each with every other training portion so all share provenance."""
    eligible = [(i, p) for i, p in enumerate(programs) if i != test_index]
    names, mixtures = [], []
    for i, prog in eligible:
        portion = data.subset(split.parts[i])
        mix = run_analyst(prog, portion, derive_seed(master_seed, f"analyst/{prog.name}"))
        for j, _ in eligible:
            if j != i:
                mix = mixture_update(mix, data.subset(split.parts[j]))
        names.append(prog.name)
        mixtures.append(mix)
    return names, mixtures


def default_baseline_candidates(data: Dataset, response: ResponseSpec):
    return tuple(identity(c) for c in data.columns if c != response.column)


def run_experiment(data: Dataset, programs, k: int, master_seed: int,
                   protocols=("once", "ten"), modes=("bayesian", "convex"),
                   baselines=("AIC", "BIC"), batch_size: int = 10,
                   response: ResponseSpec = ResponseSpec(),
                   split: SplitAssignment | None = None) -> ExperimentResult:
    """Run the full grid: every test-split choice, protocol and mode."""
    programs = list(programs)
    if len(programs) != k:
        raise ValueError(f"need exactly one analyst program per split (k={k})")
    if split is None:
        split = split_random(data, k, derive_seed(master_seed, "split"))
    rows: list[MetricRow] = []
    trajectories: dict = {}
    for t in range(k):
        for protocol in protocols:
            names, mixtures = build_eligible_analysts(programs, split, t, data, master_seed)
            pool = AnalystPool(names, mixtures, data)
            methods = [AnalystMethod(pool, i, name) for i, name in enumerate(names)]
            mode_methods = []
            for mode in modes:
                label = "bayes-synth" if mode == "bayesian" else "convex-synth"
                mode_methods.append(SynthesisMethod(pool, mode, label))
            methods.extend(mode_methods)
            train_ids = np.sort(np.concatenate(
                [p for i, p in enumerate(split.parts) if i != t]))
            for crit in baselines:
                methods.append(PointBaselineMethod(
                    crit.lower(), data, train_ids,
                    default_baseline_candidates(data, response), crit, response))
            plan = ExperimentPlan(
                split, t, protocol, response=response, batch_size=batch_size,
                schedule_seed=derive_seed(master_seed, f"batches/test{t}"))
            if protocol == "once":
                cell_rows = run_once(plan, methods, data)
            else:
                cell_rows = run_ten_by_ten(plan, methods, data)
                for m in mode_methods:
                    trajectories[(t + 1, m.mode)] = m.trajectory_json()
            analyst_rows = [r for r in cell_rows if r.method in names]
            if len(analyst_rows) == 2:
                cell_rows.append(mean_analyst_row(analyst_rows[0], analyst_rows[1]))
            rows.extend(cell_rows)
    meta = {
        "k": k,
        "seed": master_seed,
        "protocols": list(protocols),
        "modes": list(modes),
        "baselines": list(baselines),
        "batch_size": batch_size,
        "analysts": [p.name for p in programs],
        "response": response.to_config(),
        "n_rows": data.n_rows,
    }
    return ExperimentResult(split, MetricsReport(rows, meta), trajectories)
