"""The stochastic ensemble training loop and weighted-vote prediction.

Each round builds one candidate weak learner per source domain from a
fresh target bootstrap, a proportional source subsample, and a randomly
drawn predicate; the candidate with the smallest clamped error joins
the ensemble with vote weight beta = 1 - eps / (1 - eps), normalized at
the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import TransferTask
from .linalg import SingularSystemError
from .predicates import PredicateSpec, evaluate_predicate, refit_predicate
from .sampling import (
    DegenerateSampleError,
    bootstrap_target,
    draw_predicate,
    proportional_sample_source,
    stream_for,
)
from .weak_learner import (
    FitError,
    HyperParams,
    WeakLearner,
    fit_weak_learner,
    predict_proba,
)

EPSILON_FLOOR = 0.001
EPSILON_CEIL = 0.499


class TrainingError(RuntimeError):
    """No usable weak learner could be produced in any round."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run.

    H                 number of ensemble rounds
    gamma             proportional source-sampling ratio
    params            weak-learner hyperparameters
    master_seed       root of every random stream in the run
    eval_split        where candidate errors are measured; only the full
                      labeled target training set is supported
    refit_max_epochs  margin-classifier epochs for per-round predicate refits
    """

    gamma: float
    params: HyperParams
    master_seed: int
    H: int = 100
    eval_split: str = "full_target_train"
    refit_max_epochs: int = 200

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.eval_split != "full_target_train":
            raise ValueError(f"unsupported eval_split: {self.eval_split!r}")


@dataclass
class Ensemble:
    """Ordered weak learners with normalized vote weights summing to 1."""

    learners: list[WeakLearner]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.learners) != self.weights.shape[0]:
            raise ValueError("one weight per learner required")

    def __len__(self) -> int:
        return len(self.learners)


@dataclass(frozen=True)
class RoundRecord:
    """Trace entry for one completed round."""

    h: int
    source_index: int
    epsilon: float
    beta: float
    test_error: float


@dataclass
class TrainTrace:
    """Per-round records plus the rounds skipped for lack of candidates."""

    rounds: list[RoundRecord] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)

    @property
    def h_index(self) -> list[int]:
        return [r.h for r in self.rounds]

    @property
    def test_error(self) -> list[float]:
        return [r.test_error for r in self.rounds]


def clamp_error(raw: float) -> float:
    """Clamp a raw misclassification fraction into [0.001, 0.499]."""
    return min(max(raw, EPSILON_FLOOR), EPSILON_CEIL)


def vote_weight(epsilon: float) -> float:
    """beta = 1 - eps/(1 - eps), evaluated as (1 - 2 eps)/(1 - eps)."""
    return (1.0 - 2.0 * epsilon) / (1.0 - epsilon)


def weak_error(learner: WeakLearner, samples: np.ndarray, labels: np.ndarray) -> float:
    """Clamped misclassification fraction of one learner on (samples, labels)."""
    proba = predict_proba(learner, samples)
    predicted = proba >= 0.5
    raw = float(np.mean(predicted != (np.asarray(labels) == 1)))
    return clamp_error(raw)


def _partition_pool(pool: list[PredicateSpec], source_index: int) -> list[PredicateSpec]:
    # source-kind entries of other domains are out of scope for this draw
    return [sp for sp in pool if sp.source_index in (None, source_index)]


def train_setrlusi(
    task: TransferTask, pool: list[PredicateSpec], config: TrainConfig
) -> tuple[Ensemble, TrainTrace]:
    """Run the full ensemble loop and trace per-round test error.

    Rounds where every candidate fit fails are skipped and noted in the
    trace; an entirely empty ensemble raises TrainingError.
    """
    if not pool:
        raise ValueError("predicate pool is empty")
    train_X = task.target_train.features
    train_y = task.target_train.labels
    test_X = task.target_test.features
    test_y = task.target_test.labels

    learners: list[WeakLearner] = []
    betas: list[float] = []
    trace = TrainTrace()
    # running beta-weighted sum of per-learner test probabilities
    weighted_test = np.zeros(test_X.shape[0])

    for h in range(1, config.H + 1):
        candidates = []
        for i, source in enumerate(task.sources):
            if source.labels is None or np.unique(source.labels).size < 2:
                continue  # degenerate source cannot seed a candidate
            gen = stream_for(config.master_seed, h, i).generator()
            try:
                boot = bootstrap_target(task.target_train, gen)
                sub = proportional_sample_source(source, config.gamma, gen)
                spec = draw_predicate(_partition_pool(pool, i), gen)
                spec = refit_predicate(spec, sub, config.refit_max_epochs)
                half = gen.choice(boot.n, size=boot.n // 2, replace=False)
                fit_X = boot.features[half]
                fit_y = boot.labels[half]
                psi = evaluate_predicate(spec, fit_X)
                learner = fit_weak_learner(fit_X, fit_y, psi, config.params)
            except (FitError, DegenerateSampleError, SingularSystemError):
                continue
            eps = weak_error(learner, train_X, train_y)
            beta = vote_weight(eps)
            candidates.append((eps, i, learner.with_error(eps, beta)))

        if not candidates:
            trace.skipped.append(h)
            continue
        eps, src_idx, chosen = min(candidates, key=lambda c: (c[0], c[1]))
        learners.append(chosen)
        betas.append(chosen.beta)

        weighted_test = weighted_test + chosen.beta * predict_proba(chosen, test_X)
        partial = weighted_test / sum(betas)
        test_error = float(np.mean((partial >= 0.5) != (test_y == 1)))
        trace.rounds.append(
            RoundRecord(
                h=h, source_index=src_idx, epsilon=eps, beta=chosen.beta,
                test_error=test_error,
            )
        )

    if not learners:
        raise TrainingError("every round failed to produce a weak learner")
    betas_arr = np.asarray(betas)
    return Ensemble(learners=learners, weights=betas_arr / betas_arr.sum()), trace


ENSEMBLE_FORMAT_VERSION = 1


def save_ensemble(ensemble: Ensemble, path) -> Path:
    """Write a versioned JSON artifact with every learner's parameters.

    Floats are serialized via repr, so load_ensemble reproduces the
    ensemble bit for bit.
    """
    payload = {
        "format": "setrlusi-ensemble",
        "version": ENSEMBLE_FORMAT_VERSION,
        "weights": [float(w) for w in ensemble.weights],
        "learners": [
            {
                "centers": learner.centers.tolist(),
                "A": learner.A.tolist(),
                "b": learner.b,
                "kernel": {
                    "kind": learner.kernel.kind,
                    "sigma": learner.kernel.sigma,
                    "sigma_rule": learner.kernel.sigma_rule,
                },
                "epsilon": learner.epsilon,
                "beta": learner.beta,
            }
            for learner in ensemble.learners
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return path


def load_ensemble(path) -> Ensemble:
    """Read an ensemble artifact written by save_ensemble."""
    from .linalg import KernelConfig

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "setrlusi-ensemble":
        raise ValueError(f"{path}: not an ensemble artifact")
    if payload.get("version") != ENSEMBLE_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {payload.get('version')}")
    learners = [
        WeakLearner(
            centers=np.asarray(entry["centers"], dtype=np.float64),
            A=np.asarray(entry["A"], dtype=np.float64),
            b=float(entry["b"]),
            kernel=KernelConfig(**entry["kernel"]),
            epsilon=entry["epsilon"],
            beta=entry["beta"],
        )
        for entry in payload["learners"]
    ]
    return Ensemble(learners=learners, weights=np.asarray(payload["weights"]))


def ensemble_predict(
    ensemble: Ensemble, inputs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted-probability score and 0/1 class per input row.

    Weights are renormalized defensively; class 1 is assigned when the
    score reaches 0.5.
    """
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    weights = ensemble.weights / ensemble.weights.sum()
    score = np.zeros(np.asarray(inputs).shape[0])
    for learner, w in zip(ensemble.learners, weights):
        score += w * predict_proba(learner, inputs)
    return score, (score >= 0.5).astype(np.int64)
