"""Missing post-money valuation estimation.

Targets are natural logs of PMV in USD, regressed on the round-level
features (days since 1926-01-01, days and money-raised deltas to the
previous financing event, investor count, lead investor rank, sector and
country one-hots). Two deterministic regressors: ridge on standardized
features with the penalty chosen from {0.01, 0.1, 1, 10} by seeded 5-fold
cross-validation (default), and k-nearest-neighbors (k=10, standardized
Euclidean). Observed values are never overwritten.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import Dataset, ExitEvent, FundingRound, Organization, Provenance, SECTORS

FEATURE_EPOCH = dt.date(1926, 1, 1)
RIDGE_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
MIN_LABELED_ROWS = 50
MODEL_FORMAT_VERSION = 1


class ImputeError(ValueError):
    pass


@dataclass(frozen=True)
class PmvFeatureVector:
    days_since_epoch: float          # T
    days_since_prev: float           # dT, 0 if first round
    money_raised_usd: float          # M
    money_raised_delta_usd: float    # dM, 0 if first round
    investor_count: float            # N
    lead_investor_rank: float        # R, 0 sentinel when unknown
    sector: str                      # primary sector label or "other"
    country: str


def build_features(round_: FundingRound, history: Sequence[FundingRound],
                   org: Organization) -> PmvFeatureVector:
    """Feature vector for one round given the org's earlier rounds, sorted."""
    prev = history[-1] if history else None
    days_since_prev = (round_.date - prev.date).days if prev else 0
    delta_usd = (round_.amount_musd - prev.amount_musd) * 1e6 if prev else 0.0
    sector = min(org.sectors) if org.sectors else "other"
    return PmvFeatureVector(
        days_since_epoch=float((round_.date - FEATURE_EPOCH).days),
        days_since_prev=float(days_since_prev),
        money_raised_usd=round_.amount_musd * 1e6,
        money_raised_delta_usd=delta_usd,
        investor_count=float(round_.investor_count),
        lead_investor_rank=float(round_.lead_investor_rank or 0),
        sector=sector,
        country=org.country or "other",
    )


@dataclass(frozen=True)
class FeatureSpace:
    """Fixed encoding of feature vectors into numeric arrays."""

    sectors: tuple[str, ...]
    countries: tuple[str, ...]  # top-k by training frequency, then "other"

    @staticmethod
    def from_training(vectors: Sequence[PmvFeatureVector], country_top_k: int = 20) -> "FeatureSpace":
        counts: dict[str, int] = {}
        for v in vectors:
            counts[v.country] = counts.get(v.country, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        countries = tuple(c for c, _ in ranked[:country_top_k])
        return FeatureSpace(sectors=tuple(SECTORS) + ("other",), countries=countries + ("other",))

    @property
    def names(self) -> list[str]:
        return (
            ["T", "dT", "M", "dM", "N", "R"]
            + [f"S:{s}" for s in self.sectors]
            + [f"G:{c}" for c in self.countries]
        )

    def encode(self, v: PmvFeatureVector) -> np.ndarray:
        sector = v.sector if v.sector in self.sectors else "other"
        country = v.country if v.country in self.countries else "other"
        row = [
            v.days_since_epoch,
            v.days_since_prev,
            v.money_raised_usd,
            v.money_raised_delta_usd,
            v.investor_count,
            v.lead_investor_rank,
        ]
        row.extend(1.0 if s == sector else 0.0 for s in self.sectors)
        row.extend(1.0 if c == country else 0.0 for c in self.countries)
        return np.asarray(row, dtype=float)

    def matrix(self, vectors: Sequence[PmvFeatureVector]) -> np.ndarray:
        return np.vstack([self.encode(v) for v in vectors])


@dataclass(frozen=True)
class ImputerConfig:
    kind: str = "ridge"  # or "knn"
    seed: int = 7
    knn_k: int = 10
    country_top_k: int = 20
    holdout_fraction: float = 0.2
    cv_folds: int = 5


@dataclass(frozen=True)
class ImputationReport:
    holdout_mae: float
    holdout_median_ae: float
    n_train: int
    n_holdout: int
    per_sector_mae: Mapping[str, float]
    ridge_lambda: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "holdout_mae_log": self.holdout_mae,
            "holdout_median_ae_log": self.holdout_median_ae,
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
            "per_sector_mae_log": dict(self.per_sector_mae),
            "ridge_lambda": self.ridge_lambda,
        }


@dataclass
class ImputerModel:
    kind: str
    space: FeatureSpace
    mean: np.ndarray
    sd: np.ndarray
    weights: Optional[np.ndarray] = None        # ridge: intercept first
    ridge_lambda: Optional[float] = None
    knn_k: Optional[int] = None
    train_x: Optional[np.ndarray] = None        # knn: standardized rows
    train_y: Optional[np.ndarray] = None

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.sd

    def predict_log(self, vectors: Sequence[PmvFeatureVector]) -> np.ndarray:
        x = self._standardize(self.space.matrix(vectors))
        if self.kind == "ridge":
            return self.weights[0] + x @ self.weights[1:]
        k = self.knn_k
        out = np.empty(len(x))
        for i, row in enumerate(x):
            dist = np.sqrt(((self.train_x - row) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            out[i] = self.train_y[nearest].mean()
        return out

    def to_json(self) -> str:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "target_transform": "ln_pmv_usd",
            "sectors": list(self.space.sectors),
            "countries": list(self.space.countries),
            "standardization": {"mean": self.mean.tolist(), "sd": self.sd.tolist()},
        }
        if self.kind == "ridge":
            doc["ridge"] = {"lambda": self.ridge_lambda, "weights": self.weights.tolist()}
        else:
            doc["knn"] = {
                "k": self.knn_k,
                "train_x": self.train_x.tolist(),
                "train_y": self.train_y.tolist(),
            }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "ImputerModel":
        doc = json.loads(text)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ImputeError(f"unsupported model format {doc.get('format_version')!r}")
        space = FeatureSpace(sectors=tuple(doc["sectors"]), countries=tuple(doc["countries"]))
        model = ImputerModel(
            kind=doc["kind"],
            space=space,
            mean=np.asarray(doc["standardization"]["mean"], dtype=float),
            sd=np.asarray(doc["standardization"]["sd"], dtype=float),
        )
        if model.kind == "ridge":
            model.ridge_lambda = doc["ridge"]["lambda"]
            model.weights = np.asarray(doc["ridge"]["weights"], dtype=float)
        else:
            model.knn_k = doc["knn"]["k"]
            model.train_x = np.asarray(doc["knn"]["train_x"], dtype=float)
            model.train_y = np.asarray(doc["knn"]["train_y"], dtype=float)
        return model


def _ridge_solve(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Penalized least squares with an unpenalized intercept column."""
    n = len(x)
    design = np.hstack([np.ones((n, 1)), x])
    penalty = lam * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    return np.linalg.solve(design.T @ design + penalty, design.T @ y)


def _cv_lambda(x: np.ndarray, y: np.ndarray, folds: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(x))
    chunks = np.array_split(order, folds)
    best_lam, best_mse = RIDGE_LAMBDA_GRID[0], math.inf
    for lam in RIDGE_LAMBDA_GRID:
        sq_err = 0.0
        for i in range(folds):
            test_idx = chunks[i]
            train_idx = np.concatenate([chunks[j] for j in range(folds) if j != i])
            mean = x[train_idx].mean(axis=0)
            sd = x[train_idx].std(axis=0, ddof=0)
            sd[sd == 0.0] = 1.0
            w = _ridge_solve((x[train_idx] - mean) / sd, y[train_idx], lam)
            pred = w[0] + ((x[test_idx] - mean) / sd) @ w[1:]
            sq_err += float(((pred - y[test_idx]) ** 2).sum())
        mse = sq_err / len(x)
        if mse < best_mse:
            best_lam, best_mse = lam, mse
    return best_lam


def fit_imputer(
    labeled: Sequence[tuple[PmvFeatureVector, float]],
    config: ImputerConfig = ImputerConfig(),
) -> tuple[ImputerModel, ImputationReport]:
    """Fit on an 80% split, report errors on the deterministic 20% holdout.

    `labeled` pairs feature vectors with PMVs in USD; targets are trained in
    log space so predictions are positive by construction.
    """
    if len(labeled) < MIN_LABELED_ROWS:
        raise ImputeError(
            f"only {len(labeled)} labeled rounds (< {MIN_LABELED_ROWS}); "
            "run in passthrough mode (imputation disabled) or supply more data"
        )
    for _, pmv in labeled:
        if pmv <= 0:
            raise ImputeError(f"non-positive pmv {pmv}")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(labeled))
    n_holdout = max(1, int(round(config.holdout_fraction * len(labeled))))
    holdout_idx = order[:n_holdout]
    train_idx = order[n_holdout:]

    vectors = [labeled[i][0] for i in train_idx]
    space = FeatureSpace.from_training(vectors, country_top_k=config.country_top_k)
    x_train = space.matrix(vectors)
    y_train = np.asarray([math.log(labeled[i][1]) for i in train_idx])

    mean = x_train.mean(axis=0)
    sd = x_train.std(axis=0, ddof=0)
    sd[sd == 0.0] = 1.0

    model = ImputerModel(kind=config.kind, space=space, mean=mean, sd=sd)
    if config.kind == "ridge":
        lam = _cv_lambda(x_train, y_train, config.cv_folds, config.seed)
        model.ridge_lambda = lam
        model.weights = _ridge_solve((x_train - mean) / sd, y_train, lam)
    elif config.kind == "knn":
        model.knn_k = config.knn_k
        model.train_x = (x_train - mean) / sd
        model.train_y = y_train
    else:
        raise ImputeError(f"unknown imputer kind {config.kind!r}")

    hold_vectors = [labeled[i][0] for i in holdout_idx]
    hold_y = np.asarray([math.log(labeled[i][1]) for i in holdout_idx])
    abs_err = np.abs(model.predict_log(hold_vectors) - hold_y)
    per_sector: dict[str, list[float]] = {}
    for v, err in zip(hold_vectors, abs_err):
        per_sector.setdefault(v.sector, []).append(float(err))
    report = ImputationReport(
        holdout_mae=float(abs_err.mean()),
        holdout_median_ae=float(np.median(abs_err)),
        n_train=len(train_idx),
        n_holdout=len(holdout_idx),
        per_sector_mae={s: sum(v) / len(v) for s, v in sorted(per_sector.items())},
        ridge_lambda=model.ridge_lambda,
    )
    return model, report


def predict_pmv(model: ImputerModel, x: PmvFeatureVector) -> float:
    """PMV estimate in USD, strictly positive."""
    return float(np.exp(model.predict_log([x])[0]))


def labeled_rows(dataset: Dataset) -> list[tuple[PmvFeatureVector, float]]:
    """All rounds with an observed PMV, paired with PMV in USD."""
    orgs = dataset.org_by_id()
    rows: list[tuple[PmvFeatureVector, float]] = []
    for org_id, rounds in sorted(dataset.rounds_by_org().items()):
        org = orgs.get(org_id)
        if org is None:
            continue
        for i, r in enumerate(rounds):
            if r.pmv_musd is not None and r.pmv_provenance is Provenance.OBSERVED:
                rows.append((build_features(r, rounds[:i], org), r.pmv_musd * 1e6))
    return rows


def impute_dataset(dataset: Dataset, model: ImputerModel) -> tuple[Dataset, dict[str, int]]:
    """Fill missing round PMVs and exit values; observed values are immutable.

    Missing exit values reuse the organization's last-round features, per the
    documented convention. Re-running on an already-imputed dataset changes
    nothing.
    """
    orgs = dataset.org_by_id()
    rounds_by_org = dataset.rounds_by_org()
    imputed_rounds = 0
    imputed_exits = 0

    new_rounds: list[FundingRound] = []
    for org_id, rounds in sorted(rounds_by_org.items()):
        org = orgs.get(org_id)
        for i, r in enumerate(rounds):
            if r.pmv_musd is None and org is not None:
                pmv_usd = predict_pmv(model, build_features(r, rounds[:i], org))
                new_rounds.append(r.with_pmv(pmv_usd / 1e6, Provenance.IMPUTED))
                imputed_rounds += 1
            else:
                new_rounds.append(r)

    new_exits: list[ExitEvent] = []
    for e in dataset.exits:
        org = orgs.get(e.org_id)
        rounds = rounds_by_org.get(e.org_id, ())
        if e.exit_value_musd is None and org is not None and rounds:
            last = rounds[-1]
            features = build_features(last, list(rounds[:-1]), org)
            value_usd = predict_pmv(model, features)
            new_exits.append(e.with_value(value_usd / 1e6, Provenance.IMPUTED))
            imputed_exits += 1
        else:
            new_exits.append(e)

    out = Dataset.freeze(dataset.organizations, new_rounds, new_exits)
    return out, {"imputed_rounds": imputed_rounds, "imputed_exits": imputed_exits}
