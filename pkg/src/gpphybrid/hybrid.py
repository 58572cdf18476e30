"""Process model + learned residual correction, validated by site-grouped k-fold CV.

The learner is trained on additive residuals ``gpp_obs - gpp_process``. A
corrected estimate is ``max(0, gpp_process + predicted residual)``; the
hybrid prediction for new data is the mean of the k fold models' corrected
estimates.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from gpphybrid import learner
from gpphybrid.drivers import DERIVED_COLUMNS, PFT_CODES, REQUIRED_NUMERIC, photo_env
from gpphybrid.errors import InvalidInputError, InvalidPlanError, ModelFormatError, SchemaError
from gpphybrid.learner import FeatureMatrix, GBTConfig, TreeEnsemble
from gpphybrid.pmodel import PModelParams, gpp

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1

#: Learner features in column order, before exclusions.
DEFAULT_FEATURES = (
    *REQUIRED_NUMERIC,
    *DERIVED_COLUMNS,
    *(f"pft_{code}" for code in PFT_CODES),
    "gpp_process",
)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every site to one of ``k`` test folds."""

    k: int
    seed: int
    assignment: Dict[str, int]

    def sites(self, fold: int) -> List[str]:
        return sorted(s for s, f in self.assignment.items() if f == fold)

    def train_sites(self, fold: int) -> List[str]:
        return sorted(s for s, f in self.assignment.items() if f != fold)

    def sizes(self) -> List[int]:
        return [len(self.sites(f)) for f in range(self.k)]


def make_folds(site_ids: Sequence, k: int = 5, seed: int = 42, strata: Dict[str, str] = None) -> FoldPlan:
    """Shuffle the distinct sites with a seeded RNG and deal them round-robin into k folds.

    With ``strata`` (site -> label, e.g. PFT) the shuffled sites are grouped by
    label before dealing, so sites sharing a label are spread over different
    folds and a held-out site's label is still seen in training whenever the
    label has at least two sites. Fold sizes still differ by at most one.
    The input order of ``site_ids`` and duplicates do not matter.
    """
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    sites = sorted({str(s) for s in site_ids})
    if len(sites) < k:
        raise InvalidInputError(f"{len(sites)} site(s) cannot fill {k} folds")
    order = [sites[j] for j in np.random.default_rng(seed).permutation(len(sites))]
    if strata is not None:
        missing = [s for s in sites if s not in strata]
        if missing:
            raise InvalidInputError(f"no stratum for site(s) {missing[:5]}")
        # stable sort keeps the shuffled order within each stratum
        order.sort(key=lambda s: str(strata[s]))
    return FoldPlan(k, seed, {s: i % k for i, s in enumerate(order)})


def site_strata(records: pd.DataFrame) -> Dict[str, str]:
    """Site -> PFT mapping; each site must carry a single PFT."""
    pairs = records[["site_id", "pft"]].astype(str).drop_duplicates()
    dup = pairs["site_id"][pairs["site_id"].duplicated()]
    if len(dup):
        raise SchemaError(f"site(s) with more than one PFT: {sorted(set(dup))[:5]}")
    return dict(zip(pairs["site_id"], pairs["pft"]))


def process_gpp(records: pd.DataFrame, params: PModelParams = PModelParams()) -> np.ndarray:
    """Process-model GPP for every derived record."""
    return np.asarray(gpp(photo_env(records), params), dtype=float).reshape(len(records))


def with_process(records: pd.DataFrame, params: PModelParams = PModelParams()) -> pd.DataFrame:
    """Copy of ``records`` with a ``gpp_process`` column (computed if absent)."""
    if "gpp_process" in records.columns:
        return records
    out = records.copy()
    out["gpp_process"] = process_gpp(records, params)
    return out


def residual_target(records: pd.DataFrame, params: PModelParams = PModelParams()) -> np.ndarray:
    """Additive residuals ``gpp_obs - gpp_process``."""
    if "gpp_obs" not in records.columns:
        raise InvalidInputError("records have no gpp_obs column")
    obs = records["gpp_obs"].to_numpy(dtype=float)
    if np.isnan(obs).any():
        rows = np.flatnonzero(np.isnan(obs)) + 1
        raise InvalidInputError(f"gpp_obs missing in {rows.size} record(s), first at row {rows[0]}")
    proc = with_process(records, params)["gpp_process"].to_numpy(dtype=float)
    return obs - proc


def feature_names(exclude: Sequence[str] = ()) -> Tuple[str, ...]:
    unknown = set(exclude) - set(DEFAULT_FEATURES)
    if unknown:
        raise InvalidInputError(f"cannot exclude unknown features {sorted(unknown)}")
    return tuple(c for c in DEFAULT_FEATURES if c not in set(exclude))


def build_features(records: pd.DataFrame, names: Sequence[str]) -> FeatureMatrix:
    """Learner feature matrix: numeric drivers, derived drivers, PFT indicators, gpp_process."""
    cols = []
    pft = records["pft"].to_numpy() if "pft" in records.columns else None
    for name in names:
        if name.startswith("pft_"):
            if pft is None:
                raise SchemaError("records have no pft column")
            cols.append((pft == name[4:]).astype(float))
        elif name in records.columns:
            cols.append(records[name].to_numpy(dtype=float))
        else:
            raise SchemaError(f"records lack feature column {name!r}")
    if pft is not None and not np.isin(pft, PFT_CODES).all():
        bad = np.flatnonzero(~np.isin(pft, PFT_CODES)) + 1
        raise SchemaError("unknown PFT code", rows=bad)
    return learner.feature_matrix(cols, names)


@dataclass
class HybridModel:
    params: PModelParams
    ensembles: List[TreeEnsemble]
    feature_names: Tuple[str, ...]
    fold_plan: FoldPlan
    gbt_config: GBTConfig = field(default_factory=GBTConfig)
    fapar_scale: float = 1.0
    fapar_offset: float = 0.0
    residual: str = "additive"

    @property
    def k(self) -> int:
        return len(self.ensembles)


def train_cv(records: pd.DataFrame, config: GBTConfig = GBTConfig(), fold_plan: FoldPlan = None,
             params: PModelParams = PModelParams(), exclude: Sequence[str] = (),
             fapar_scale: float = 1.0, fapar_offset: float = 0.0) -> Tuple[HybridModel, pd.DataFrame]:
    """Train one residual learner per fold and predict each held-out fold.

    Returns the model and an out-of-sample table in record order with columns
    ``site_id, date, gpp_obs, gpp_process, gpp_hybrid, fold`` (plus ``pft``
    when the records carry one, so the table can be scored per PFT). Every record
    is predicted exactly once, by the model that did not see its site.
    """
    recs = with_process(records, params)
    if fold_plan is None:
        fold_plan = make_folds(recs["site_id"], 5, 42, strata=site_strata(recs))
    sites = recs["site_id"].astype(str).to_numpy()
    unknown = set(sites) - set(fold_plan.assignment)
    if unknown:
        raise InvalidPlanError(f"sites missing from fold plan: {sorted(unknown)[:5]}")
    fold_of = np.array([fold_plan.assignment[s] for s in sites], dtype=int)
    names = feature_names(exclude)
    X = build_features(recs, names)
    r = residual_target(recs, params)
    proc = recs["gpp_process"].to_numpy(dtype=float)

    present = set(sites)
    corrected = np.full(len(recs), np.nan)
    ensembles = []
    for f in range(fold_plan.k):
        train_sites = [s for s in fold_plan.train_sites(f) if s in present]
        test = fold_of == f
        if len(train_sites) < 2:
            raise InvalidPlanError(f"fold {f}: training split has {len(train_sites)} site(s), need >= 2")
        if not test.any():
            raise InvalidPlanError(f"fold {f}: no test records")
        train = ~test
        Xtr = FeatureMatrix(X.values[train], names)
        model = learner.fit(Xtr, r[train], config)
        ensembles.append(model)
        r_hat = learner.predict(model, FeatureMatrix(X.values[test], names))
        corrected[test] = np.maximum(0.0, proc[test] + r_hat)
        log.info("fold %d: %d train / %d test records", f, int(train.sum()), int(test.sum()))

    hm = HybridModel(params, ensembles, names, fold_plan, config, fapar_scale, fapar_offset)
    oos = pd.DataFrame({
        "site_id": recs["site_id"].to_numpy(),
        "date": recs["date"].to_numpy() if "date" in recs.columns else np.arange(len(recs)),
        "gpp_obs": recs["gpp_obs"].to_numpy(dtype=float),
        "gpp_process": proc,
        "gpp_hybrid": corrected,
        "fold": fold_of,
    })
    if "pft" in recs.columns:
        oos["pft"] = recs["pft"].to_numpy()
    return hm, oos


def predict_hybrid(model: HybridModel, records: pd.DataFrame) -> np.ndarray:
    """Fold-averaged corrected GPP: mean over folds of ``max(0, process + residual_f)``."""
    recs = with_process(records, model.params)
    X = build_features(recs, model.feature_names)
    proc = recs["gpp_process"].to_numpy(dtype=float)
    total = np.zeros(len(recs))
    for ens in model.ensembles:
        total += np.maximum(0.0, proc + learner.predict(ens, X))
    return total / len(model.ensembles)


def save_model(model: HybridModel, directory) -> None:
    """Write ``manifest.json`` plus one ``fold_<i>.json`` learner file per fold."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "k": model.k,
        "seed": model.fold_plan.seed,
        "residual": model.residual,
        "feature_names": list(model.feature_names),
        "pmodel_params": model.params.to_dict(),
        "fapar_scale": model.fapar_scale,
        "fapar_offset": model.fapar_offset,
        "folds": {s: model.fold_plan.assignment[s] for s in sorted(model.fold_plan.assignment)},
        "fold_files": [f"fold_{i}.json" for i in range(model.k)],
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for i, ens in enumerate(model.ensembles):
        learner.save(ens, d / f"fold_{i}.json")


def load_model(directory) -> HybridModel:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelFormatError(f"cannot read manifest: {exc}", str(d / "manifest.json")) from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc.msg}", f"manifest.json line {exc.lineno}") from exc
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise ModelFormatError(f"unsupported manifest version {manifest.get('format_version')!r}",
                               "manifest.json:format_version")
    if manifest.get("residual") != "additive":
        raise ModelFormatError("only additive residual models are supported", "manifest.json:residual")
    try:
        params = PModelParams.from_dict(manifest["pmodel_params"])
        names = tuple(manifest["feature_names"])
        k = int(manifest["k"])
        plan = FoldPlan(k, int(manifest["seed"]), {str(s): int(f) for s, f in manifest["folds"].items()})
        files = manifest["fold_files"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad manifest: {exc}", "manifest.json") from exc
    if len(files) != k:
        raise ModelFormatError(f"manifest lists {len(files)} fold files for k={k}", "manifest.json:fold_files")
    ensembles = [learner.load(d / name) for name in files]
    for name, ens in zip(files, ensembles):
        if tuple(ens.feature_names) != names:
            raise ModelFormatError("fold feature schema differs from manifest", name)
    return HybridModel(params, ensembles, names, plan, ensembles[0].config,
                       float(manifest.get("fapar_scale", 1.0)), float(manifest.get("fapar_offset", 0.0)))
