"""Batch command-line interface.

    gpphybrid derive    --in sites.csv --out derived.csv [--impute site-median]
    gpphybrid pmodel    --in derived.csv --out proc.csv
    gpphybrid train     --in proc.csv --model-dir M [--k 5] [--seed 42]
    gpphybrid evaluate  --pred M/oos_predictions.csv --out report.csv
    gpphybrid map       --drivers-dir G --model-dir M --out-dir O
    gpphybrid aggregate --grid-a a.fluxgrid --grid-b b.fluxgrid [--days 365] --out-dir O
    gpphybrid synth     [--sites 20] [--days 200] [--bias-spec spec.json] [--seed 7] --out sites.csv

Every subcommand also takes ``--config run.json``; flags win over the file.
Exit codes: 0 success, 2 bad input, 3 internal invariant violation.
"""

import argparse
import logging
import math
import sys
from pathlib import Path

import pandas as pd

from gpphybrid import hybrid, spatial
from gpphybrid.config import RunConfig, build_config, load_config_file
from gpphybrid.drivers import DERIVED_COLUMNS, check_schema, derive, impute_missing, read_sites_csv, write_csv
from gpphybrid.errors import GPPError, InvalidInputError, InvariantViolation, ModelFormatError
from gpphybrid.metrics import evaluate_by_pft
from gpphybrid.synth import load_bias_spec, synth_corpus

log = logging.getLogger("gpphybrid")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


def _out_path(cfg: RunConfig, key: str) -> Path:
    p = cfg.path(key)
    if p is None:
        raise InvalidInputError(f"--{key.replace('_', '-')} is required")
    return p


def _out_dir(cfg: RunConfig, key: str) -> Path:
    d = _out_path(cfg, key)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_derive(cfg: RunConfig) -> None:
    cfg.require_inputs("in")
    df = read_sites_csv(cfg.path("in"))
    check_schema(df)
    df = impute_missing(df, cfg.impute)
    out = derive(df, cfg.fapar_scale, cfg.fapar_offset)
    write_csv(out, _out_path(cfg, "out"))


def cmd_pmodel(cfg: RunConfig) -> None:
    cfg.require_inputs("in")
    df = read_sites_csv(cfg.path("in"), extra_numeric=DERIVED_COLUMNS)
    check_schema(df, extra=[c for c in DERIVED_COLUMNS if c in df.columns])
    out = df.copy()
    out["gpp_process"] = hybrid.process_gpp(df, cfg.pmodel)
    write_csv(out, _out_path(cfg, "out"))


def cmd_train(cfg: RunConfig) -> None:
    cfg.require_inputs("in")
    df = read_sites_csv(cfg.path("in"), extra_numeric=(*DERIVED_COLUMNS, "gpp_process"))
    check_schema(df, extra=DERIVED_COLUMNS)
    plan = hybrid.make_folds(df["site_id"], cfg.k, cfg.seed, strata=hybrid.site_strata(df))
    model, oos = hybrid.train_cv(df, cfg.gbt, plan, cfg.pmodel,
                                 fapar_scale=cfg.fapar_scale, fapar_offset=cfg.fapar_offset)
    if len(oos) != len(df) or oos["gpp_hybrid"].isna().any() or (oos["gpp_hybrid"] < 0).any():
        raise InvariantViolation("out-of-sample predictions do not cover every record exactly once")
    d = _out_dir(cfg, "model_dir")
    hybrid.save_model(model, d)
    write_csv(oos, d / "oos_predictions.csv")
    log.info("trained %d fold models on %d records from %d sites", model.k, len(df), len(plan.assignment))


def cmd_evaluate(cfg: RunConfig) -> None:
    cfg.require_inputs("pred")
    df = pd.read_csv(cfg.path("pred"), dtype={"site_id": str, "date": str, "pft": str},
                     float_precision="round_trip")
    need = [c for c in ("pft", "gpp_obs", "gpp_process", "gpp_hybrid") if c not in df.columns]
    if need:
        raise InvalidInputError(f"{cfg.path('pred')}: missing columns {need}")
    parts = [evaluate_by_pft(df, df[col].to_numpy(dtype=float)).to_frame().assign(model=col)
             for col in ("gpp_process", "gpp_hybrid")]
    report = pd.concat(parts, ignore_index=True)[["model", "group", "n", "r2", "rmse"]]
    report.to_csv(_out_path(cfg, "out"), index=False, lineterminator="\n", na_rep="NA")


def cmd_map(cfg: RunConfig) -> None:
    cfg.require_inputs("drivers_dir", "model_dir")
    grids = spatial.read_driver_dir(cfg.path("drivers_dir"))
    model = hybrid.load_model(cfg.path("model_dir"))
    out = _out_dir(cfg, "out_dir")
    for name, target in (("gpp_process", model.params), ("gpp_hybrid", model)):
        grid, errors = spatial.map_model(grids, target, model.fapar_scale, model.fapar_offset)
        for e in errors[:10]:
            log.warning("%s: cell (%d, %d) skipped: %s", name, e.row, e.col, e.reason)
        if len(errors) > 10:
            log.warning("%s: %d more invalid cells", name, len(errors) - 10)
        spatial.write_fluxgrid(grid, out / f"{name}.fluxgrid")


def cmd_aggregate(cfg: RunConfig) -> None:
    cfg.require_inputs("grid_a", "grid_b")
    a = spatial.read_fluxgrid(cfg.path("grid_a"))
    b = spatial.read_fluxgrid(cfg.path("grid_b"))
    diff = spatial.percent_diff(a, b)
    out = _out_dir(cfg, "out_dir")
    names = (cfg.path("grid_a").stem, cfg.path("grid_b").stem)
    if names[0] == names[1]:
        names = ("a", "b")
    totals, lat, lon = [], {}, {}
    for name, g in zip(names, (a, b)):
        total = spatial.global_total(g, cfg.days)
        lat[name] = spatial.lat_profile(g, cfg.days)
        lon[name] = spatial.lon_profile(g, cfg.days)
        for prof in (lat[name], lon[name]):
            if total and abs(math.fsum(prof) - total) > 1e-9 * abs(total):
                raise InvariantViolation(f"{name}: profile does not sum to the global total")
        totals.append({"grid": name, "n_days": cfg.days, "total_pg_c": total})
    write_csv(pd.DataFrame(totals), out / "totals.csv")
    write_csv(pd.DataFrame({"lat": a.lat_centers(), **lat}), out / "lat_profile.csv")
    write_csv(pd.DataFrame({"lon": a.lon_centers(), **lon}), out / "lon_profile.csv")
    spatial.write_fluxgrid(diff, out / "percent_diff.fluxgrid")


def cmd_synth(cfg: RunConfig) -> None:
    spec = {}
    if cfg.path("bias_spec") is not None:
        cfg.require_inputs("bias_spec")
        spec = load_bias_spec(cfg.path("bias_spec"))
    days = int(cfg.days)
    if days != cfg.days:
        raise InvalidInputError("--days must be a whole number for synth")
    df = synth_corpus(cfg.sites, days, spec, cfg.seed, cfg.pmodel)
    write_csv(df, _out_path(cfg, "out"))


COMMANDS = {
    "derive": (cmd_derive, "derive VPD, NDVI, NIRv, fAPAR and PAR from raw drivers"),
    "pmodel": (cmd_pmodel, "append process-model GPP"),
    "train": (cmd_train, "train the residual learner with site-grouped k-fold CV"),
    "evaluate": (cmd_evaluate, "per-PFT R2/RMSE of process and hybrid GPP"),
    "map": (cmd_map, "apply process and hybrid models to driver grids"),
    "aggregate": (cmd_aggregate, "global totals, zonal/meridional profiles, percent difference"),
    "synth": (cmd_synth, "generate a seeded synthetic site corpus with injected bias"),
}

# flag -> config key, per command
_FLAGS = {
    "derive": [("--in", "in"), ("--out", "out"), ("--impute", "impute")],
    "pmodel": [("--in", "in"), ("--out", "out")],
    "train": [("--in", "in"), ("--model-dir", "model_dir"), ("--k", "k"), ("--seed", "seed")],
    "evaluate": [("--pred", "pred"), ("--out", "out")],
    "map": [("--drivers-dir", "drivers_dir"), ("--model-dir", "model_dir"), ("--out-dir", "out_dir")],
    "aggregate": [("--grid-a", "grid_a"), ("--grid-b", "grid_b"), ("--days", "days"), ("--out-dir", "out_dir")],
    "synth": [("--sites", "sites"), ("--days", "days"), ("--bias-spec", "bias_spec"), ("--seed", "seed"),
              ("--out", "out")],
}
_TYPES = {"k": int, "seed": int, "sites": int, "days": float}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpphybrid", description="Hybrid process/ML GPP estimation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON run configuration; flags override it")
        for flag, key in _FLAGS[name]:
            kw = {"dest": key, "default": None, "type": _TYPES.get(key, str)}
            if key == "impute":
                kw["choices"] = ("reject", "site-median")
            p.add_argument(flag, **kw)
    return parser


def _config_from_args(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {key: getattr(args, key) for _, key in _FLAGS[args.command]}
    if args.command == "synth":
        # synth defaults differ from the aggregation defaults
        file_values = {"days": 200, "seed": 7, **file_values}
    return build_config(file_values, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        COMMANDS[args.command][0](cfg)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InvalidInputError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GPPError, ArithmeticError, AssertionError) as exc:
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
