"""Command line front end.

Four subcommands cover the workflow: ``describe`` summarizes loaded life
tables, ``forecast`` writes density forecasts with interval bounds plus a
run manifest, ``evaluate`` runs the expanding-window comparison, and
``annuity`` prices temporary annuities on forecast tables.  All options
live in a flat key=value config file; a few common ones have flag
overrides.  Every subcommand is a pure function of (files, config, seed):
reruns produce byte-identical outputs.

Exit codes: 0 on success, 2 on data errors (missing or malformed inputs,
bad configuration), 3 on numerical failures.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .annuity import grid_to_csv, grid_to_text, price_grid
from .errors import DataError, MortcastError, NumericalError
from .evaluation import (
    WindowPlan,
    comparison_table,
    report_to_csv,
    run_expanding_window,
)
from .fpca import EVR, Fixed
from .lifetable import (
    DensityPanel,
    LifeTableSeries,
    gini_equality_index,
    life_expectancy,
    modal_age,
    normalize_to_density,
    read_hmd_lifetable,
    write_long_csv,
)
from .pipeline import METHODS, forecast_method

__all__ = ["RunConfig", "load_config", "main"]

_DEFAULT_AGES = tuple(range(60, 110, 5))
_DEFAULT_MATURITIES = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, resolved from file plus flags."""

    female_data: str | None = None
    male_data: str | None = None
    methods: tuple[str, ...] = METHODS
    k: int = 6
    use_evr: bool = False
    evr_kmax: int = 10
    horizon: int = 16
    alpha: float = 0.2
    seed: int = 0
    bootstrap: int = 5000
    etas: tuple[float, ...] = (0.0025,)
    out_dir: str = "."
    first_year: int | None = None
    last_year: int | None = None
    test_start: int | None = None
    annuity_method: str = "cdf-mlfts"
    annuity_horizon: int = 50
    annuity_ages: tuple[int, ...] = _DEFAULT_AGES
    annuity_maturities: tuple[int, ...] = _DEFAULT_MATURITIES
    clip_eps: float = 1e-10

    @property
    def selector(self):
        return EVR(kmax=self.evr_kmax) if self.use_evr else Fixed(self.k)


def _parse_bool(value: str, key: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise DataError(f"config key {key}: expected a boolean, got {value!r}")


def load_config(path: str) -> RunConfig:
    """Parse a flat key=value config file (# starts a comment line).

    Recognized keys: female_data, male_data, methods, k, evr, evr_kmax,
    horizon, alpha, seed, bootstrap, eta, out_dir, first_year, last_year,
    test_start, annuity_method, annuity_horizon, annuity_ages,
    annuity_maturities, clip_eps.  Unknown keys are rejected.
    """
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc

    cfg = RunConfig()
    updates: dict[str, object] = {}
    try:
        for key, value in values.items():
            if key in ("female_data", "male_data", "out_dir", "annuity_method"):
                updates[key] = value
            elif key == "methods":
                updates[key] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key in ("k", "evr_kmax", "horizon", "seed", "bootstrap",
                         "first_year", "last_year", "test_start", "annuity_horizon"):
                updates[key] = int(value)
            elif key in ("alpha", "clip_eps"):
                updates[key] = float(value)
            elif key == "evr":
                updates["use_evr"] = _parse_bool(value, key)
            elif key == "eta":
                updates["etas"] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key in ("annuity_ages", "annuity_maturities"):
                updates[key] = tuple(int(v) for v in value.split(",") if v.strip())
            else:
                raise DataError(f"{path}: unknown config key {key!r}")
    except ValueError as exc:
        raise DataError(f"{path}: bad value for key: {exc}") from exc

    cfg = replace(cfg, **updates)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if not 0.0 < cfg.alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    if cfg.horizon < 1 or cfg.annuity_horizon < 1:
        raise DataError("horizons must be at least 1")
    for m in cfg.methods:
        if m not in METHODS:
            raise DataError(f"unknown method {m!r} (choose from {', '.join(METHODS)})")
    if cfg.annuity_method not in METHODS:
        raise DataError(f"unknown annuity method {cfg.annuity_method!r}")
    for path in (cfg.female_data, cfg.male_data):
        if path is not None and not os.path.exists(path):
            raise DataError(f"data file not found: {path}")


def _load_series(cfg: RunConfig) -> tuple[LifeTableSeries | None, LifeTableSeries | None]:
    if cfg.female_data is None and cfg.male_data is None:
        raise DataError("config must name female_data and/or male_data")
    lt_f = lt_m = None
    if cfg.female_data is not None:
        lt_f = read_hmd_lifetable(cfg.female_data, "Female", cfg.first_year, cfg.last_year)
    if cfg.male_data is not None:
        lt_m = read_hmd_lifetable(cfg.male_data, "Male", cfg.first_year, cfg.last_year)
    return lt_f, lt_m


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def cmd_describe(cfg: RunConfig) -> int:
    """Per-year summary statistics and the plotting matrix for each sex."""
    lt_f, lt_m = _load_series(cfg)
    for lt in (lt_f, lt_m):
        if lt is None:
            continue
        dens = normalize_to_density(lt)
        tag = lt.sex.lower()
        summary_path = _out_path(cfg, f"describe_{tag}.csv")
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write("year,e0,gini_equality,modal_age\n")
            for i, year in enumerate(lt.years):
                row = dens.d[i]
                fh.write(
                    f"{int(year)},{float(life_expectancy(row))!r},"
                    f"{float(gini_equality_index(row))!r},{modal_age(row)}\n"
                )
        write_long_csv(_out_path(cfg, f"density_{tag}.csv"), lt.years, lt.ages, dens.d)
        first, last = dens.d[0], dens.d[-1]
        print(
            f"{lt.sex}: {int(lt.years[0])}-{int(lt.years[-1])}, "
            f"e0 {life_expectancy(first):.2f} -> {life_expectancy(last):.2f}, "
            f"modal age {modal_age(first)} -> {modal_age(last)}"
        )
        print(f"wrote {summary_path}")
    return 0


def cmd_forecast(cfg: RunConfig) -> int:
    """Density forecasts with interval bounds, plus a JSON run manifest."""
    lt_f, lt_m = _load_series(cfg)
    csv_lines = ["method,sex,horizon,age,point,lower,upper"]
    manifest: dict = {
        "config": {
            "methods": list(cfg.methods),
            "selector": "evr" if cfg.use_evr else "fixed",
            "k": cfg.k,
            "evr_kmax": cfg.evr_kmax,
            "horizon": cfg.horizon,
            "alpha": cfg.alpha,
            "seed": cfg.seed,
            "bootstrap": cfg.bootstrap,
            "clip_eps": cfg.clip_eps,
        },
        "results": {},
    }
    for method in cfg.methods:
        results = forecast_method(
            method,
            lt_f,
            lt_m,
            selector=cfg.selector,
            horizon=cfg.horizon,
            alpha=cfg.alpha,
            n_paths=cfg.bootstrap,
            seed=_method_seed(cfg.seed, method),
            clip_eps=cfg.clip_eps,
        )
        manifest["results"][method] = {}
        for sex, res in results.items():
            manifest["results"][method][sex] = {
                "selector": res.selector,
                "components": list(res.components),
                "eigenvalues": [s.tolist() for s in res.spectra],
                "years": res.years.tolist(),
            }
            for i, h in enumerate(res.horizons):
                for j, age in enumerate(res.ages):
                    csv_lines.append(
                        f"{method},{sex},{int(h)},{int(age)},"
                        f"{float(res.point[i, j])!r},"
                        f"{float(res.lower[i, j])!r},{float(res.upper[i, j])!r}"
                    )
    csv_path = _out_path(cfg, "forecast.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(csv_lines) + "\n")
    manifest_path = _out_path(cfg, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    """Expanding-window accuracy comparison across the configured methods."""
    lt_f, lt_m = _load_series(cfg)
    some = lt_f if lt_f is not None else lt_m
    data_start = int(some.years[0])
    data_last = int(some.years[-1])
    test_start = cfg.test_start if cfg.test_start is not None else data_last - 15
    if test_start - data_start < 16:
        raise DataError(
            f"first test year {test_start} leaves fewer than 16 training years"
        )
    plan = WindowPlan(
        train_start=data_start,
        first_test_year=test_start,
        last_year=data_last,
        max_horizon=cfg.horizon,
    )
    report = run_expanding_window(
        lt_f,
        lt_m,
        plan,
        methods=cfg.methods,
        selector=cfg.selector,
        alpha=cfg.alpha,
        seed=cfg.seed,
        n_paths=cfg.bootstrap,
        clip_eps=cfg.clip_eps,
    )
    csv_path = _out_path(cfg, "metrics.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report_to_csv(report))
    table = comparison_table(report)
    table_path = _out_path(cfg, "comparison.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    print(f"wrote {csv_path} and {table_path}")
    return 0


def cmd_annuity(cfg: RunConfig) -> int:
    """Annuity price grids on forecast life tables."""
    lt_f, lt_m = _load_series(cfg)
    results = forecast_method(
        cfg.annuity_method,
        lt_f,
        lt_m,
        selector=cfg.selector,
        horizon=cfg.annuity_horizon,
        alpha=cfg.alpha,
        n_paths=1000,
        seed=_method_seed(cfg.seed, cfg.annuity_method),
        clip_eps=cfg.clip_eps,
    )
    grids: dict[tuple[str, float], dict[tuple[int, int], float]] = {}
    texts: list[str] = []
    for sex in sorted(results):
        res = results[sex]
        panel = DensityPanel(sex=sex, years=res.years, ages=res.ages, d=res.point)
        for eta in cfg.etas:
            grid = price_grid(
                panel, cfg.annuity_ages, cfg.annuity_maturities, eta
            )
            grids[(sex, eta)] = grid
            texts.append(grid_to_text(sex, eta, grid, cfg.annuity_maturities))
    csv_path = _out_path(cfg, "annuity.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(grid_to_csv(grids))
    text = "\n".join(texts)
    text_path = _out_path(cfg, "annuity.txt")
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {csv_path} and {text_path}")
    return 0


def _method_seed(seed: int, method: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), METHODS.index(method)])


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates: dict[str, object] = {}
    if args.method is not None:
        updates["methods"] = (args.method,)
        updates["annuity_method"] = args.method
    if args.k is not None:
        updates["k"] = args.k
        updates["use_evr"] = False
    if args.evr:
        updates["use_evr"] = True
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.eta is not None:
        updates["etas"] = (args.eta,)
    cfg = replace(cfg, **updates)
    _validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mortcast",
        description="Forecast the age distribution of deaths, evaluate accuracy, price annuities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("describe", "per-year summary statistics and density matrices"),
        ("forecast", "density forecasts with interval bounds"),
        ("evaluate", "expanding-window accuracy comparison"),
        ("annuity", "temporary annuity price grids"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--method", choices=METHODS, default=None)
        p.add_argument("--k", type=int, default=None, help="fixed component count")
        p.add_argument("--evr", action="store_true", help="eigenvalue-ratio selection")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--eta", type=float, default=None, help="interest rate")

    args = parser.parse_args(argv)
    handlers = {
        "describe": cmd_describe,
        "forecast": cmd_forecast,
        "evaluate": cmd_evaluate,
        "annuity": cmd_annuity,
    }
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return handlers[args.command](cfg)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (MortcastError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
