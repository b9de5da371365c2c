"""Command-line entry point.

Commands::

    catlin-gh list-domains
    catlin-gh sample-metric --domain egg2 --count 100 --out samples.csv
    catlin-gh geodesic --domain ball --from 0,0,0.5,0 --to 0,0,0.9,0 --h 0.1 --out geo
    catlin-gh verify --check gh,height --domain egg2 --config campaign.yaml

Settings are resolved as: built-in defaults, then the YAML config file, then
command-line flags. Exit codes: 0 success, 1 failed acceptance assertion,
2 configuration error, 3 numeric or resource error. Every failure also
writes ``error.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import experiments as ex
from .errors import CatlinError, ConfigError, NumericError
from .fixtures import list_domains, load_domain
from .geodesics import FULL_FRAME, REAL_SLICE, GeodesicBudget, geodesic_between
from .geometry import sample_interior, to_complex
from .metrics import Kind, MetricField, write_metric_samples

CHECKS = ("gh", "height", "dg", "fin", "proposition", "localization", "up", "exponent", "hyperbolicity")
COMMANDS = ("list-domains", "sample-metric", "geodesic", "verify")
STAGES = ("pairs", "pool", "pool_pairs", "hyperbolicity", "localization", "hypothesis", "metric_samples")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str = "verify"
    domain: str = "egg2"
    check: tuple = ("gh",)
    metric: str = "catlin_patched"
    h: float = 0.2  # coarse resolution; checks also run at h/2
    delta_min: float = 1e-3
    seed: int = 0
    pairs: int = 200
    out_dir: str = "out"
    frame: str = "real-slice"
    levels: int = 2  # number of resolutions h, h/2, ...
    delta_min_rerun: bool = True
    bands: int = 8
    straddle_fraction: float = 0.25
    dg_pairs: int = 500
    pool_size: int = 60
    quadruples: int = 10000
    hyper_points: int = 80
    window_radius: float = 0.5
    localization_pairs: int = 200
    hypothesis_samples: int = 1000
    beta: float | None = None
    exponent_family: str = "tangential"
    exponent_j_max: int = 6
    count: int = 100
    source: tuple | None = None
    target: tuple | None = None
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    @property
    def resolutions(self) -> tuple:
        return tuple(self.h / 2**i for i in range(self.levels))

    @property
    def slice_frame(self):
        return REAL_SLICE if self.frame == "real-slice" else FULL_FRAME

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.domain not in list_domains():
            raise ConfigError(f"unknown domain {self.domain!r}; available: {', '.join(list_domains())}")
        if self.metric not in Kind.__args__ or self.metric == "catlin_local":
            raise ConfigError(f"metric must be a global kind, got {self.metric!r}")
        bad = [c for c in self.check if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown check(s) {bad}; choose from {', '.join(CHECKS)}")
        if not (self.h > 0 and self.delta_min > 0):
            raise ConfigError("h and delta_min must be positive")
        if self.pairs < 1 or self.count < 1 or self.levels < 1:
            raise ConfigError("pairs, count and levels must be >= 1")
        if self.frame not in ("real-slice", "full"):
            raise ConfigError("frame must be 'real-slice' or 'full'")
        return self


def _coerce(name: str, value):
    f = {f.name: f for f in fields(RunConfig)}.get(name)
    if f is None:
        raise ConfigError(f"unknown config field {name!r}")
    if value is None:
        return None
    if name == "check":
        return tuple(value.split(",")) if isinstance(value, str) else tuple(value)
    if name in ("source", "target"):
        return parse_point(value) if isinstance(value, str) else tuple(float(v) for v in value)
    default = getattr(RunConfig(), name)
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float) or name == "beta":
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc
    return value


def parse_point(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"a point needs 4 comma-separated decimals, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}") from exc


def load_config(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def resolve_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Defaults < config file < flags."""
    values = {"command": command}
    for src in (file_values, flag_values):
        for k, v in src.items():
            if v is not None:
                values[k] = _coerce(k, v)
    return RunConfig(**values).validate()


def stage_seeds(master: int) -> dict:
    """Per-stage seeds spawned from the master seed in a fixed order."""
    children = np.random.SeedSequence(int(master)).spawn(len(STAGES))
    return {name: int(c.generate_state(1)[0]) for name, c in zip(STAGES, children)}


# ---------------------------------------------------------------------------
# verify pipeline


class Campaign:
    """Shared state for the checks of one run: pairs, geodesic cache, graphs."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.domain = load_domain(cfg.domain)
        self.metric = MetricField(cfg.metric, self.domain)
        self.seeds = stage_seeds(cfg.seed)
        self.cache = ex.GeodesicCache()
        self.store = ex.GraphStore(self.domain, self.metric, cfg.slice_frame)
        self._pairs = None
        self._tables = None
        self._pool_idx = None
        self.c_lb = None

    @property
    def budget(self) -> GeodesicBudget:
        return GeodesicBudget(h=self.cfg.h, delta_min=self.cfg.delta_min, frame=self.cfg.slice_frame, c_lb=self.c_lb)

    @property
    def delta_mins(self):
        d = self.cfg.delta_min
        return (d, d / 2) if self.cfg.delta_min_rerun else (d,)

    @property
    def pairs(self):
        if self._pairs is None:
            c = self.cfg
            self._pairs = ex.sample_pairs(self.domain, c.pairs, self.seeds["pairs"], c.bands, c.straddle_fraction)
        return self._pairs

    def tables(self):
        if self._tables is None:
            c = self.cfg
            pool = ex.point_pool(self.domain, c.pool_size, self.seeds["pool"], bands=min(c.bands, 7), frame=c.slice_frame)
            self._tables = {h: ex.distance_table(self.store, pool, h, c.delta_min) for h in c.resolutions}
            n_pairs = min(c.dg_pairs, (len(pool) - 1) * (len(pool) - 2) // 2)
            self._pool_idx = ex.pool_pairs(len(pool), n_pairs, self.seeds["pool_pairs"])
        return self._tables, self._pool_idx

    def fit_dg(self):
        tables, idx = self.tables()
        rep = ex.verify_dg_sandwich(tables, idx)
        # certificates use the fitted constant, inflated twice
        self.c_lb = 2.0 * rep.fitted_value
        return rep


def _finite(v) -> bool:
    return v is not None and isinstance(v, (int, float)) and math.isfinite(v)


def _verdict(check: str, rep) -> tuple:
    """(passed, reasons) for the acceptance assertion of one check."""
    reasons = []
    if check == "exponent":
        ok = abs(rep.slope - rep.expected) <= 0.1
        if not ok:
            reasons.append(f"slope {rep.slope:.3f} not within 0.1 of {rep.expected:.3f}")
        return ok, reasons
    if not _finite(rep.fitted_value):
        reasons.append("fitted value not finite")
    if not rep.stable:
        reasons.append(f"drift {rep.drift:.3f} >= 0.2")
    dm = rep.delta_min_drift
    if _finite(dm) and dm >= ex.STABLE_DRIFT:
        reasons.append(f"delta_min drift {dm:.3f} >= 0.2")
    if check in ("height", "proposition") and not (rep.fitted_value > 0):
        reasons.append("ratio not bounded away from 0")
    if check == "fin" and not rep.extra.get("hypothesis_holds", False):
        reasons.append("pointwise hypothesis fails")
    if check == "hyperbolicity" and rep.extra.get("min_gromov_product", 0.0) < -1e-9:
        reasons.append("negative Gromov product")
    if check == "localization":
        if rep.extra["pointwise"]["violations"]:
            reasons.append("pointwise metric monotonicity violated")
        if not rep.extra["monotone_bins"]:
            reasons.append("gap not monotone over scale bins")
    return not reasons, reasons


def _pair_csv(path, camp: Campaign, check: str, h: float, dmin: float):
    """Per-pair ratios (histogram input) for the geodesic checks."""
    import csv

    m = camp.domain.type_m
    beta = camp.cfg.beta or 1.0 / m
    rows = []
    for p in camp.pairs:
        r = camp.cache.results.get((p.pid, float(h), float(dmin)))
        if r is None:
            continue
        dx, dy = camp.metric.delta(np.stack([p.x, p.y]))
        if check == "gh":
            v = r.euclid_len / p.separation ** (1.0 / m)
        elif check == "height":
            v = r.h_gamma ** (1.0 / m) / r.euclid_len
        else:
            v = ex.theorem_fin_residual(r.finsler_len, r.euclid_len, dx, dy, beta)
        rows.append([p.pid, p.tag, p.separation, r.euclid_len, r.finsler_len, r.h_gamma, r.lambda_cert, v])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "tag", "separation", "euclid_len", "finsler_len", "h_gamma", "lambda_cert", "value"])
        for row in rows:
            w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])


def run_check(camp: Campaign, check: str):
    cfg = camp.cfg
    dom, metric = camp.domain, camp.metric
    res, dms = cfg.resolutions, camp.delta_mins
    if check in ("gh", "height", "fin", "proposition") and camp.c_lb is None:
        camp.fit_dg()
    if check == "gh":
        return ex.verify_gh(dom, metric, camp.pairs, camp.budget, res, dms, camp.cache)
    if check == "height":
        return ex.verify_height(dom, metric, camp.pairs, camp.budget, res, dms, camp.cache)
    if check == "fin":
        beta = cfg.beta or 1.0 / dom.type_m
        return ex.verify_theorem_fin(dom, metric, camp.pairs, beta, camp.budget, res, dms, camp.cache,
                                     cfg.hypothesis_samples, camp.seeds["hypothesis"])
    if check == "proposition":
        tables, _ = camp.tables()
        return ex.verify_proposition(dom, metric, camp.pairs, camp.budget, cfg.beta, res, dms, camp.cache, tables)
    if check == "dg":
        return camp.fit_dg()
    if check == "up":
        tables, idx = camp.tables()
        return ex.verify_up_bound(tables, idx)
    if check == "hyperbolicity":
        rep, _ = ex.verify_hyperbolicity(camp.store, res, cfg.delta_min, cfg.hyper_points, cfg.quadruples,
                                         camp.seeds["hyperbolicity"])
        return rep
    if check == "localization":
        win = ex.cap_window(dom, cfg.window_radius)
        return ex.verify_localization(camp.store, win, res, cfg.delta_min, cfg.localization_pairs,
                                      camp.seeds["localization"], pointwise_samples=cfg.hypothesis_samples)
    if check == "exponent":
        normal = cfg.exponent_family == "normal"
        fam = ex.ScaleFamily(ex.degenerate_point(dom), j_max=cfg.exponent_j_max, normal=normal)
        expected = 1.0 if normal else 1.0 / dom.type_m
        b = replace(camp.budget, h=res[-1])
        return ex.exponent_regression(dom, metric, fam, b, camp.cache, expected)
    raise ConfigError(f"unknown check {check!r}")


def run_verify(cfg: RunConfig, out: Path) -> tuple:
    camp = Campaign(cfg)
    artifacts, verdicts = [], {}
    for check in cfg.check:
        rep = run_check(camp, check)
        path = rep.write(out / f"{check}_report.json")
        artifacts.append(path.name)
        if check in ("gh", "height", "fin"):
            csv_path = out / f"{check}_pairs.csv"
            _pair_csv(csv_path, camp, check, cfg.resolutions[-1], cfg.delta_min)
            artifacts.append(csv_path.name)
        if check == "exponent":
            csv_path = rep.write_csv(out / "exponent_scales.csv")
            artifacts.append(csv_path.name)
        ok, reasons = _verdict(check, rep)
        verdicts[check] = {"passed": ok, "reasons": reasons}
    if camp._pairs is not None:
        path = ex.write_json({"pairs": [p.to_dict() for p in camp.pairs]}, out / "pairs.json")
        artifacts.append(path.name)
    return artifacts, verdicts, camp.seeds


# ---------------------------------------------------------------------------
# other commands


def run_sample_metric(cfg: RunConfig, out: Path) -> list:
    dom = load_domain(cfg.domain)
    metric = MetricField(cfg.metric, dom)
    seed = stage_seeds(cfg.seed)["metric_samples"]
    rng = np.random.default_rng(seed)
    z = sample_interior(dom, cfg.count, "dyadic-collar", seed=int(rng.integers(2**31)))
    X = rng.standard_normal((cfg.count, 2)) + 1j * rng.standard_normal((cfg.count, 2))
    path = out / "metric_samples.csv"
    write_metric_samples(path, metric, z, X)
    return [path.name]


def run_geodesic(cfg: RunConfig, out: Path) -> list:
    if cfg.source is None or cfg.target is None:
        raise ConfigError("geodesic needs --from and --to")
    dom = load_domain(cfg.domain)
    metric = MetricField(cfg.metric, dom)
    x = to_complex(np.array(cfg.source))
    y = to_complex(np.array(cfg.target))
    frame = cfg.slice_frame
    if frame is REAL_SLICE and (np.any(x.imag) or np.any(y.imag)):
        frame = FULL_FRAME
    budget = GeodesicBudget(h=cfg.h, delta_min=cfg.delta_min, frame=frame)
    res = geodesic_between(dom, metric, x, y, budget)
    res.write(out / "geodesic.json", out / "geodesic_curve.csv" if res.curve is not None else None)
    names = ["geodesic.json"]
    if res.curve is not None:
        names.append("geodesic_curve.csv")
    return names


def write_manifest(out: Path, cfg: RunConfig, artifacts: list, extra: dict) -> Path:
    record = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items() if k != "workers"},
        "artifacts": sorted(artifacts),
        **extra,
    }
    return ex.write_json(record, out / "manifest.json")


def write_error(out: Path, exc: BaseException, code: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, NumericError) and getattr(exc, "residual", None) is not None:
        record["residual"] = exc.residual
    ex.write_json(record, out / "error.json")


def run(cfg: RunConfig) -> int:
    """Execute one validated config; returns the exit status."""
    out = Path(cfg.out_dir)
    if cfg.command == "list-domains":
        for name in list_domains():
            print(name)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    if cfg.command == "sample-metric":
        arts = run_sample_metric(cfg, out)
        write_manifest(out, cfg, arts, {})
        return EXIT_OK
    if cfg.command == "geodesic":
        arts = run_geodesic(cfg, out)
        write_manifest(out, cfg, arts, {})
        return EXIT_OK
    arts, verdicts, seeds = run_verify(cfg, out)
    write_manifest(out, cfg, arts, {"verdicts": verdicts, "stage_seeds": seeds})
    for check, v in verdicts.items():
        status = "PASS" if v["passed"] else "FAIL"
        print(f"{check}: {status}" + (f" ({'; '.join(v['reasons'])})" if v["reasons"] else ""))
    return EXIT_OK if all(v["passed"] for v in verdicts.values()) else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catlin-gh", description="Catlin-type metric laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-domains", help="print the fixture names")

    def common(sp):
        sp.add_argument("--domain")
        sp.add_argument("--metric")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config", help="YAML file with RunConfig fields")

    sm = sub.add_parser("sample-metric", help="dump metric samples as CSV")
    common(sm)
    sm.add_argument("--count", type=int)
    sm.add_argument("--out", dest="out_dir")

    g = sub.add_parser("geodesic", help="one geodesic with its certificate")
    common(g)
    g.add_argument("--from", dest="source")
    g.add_argument("--to", dest="target")
    g.add_argument("--h", type=float)
    g.add_argument("--delta-min", dest="delta_min", type=float)
    g.add_argument("--frame")
    g.add_argument("--out", dest="out_dir")

    v = sub.add_parser("verify", help="run verification checks")
    common(v)
    v.add_argument("--check", help=f"comma-separated subset of {','.join(CHECKS)}")
    v.add_argument("--h", type=float)
    v.add_argument("--delta-min", dest="delta_min", type=float)
    v.add_argument("--pairs", type=int)
    v.add_argument("--out", dest="out_dir")
    v.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    out = Path(flags.get("out_dir") or "out")
    try:
        file_values = load_config(args.config) if getattr(args, "config", None) else {}
        cfg = resolve_config(args.command, file_values, flags)
        out = Path(cfg.out_dir)
        return run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        if args.command != "list-domains":
            write_error(out, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except (NumericError, MemoryError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        write_error(out, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except CatlinError as exc:
        # precondition failures come from the request itself
        print(f"error: {exc}", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        write_error(out, exc, EXIT_CONFIG)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
