"""Command line entry point.

Configuration precedence, lowest to highest: built-in defaults, the
``--config`` file (``key = value`` lines, ``#`` comments), the environment
(``LRF_OUT_DIR``, ``LRF_WORKERS``), command-line flags.

Exit status: 0 success, 1 configuration/usage error, 2 numeric failure,
3 resource limit.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, NumericError, ResourceError, ShapeError
from .formats import (
    read_distances_csv,
    read_field,
    write_cloud_csv,
    write_field_binary,
    write_field_csv,
    write_functional_csv,
    write_rate_fit_csv,
    write_study_outputs,
)
from .surfaces import DEFAULT_POINTS_DENSITY

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3
ENV_OUT_DIR, ENV_WORKERS = "LRF_OUT_DIR", "LRF_WORKERS"


def _real(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    try:
        return float(Fraction(s)) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a real number: {text!r}") from None


def _int(text) -> int:
    v = _real(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_radii(text) -> tuple:
    """``"20:120:20"`` (inclusive range) or a comma/space separated list."""
    if isinstance(text, (list, tuple)):
        return tuple(_real(t) for t in text)
    s = str(text).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (_real(p) for p in parts)
        if step <= 0:
            raise ValueError("range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + k * step for k in range(count))
    return tuple(_real(t) for t in s.replace(",", " ").split())


def _str(text) -> str:
    return str(text).strip()


# key -> (parser, default)
SCHEMA = {
    "surface": (_str, "sphere"),
    "weight": (_str, "constant_one"),
    "alpha": (_real, 2.0 / 3.0),
    "kappa": (_int, 2),
    "g": (_str, "H2"),
    "d": (_int, 3),
    "radii": (parse_radii, (20.0, 40.0, 60.0, 80.0, 100.0, 120.0)),
    "reference_radius": (_real, None),
    "replicates": (_int, 500),
    "repeats": (_int, 20),
    "points_density": (_real, DEFAULT_POINTS_DENSITY),
    "seed": (_int, 0),
    "out_dir": (_str, "."),
    "workers": (_int, None),
    "share_fields": (_bool, False),
    "max_points": (_int, 16000),
    "plots": (_bool, False),
    "radius": (_real, 20.0),
    "n_points": (_int, None),
    "format": (_str, "csv"),
    "mode": (_str, "full"),
    "input": (_str, None),
    "output": (_str, None),
}

_BASE = {"seed", "out_dir", "workers"}
_MODEL = {"alpha", "kappa", "g", "weight", "surface", "d"}
KEYS = {
    "sample-surface": _BASE | {"surface", "radius", "n_points", "points_density", "output"},
    "simulate-field": _BASE | {"surface", "radius", "n_points", "points_density", "alpha", "d",
                               "replicates", "format", "output", "max_points"},
    "compute-functional": _BASE | _MODEL | {"radius", "n_points", "points_density", "mode", "input", "output"},
    "ks-study": _BASE | _MODEL | {"radii", "reference_radius", "replicates", "repeats", "points_density",
                                  "share_fields", "max_points", "plots"},
    "rate-fit": _BASE | {"input", "output"},
    "variance-check": _BASE | _MODEL | {"radius", "n_points", "points_density", "replicates", "mode"},
}
SUBCOMMANDS = tuple(KEYS)


def read_config_file(path) -> dict:
    raw = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}", key="config") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'", key="config")
        key, value = (t.strip() for t in line.split("=", 1))
        raw[key.replace("-", "_")] = value
    return raw


def parse_config(subcommand: str, path=None, flags: dict | None = None, env=None) -> dict:
    """Merge defaults, config file, environment and flags; validate the result."""
    if subcommand not in KEYS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", key="subcommand")
    allowed = KEYS[subcommand]
    env = os.environ if env is None else env
    raw = read_config_file(path) if path else {}
    if ENV_OUT_DIR in env:
        raw["out_dir"] = env[ENV_OUT_DIR]
    if ENV_WORKERS in env:
        raw["workers"] = env[ENV_WORKERS]
    for key, value in (flags or {}).items():
        if value is not None:
            raw[key] = value
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown key for {subcommand}", key=key)
    cfg = {}
    for key in sorted(allowed):
        parser, default = SCHEMA[key]
        if key in raw:
            try:
                cfg[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigError(str(exc), key=key) from None
        else:
            cfg[key] = default
    if subcommand == "variance-check" and "replicates" not in raw:
        cfg["replicates"] = 10000
    if "workers" in cfg and cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    _validate(subcommand, cfg)
    return cfg


def _validate(subcommand: str, cfg: dict) -> None:
    if cfg.get("workers", 1) < 1:
        raise ConfigError("must be >= 1", key="workers")
    if not 0 <= cfg.get("seed", 0) < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", key="seed")
    if "surface" in cfg and cfg["surface"] not in ("sphere", "cube"):
        raise ConfigError(f"unknown surface {cfg['surface']!r}", key="surface")
    if "alpha" in cfg:
        d, alpha = cfg["d"], cfg["alpha"]
        if not 0 < alpha < d:
            raise ConfigError(f"alpha must lie in (0, d) = (0, {d})", key="alpha")
        if "kappa" in cfg:
            k = cfg["kappa"]
            if k < 1:
                raise ConfigError("must be >= 1", key="kappa")
            if not k * alpha < d - 1:
                raise ConfigError(
                    f"kappa * alpha = {k * alpha:.6g} must be below d - 1 = {d - 1} (long-range regime)",
                    key="alpha",
                )
    if cfg.get("format", "csv") not in ("csv", "bin"):
        raise ConfigError("must be 'csv' or 'bin'", key="format")
    if cfg.get("mode", "full") not in ("full", "rank"):
        raise ConfigError("must be 'full' or 'rank'", key="mode")
    out = cfg.get("output")
    if out is not None and (os.sep in out or out in ("", ".", "..")):
        raise ConfigError("must be a plain file name inside out_dir", key="output")
    if subcommand in ("compute-functional", "rate-fit") and not cfg.get("input"):
        raise ConfigError("an input file is required", key="input")
    if "radius" in cfg and not cfg["radius"] > 0:
        raise ConfigError("must be positive", key="radius")


class RunManifest:
    """JSON record of a run, written to ``out_dir/manifest.json`` before work starts."""

    def __init__(self, subcommand: str, cfg: dict):
        self.out_dir = Path(cfg["out_dir"]).resolve()
        self.path = self.out_dir / "manifest.json"
        inp = cfg.get("input")
        self.data = {
            "subcommand": subcommand,
            "tool_version": __version__,
            "numpy_version": np.__version__,
            "config": {k: v for k, v in cfg.items()},
            "master_seed": cfg.get("seed"),
            "inputs": [str(Path(inp).resolve())] if inp else [],
            "outputs": [],
            "start": _now(),
            "end": None,
            "status": "running",
        }
        self.data["config"]["out_dir"] = str(self.out_dir)

    def write(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, default=str) + "\n")

    def finish(self, outputs, status: str = "ok") -> None:
        self.data["outputs"] = [str(Path(p).resolve()) for p in outputs]
        self.data["end"] = _now()
        self.data["status"] = status
        self.write()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _cloud(cfg: dict):
    from .surfaces import make_cloud, points_for_density

    n = cfg.get("n_points")
    if n is None:
        n = points_for_density(cfg["surface"], cfg["radius"], cfg["points_density"])
    return make_cloud(cfg["surface"], cfg["radius"], n)


def _functional_config(cfg: dict):
    from .functionals import FunctionalConfig

    return FunctionalConfig.build(alpha=cfg["alpha"], d=cfg["d"], g=cfg["g"], weight=cfg["weight"],
                                  jmax=max(10, cfg["kappa"]), kappa=cfg["kappa"])


def _progress(k: int, total: int) -> None:
    print(f"PROGRESS {k}/{total}", file=sys.stderr, flush=True)


def _cmd_sample_surface(cfg, out):
    cloud = _cloud(cfg)
    path = out / (cfg["output"] or "cloud.csv")
    write_cloud_csv(path, cloud.points)
    print(f"wrote {cloud.n} points to {path}")
    return [path]


def _cmd_simulate_field(cfg, out):
    from .covariance import CovarianceModel
    from .simulation import SeedPolicy, factorize, simulate_values

    cloud = _cloud(cfg)
    factor = factorize(CovarianceModel(cfg["alpha"], cfg["d"]), cloud, max_points=cfg["max_points"])
    values = simulate_values(factor, SeedPolicy(cfg["seed"]), cfg["replicates"])
    if cfg["format"] == "bin":
        path = out / (cfg["output"] or "field.bin")
        write_field_binary(path, values)
    else:
        path = out / (cfg["output"] or "field.csv")
        write_field_csv(path, values)
    print(f"wrote {values.shape[0]} realizations on {cloud.n} points to {path} (jitter {factor.jitter:g})")
    return [path]


def _cmd_compute_functional(cfg, out):
    from .functionals import functional_values

    cloud = _cloud(cfg)
    values = read_field(cfg["input"])
    fcfg = _functional_config(cfg)
    x = functional_values(fcfg, cloud, values, mode=cfg["mode"])
    path = out / (cfg["output"] or "functional.csv")
    write_functional_csv(path, x)
    print(f"wrote {x.size} functional values to {path}")
    return [path]


def _study_config(cfg: dict):
    from .study import StudyConfig

    return StudyConfig(
        surface=cfg["surface"], weight=cfg["weight"], alpha=cfg["alpha"], kappa=cfg["kappa"], g=cfg["g"],
        radii=cfg["radii"], reference_radius=cfg["reference_radius"], replicates=cfg["replicates"],
        repeats=cfg["repeats"], points_density=cfg["points_density"], seed=cfg["seed"],
        workers=cfg["workers"], d=cfg["d"], max_points=cfg["max_points"], share_fields=cfg["share_fields"],
    )


def _cmd_ks_study(cfg, out, dry_run=False):
    from .simulation import check_size
    from .study import run_study

    scfg = _study_config(cfg)
    scfg.functional_config()
    for r, n in scfg.point_counts().items():
        check_size(n, scfg.max_points, what=f"{scfg.surface} cloud at r={r:g}")
    if dry_run:
        print(f"dry run: configuration valid; point counts {scfg.point_counts()}")
        return []
    result = run_study(scfg, progress=_progress)
    paths = write_study_outputs(result, out, plots=cfg["plots"])
    fit = result.rate_fit
    if fit is not None:
        print(f"log-rate fit: intercept={fit.intercept:.6g} slope={fit.slope:.6g} se={fit.slope_se:.3g}")
    return paths


def _cmd_rate_fit(cfg, out):
    from .study import fit_log_rate

    radii, dist = read_distances_csv(cfg["input"])
    fit = fit_log_rate(dist, radii)
    path = out / (cfg["output"] or "rate_fit.csv")
    write_rate_fit_csv(path, fit)
    print(f"intercept={fit.intercept:.6g} slope={fit.slope:.6g} slope_se={fit.slope_se:.3g} "
          f"n={fit.n_points} excluded_zeros={fit.excluded_zeros}")
    return [path]


def _cmd_variance_check(cfg, out):
    from .functionals import exact_variance, functional_values
    from .simulation import SeedPolicy, factorize, simulate_values

    if cfg["n_points"] is None:
        cfg = dict(cfg, n_points=200)
    cloud = _cloud(cfg)
    fcfg = _functional_config(cfg)
    exact = exact_variance(fcfg, cloud)
    factor = factorize(fcfg.model, cloud)
    x = functional_values(fcfg, cloud, simulate_values(factor, SeedPolicy(cfg["seed"]), cfg["replicates"]),
                          mode="rank")
    mc, se = variance_with_se(x)
    z = (mc - exact) / se
    verdict = "PASS" if abs(z) <= 3 else "FAIL"
    lines = [
        f"cloud: {cloud.cloud_id}  weight: {fcfg.weight.kind}  kappa: {fcfg.kappa}",
        f"exact variance:       {exact:.6g}",
        f"Monte Carlo variance: {mc:.6g} (se {se:.3g}, {x.size} replicates)",
        f"z = {z:+.3f}  {verdict} at 3 standard errors",
    ]
    print("\n".join(lines))
    path = out / "variance_check.txt"
    path.write_text("\n".join(lines) + "\n")
    return [path]


def variance_with_se(x) -> tuple[float, float]:
    """Unbiased sample variance and its large-sample standard error."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    c = x - x.mean()
    s2 = float(c @ c) / (n - 1)
    m4 = float(np.mean(c**4))
    var_s2 = (m4 - s2 * s2 * (n - 3) / (n - 1)) / n
    return s2, math.sqrt(max(var_s2, 0.0))


_COMMANDS = {
    "sample-surface": _cmd_sample_surface,
    "simulate-field": _cmd_simulate_field,
    "compute-functional": _cmd_compute_functional,
    "ks-study": _cmd_ks_study,
    "rate-fit": _cmd_rate_fit,
    "variance-check": _cmd_variance_check,
}


def dispatch(subcommand: str, cfg: dict, dry_run: bool = False) -> int:
    """Run one subcommand with a parsed config and return the exit status."""
    if subcommand not in _COMMANDS:
        print(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = None
    try:
        manifest = RunManifest(subcommand, cfg)
        manifest.data["dry_run"] = dry_run
        manifest.write()
        out = manifest.out_dir
        if subcommand == "ks-study":
            outputs = _cmd_ks_study(cfg, out, dry_run=dry_run)
        elif dry_run:
            outputs = []
        else:
            outputs = _COMMANDS[subcommand](cfg, out)
        manifest.finish(outputs)
        return EXIT_OK
    except (ConfigError, DomainError, ShapeError) as exc:
        status, code = f"config error: {exc}", EXIT_CONFIG
    except ResourceError as exc:
        status, code = f"resource error: {exc}", EXIT_RESOURCE
    except NumericError as exc:
        status, code = f"numeric error: {exc}", EXIT_NUMERIC
    except OSError as exc:
        status, code = f"config error: {exc}", EXIT_CONFIG
    print(f"error: {status}", file=sys.stderr)
    if manifest is not None and manifest.path.parent.exists():
        manifest.finish([], status=status)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrfield", description="Long-range dependent random fields on spheres and cubes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    helps = {
        "sample-surface": "write a sphere/cube point cloud as x,y,z CSV",
        "simulate-field": "simulate Gaussian field realizations on a cloud",
        "compute-functional": "evaluate X_{r,G} for each realization in a field file",
        "ks-study": "run the Kolmogorov-distance convergence study",
        "rate-fit": "fit log(distance) ~ r to a distances.csv file",
        "variance-check": "compare Monte Carlo and exact variance of X_{r,kappa}",
    }
    for name, keys in KEYS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="file of 'key = value' lines")
        p.add_argument("--dry-run", action="store_true", help="validate and write the manifest only")
        for key in sorted(keys):
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar=key.upper())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    flags = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "dry_run")}
    try:
        cfg = parse_config(args.subcommand, args.config, flags)
    except ConfigError as exc:
        print(f"error: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(args.subcommand, cfg, dry_run=args.dry_run)


if __name__ == "__main__":
    sys.exit(main())
