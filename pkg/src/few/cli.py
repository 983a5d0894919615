"""``few compute|sweep|verify|oracle`` command-line interface."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from few.ga import GaConfig
from few.innermin import InnerMinConfig, grid_oracle
from few.measure import MeasureOptions, MeasureResult, compute_few_measure, derived_seed
from few.states import (
    DensityMatrix,
    StateValidationError,
    bell_state,
    ghz_w_mixture,
    matrix_from_json,
    two_qutrit_alpha,
    werner,
)
from few.witness import TracelessObservable, Witness, verify_witness

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

FAMILIES = {
    "werner": (werner, (0.0, 1.0), (2, 2)),
    "ghzw": (ghz_w_mixture, (0.0, 1.0), (2, 2, 2)),
    "qutrit": (two_qutrit_alpha, (2.0, 5.0), (3, 3)),
}

# Population and generation defaults by system; two-qubit values follow the Bell-state run.
SYSTEM_DEFAULTS = {
    (2, 2): {"pop_size": 350, "generations": 80},
    (2, 2, 2): {"pop_size": 630, "generations": 300},
    (3, 3): {"pop_size": 800, "generations": 300},
}

GA_KEYS = {f.name: f.type for f in fields(GaConfig) if f.name != "seed"}
INNER_KEYS = {f.name: f.type for f in fields(InnerMinConfig)}
RUN_KEYS = {"seed": int, "jobs": int, "format": str, "out": str, "verify_budget": int, "refine_iters": int}


class ConfigError(ValueError):
    pass


def _coerce(kind, raw: str):
    kind = {"int": int, "float": float, "str": str}.get(kind, kind) if isinstance(kind, str) else kind
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__}") from None


@dataclass
class RunConfig:
    """Explicit settings only; anything unset falls back to per-system defaults at resolve time."""

    ga: dict = field(default_factory=dict)
    inner: dict = field(default_factory=dict)
    seed: int | None = None
    jobs: int = 1
    format: str = "json"
    out: str | None = None
    verify_budget: int = 2000
    refine_iters: int = 100

    def __post_init__(self):
        for name, table, section in ((self.ga, GA_KEYS, "ga"), (self.inner, INNER_KEYS, "inner")):
            unknown = set(name) - set(table)
            if unknown:
                raise ConfigError(f"unknown [{section}] keys: {sorted(unknown)}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.verify_budget < 1:
            raise ConfigError("verify_budget must be >= 1")
        if self.refine_iters < 0:
            raise ConfigError("refine_iters must be >= 0")

    def resolve(self, dims, seed: int | None = None) -> tuple[GaConfig, InnerMinConfig]:
        seed = self.effective_seed() if seed is None else seed
        base = SYSTEM_DEFAULTS.get(tuple(dims))
        if base is None:
            ga = GaConfig.for_dims(dims, seed=seed, **self.ga)
        else:
            ga = GaConfig(**{**base, **self.ga, "seed": seed})
        try:
            return ga, InnerMinConfig.for_dims(dims, **self.inner)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def options(self) -> MeasureOptions:
        return MeasureOptions(verify_budget=self.verify_budget, refine_iters=self.refine_iters)

    def effective_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        env = os.environ.get("FEW_SEED")
        return int(env) if env else 0

    def dumps(self) -> str:
        cp = configparser.ConfigParser()
        cp["ga"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in self.ga.items()}
        cp["inner"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in self.inner.items()}
        run = {"jobs": str(self.jobs), "format": self.format, "verify_budget": str(self.verify_budget),
               "refine_iters": str(self.refine_iters)}
        if self.seed is not None:
            run["seed"] = str(self.seed)
        if self.out is not None:
            run["out"] = self.out
        cp["run"] = run
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        unknown = set(cp.sections()) - {"ga", "inner", "run"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs: dict = {"ga": {}, "inner": {}}
        for section, table in (("ga", GA_KEYS), ("inner", INNER_KEYS), ("run", RUN_KEYS)):
            if not cp.has_section(section):
                continue
            for key, raw in cp[section].items():
                if key not in table:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                value = _coerce(table[key], raw)
                if section == "run":
                    kwargs[key] = value
                else:
                    kwargs[section][key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text())


# --- state specs ------------------------------------------------------------


def parse_family_param(family: str, value: float) -> DensityMatrix:
    try:
        ctor, (lo, hi), _ = FAMILIES[family]
    except KeyError:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    if not lo <= value <= hi:
        raise ConfigError(f"{family} parameter {value} outside [{lo}, {hi}]")
    return ctor(value)


def parse_state(spec: str) -> DensityMatrix:
    """``bell:ij``, ``werner:F``, ``ghzw:q``, ``qutrit:alpha`` or a JSON matrix file."""
    if ":" in spec and not Path(spec).exists():
        family, _, arg = spec.partition(":")
        if family == "bell":
            if len(arg) != 2 or any(c not in "01" for c in arg):
                raise ConfigError(f"bell index must be two bits like '00', got {arg!r}")
            return bell_state(int(arg[0]), int(arg[1]))
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"bad parameter {arg!r} for {family}") from None
        return parse_family_param(family, value)
    try:
        with open(spec) as fh:
            return DensityMatrix.from_json(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read state {spec!r}: {exc}") from None


def parse_range(text: str, family: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"range must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"empty or descending range {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    values = [round(start + i * step, 12) for i in range(n)]
    _, (lo, hi), _ = FAMILIES[family]
    bad = [v for v in values if not lo <= v <= hi]
    if bad:
        raise ConfigError(f"{family} parameters {bad} outside [{lo}, {hi}]")
    return values


# --- commands ---------------------------------------------------------------


def fmt(x: float) -> str:
    return f"{x:.6g}"


SWEEP_COLUMNS = ["parameter", "e_value", "verdict", "mu", "best_fitness", "seed"]


def _row(param, result: MeasureResult) -> list[str]:
    return [fmt(param), fmt(result.e_value), result.verdict.value, fmt(result.mu), fmt(result.best_fitness), str(result.seed)]


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compute(spec: str, cfg: RunConfig) -> tuple[MeasureResult, int]:
    rho = parse_state(spec)
    ga, inner = cfg.resolve(rho.dims)
    result = compute_few_measure(rho, ga, inner, cfg.options())
    w = result.witness
    print(f"E = {fmt(result.e_value)}  verdict = {result.verdict.value}  seed = {result.seed}")
    print(f"mu = {fmt(result.mu)}  Tr(W rho) = {fmt(float(np.real(np.trace(w.matrix @ rho.matrix))))}")
    if result.upper_bound is not None:
        print(f"upper bound on E from {result.refine_iterations} refinement rounds = {fmt(result.upper_bound)}")
    if result.verification is not None:
        print(result.verification.summary())
    if cfg.out:
        if cfg.format == "json":
            Path(cfg.out).write_text(json.dumps(result.to_json(), indent=2))
        else:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(SWEEP_COLUMNS)
            writer.writerow(_row(float("nan"), result))
            Path(cfg.out).write_text(buf.getvalue())
    return result, EXIT_OK


def _sweep_point(args):
    family, value, cfg, seed = args
    rho = parse_family_param(family, value)
    ga, inner = cfg.resolve(rho.dims, seed=seed)
    return _row(value, compute_few_measure(rho, ga, inner, cfg.options()))


def cmd_sweep(family: str, range_spec: str, cfg: RunConfig) -> str:
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    values = parse_range(range_spec, family)
    master = cfg.effective_seed()
    tasks = [(family, v, cfg, derived_seed(master, i)) for i, v in enumerate(values)]
    if cfg.jobs == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_verify(witness_path: str, spec: str, budget: int, seed: int = 0):
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    try:
        w = Witness.load(witness_path)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read witness {witness_path!r}: {exc}") from None
    rho = parse_state(spec)
    if w.dims is None:
        w = Witness(w.matrix, w.mu, dims=rho.dims, metadata=w.metadata)
    report = verify_witness(w, rho, budget, np.random.default_rng(seed))
    print(report.summary())
    return report, EXIT_OK if report.passed else EXIT_FAIL


def load_observable(path: str, dims=None) -> TracelessObservable:
    try:
        with open(path) as fh:
            matrix, file_dims = matrix_from_json(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read operator {path!r}: {exc}") from None
    dims = tuple(dims) if dims else file_dims
    if dims is None:
        raise ConfigError("operator dims unknown: pass --dims or include 'dims' in the file")
    if int(np.prod(dims)) != matrix.shape[0]:
        raise ConfigError(f"dims {dims} do not match a {matrix.shape[0]}x{matrix.shape[0]} operator")
    try:
        return TracelessObservable.from_matrix(matrix, dims, tol=1e-10)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_oracle(path: str, dims, resolution: int) -> float:
    z = load_observable(path, dims)
    try:
        value = grid_oracle(z, z.dims, resolution)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(fmt(value))
    return value


# --- entry point ------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [ga], [inner], [run] sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--verify-budget", type=int)
    p.add_argument("--refine-iters", type=int, help="cutting-plane rounds after the GA (0 = GA only)")
    p.add_argument("--pop-size", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--n-probe", type=int)
    p.add_argument("--n-refine", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="few", description="Floating entanglement witness measure")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("compute", help="estimate E(rho) and extract a witness")
    p.add_argument("state", help="bell:ij | werner:F | ghzw:q | qutrit:alpha | matrix.json")
    _common(p)
    p = sub.add_parser("sweep", help="E over a family parameter grid, as CSV")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("range", help="start:stop:step (inclusive)")
    _common(p)
    p = sub.add_parser("verify", help="check a witness JSON against a state")
    p.add_argument("witness")
    p.add_argument("state")
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("oracle", help="grid minimum of Tr(Z rho_s) over product states")
    p.add_argument("operator")
    p.add_argument("--dims", help="comma-separated subsystem dims, e.g. 2,2")
    p.add_argument("--resolution", type=int, default=25)
    return parser


def run_config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    ga, inner = dict(cfg.ga), dict(cfg.inner)
    for flag, key in (("pop_size", "pop_size"), ("generations", "generations")):
        if getattr(args, flag) is not None:
            ga[key] = getattr(args, flag)
    for flag in ("n_probe", "n_refine"):
        if getattr(args, flag) is not None:
            inner[flag] = getattr(args, flag)
    return RunConfig(
        ga=ga,
        inner=inner,
        seed=args.seed if args.seed is not None else cfg.seed,
        jobs=args.jobs if args.jobs is not None else cfg.jobs,
        format=args.format or cfg.format,
        out=args.out if args.out is not None else cfg.out,
        verify_budget=args.verify_budget if args.verify_budget is not None else cfg.verify_budget,
        refine_iters=args.refine_iters if args.refine_iters is not None else cfg.refine_iters,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compute":
            _, code = cmd_compute(args.state, run_config_from_args(args))
            return code
        if args.command == "sweep":
            cfg = run_config_from_args(args)
            _write(cmd_sweep(args.family, args.range, cfg), cfg.out)
            return EXIT_OK
        if args.command == "verify":
            _, code = cmd_verify(args.witness, args.state, args.budget, args.seed)
            return code
        dims = tuple(int(d) for d in args.dims.split(",")) if args.dims else None
        cmd_oracle(args.operator, dims, args.resolution)
        return EXIT_OK
    except (ConfigError, StateValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
