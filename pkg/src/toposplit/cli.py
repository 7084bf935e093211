"""Benchmark driver: YAML run configurations, result files and refinement sweeps.

Usage::

    toposplit run case.yaml [--override key=value ...]
    toposplit refine case.yaml --factors 1,2,4 [--override key=value ...]

Exit codes: 0 converged, 2 iteration cap reached, 3 numerical failure,
1 bad configuration or I/O error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .assemble import assemble_operators
from .grid import inverter_problem, mbb_problem
from .model import Problem
from .optim import IterationRecord, OptimizerConfig, RunResult, run, summarize

log = logging.getLogger(__name__)

EXIT_CONVERGED = 0
EXIT_CONFIG = 1
EXIT_MAX_ITER = 2
EXIT_NUMERICAL = 3

PROBLEMS = ("mbb", "inverter")
LAM_AUTO = "auto"  # 200 / (meshed area)

_OPTIMIZER_FIELDS = {f.name for f in dataclasses.fields(OptimizerConfig)}

# Per-problem defaults, applied before user values.
_PROBLEM_DEFAULTS: dict[str, dict] = {
    "mbb": {"nx": 300, "ny": 50, "beta": 0.06, "lam": LAM_AUTO, "load": 0.3, "optimizer": {}},
    "inverter": {
        "nx": 160, "ny": 160, "beta": 3e-4, "lam": 0.15, "load": 1.0,
        "optimizer": {
            "algorithm": "tmp", "hessian": "reciprocal-absolute", "tau0": 0.1,
            "backtracking": False, "lam_start": 0.02,
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    problem: str
    nx: int
    ny: int
    beta: float
    lam: float | str = LAM_AUTO
    p: float = 3.0
    delta_rho: float = 1e-3
    load: float = 0.3
    k_in: float = 0.1
    k_out: float = 0.1
    output_dir: str = "out"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def lam_value(self) -> float:
        """Volume price; ``auto`` resolves to 200 over the meshed area."""
        if self.lam == LAM_AUTO:
            area = self.nx / self.ny  # element size 1/ny
            return 200.0 / area
        return float(self.lam)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["optimizer"] = dataclasses.asdict(self.optimizer)
        return out


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _check_number(raw: dict, key: str, kind=float, low=None, high=None, low_open=False):
    if key not in raw:
        return
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if low is not None and (value <= low if low_open else value < low):
        raise ConfigError(f"{key}: must be {'>' if low_open else '>='} {low}, got {value!r}")
    if high is not None and value > high:
        raise ConfigError(f"{key}: must be <= {high}, got {value!r}")
    raw[key] = kind(value)


def config_from_dict(data: dict | None) -> RunConfig:
    """Validate a nested mapping and fill defaults."""
    data = dict(data or {})
    if "problem" not in data:
        raise ConfigError("problem: required (one of mbb, inverter)")
    problem = data["problem"]
    if problem not in PROBLEMS:
        raise ConfigError(f"problem: must be one of {PROBLEMS}, got {problem!r}")
    top_fields = {f.name for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in top_fields:
            raise ConfigError(f"{key}: unknown key")
    opt = data.get("optimizer") or {}
    if not isinstance(opt, dict):
        raise ConfigError("optimizer: expected a mapping")
    for key in opt:
        if key not in _OPTIMIZER_FIELDS:
            raise ConfigError(f"optimizer.{key}: unknown key")
    data["optimizer"] = opt
    raw = _merge(_PROBLEM_DEFAULTS[problem], data)

    _check_number(raw, "nx", int, low=1)
    _check_number(raw, "ny", int, low=1)
    _check_number(raw, "beta", low=0.0)
    _check_number(raw, "p", low=1.0)
    _check_number(raw, "delta_rho", low=0.0, high=0.5, low_open=True)
    _check_number(raw, "load", low=0.0, low_open=True)
    _check_number(raw, "k_in", low=0.0, low_open=True)
    _check_number(raw, "k_out", low=0.0, low_open=True)
    if raw["lam"] != LAM_AUTO:
        _check_number(raw, "lam", low=0.0, low_open=True)
    if not isinstance(raw.get("output_dir", ""), str):
        raise ConfigError("output_dir: expected a string")
    try:
        optimizer = OptimizerConfig(**raw.pop("optimizer"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from None
    return RunConfig(optimizer=optimizer, **raw)


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected key=value")
    key, value = text.split("=", 1)
    path = [k for k in key.strip().split(".") if k]
    if not path:
        raise ConfigError(f"override {text!r}: empty key")
    return path, yaml.safe_load(value)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    data = copy.deepcopy(data or {})
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{'.'.join(path)}: {key} is not a mapping")
        node[path[-1]] = value
    return data


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(apply_overrides(data or {}, overrides or []))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def build_problem(cfg: RunConfig) -> Problem:
    if cfg.problem == "mbb":
        mesh, bc = mbb_problem(cfg.nx, cfg.ny, cfg.load)
    else:
        mesh, bc = inverter_problem(cfg.nx, cfg.ny, cfg.k_in, cfg.k_out, cfg.load)
    ops = assemble_operators(mesh, bc, cfg.beta)
    return Problem(ops, p=cfg.p, lam=cfg.lam_value(), delta_rho=cfg.delta_rho)


# -- result files ---------------------------------------------------------------

ITERATION_COLUMNS = ("n", "tau", "backtracks", "J", "R", "V", "Jtilde", "E1", "E2")


def write_pgm(path: Path, image: np.ndarray) -> None:
    """ASCII greyscale image; ``image`` has row 0 at the bottom, solid renders black."""
    ny, nx = image.shape
    pixels = np.rint(255.0 * (1.0 - np.clip(image, 0.0, 1.0))).astype(int)
    lines = ["P2", f"{nx} {ny}", "255"]
    lines += [" ".join(map(str, row)) for row in pixels[::-1]]
    path.write_text("\n".join(lines) + "\n")


def write_density_csv(path: Path, image: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in image:
            writer.writerow([repr(float(x)) for x in row])


def write_iterations(path: Path, history: list[IterationRecord]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ITERATION_COLUMNS)
        for r in history:
            writer.writerow([r.n, repr(r.tau), r.backtracks, repr(r.J), repr(r.R), repr(r.V),
                             repr(r.Jt), repr(r.E1), repr(r.E2)])


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


@dataclass
class CaseResult:
    exit_code: int
    summary: dict
    result: RunResult | None = None
    image: np.ndarray | None = None


def run_case(cfg: RunConfig, output_dir: str | Path | None = None) -> CaseResult:
    """Run one configuration and write its result files to ``output_dir``."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc

    problem = build_problem(cfg)
    mesh = problem.ops.mesh
    history: list[IterationRecord] = []
    last_z = [np.full(problem.n, 0.5)]

    def record(rec, z):
        history.append(rec)
        last_z[0] = z

    result = None
    error = None
    try:
        with np.errstate(divide="raise", over="raise", invalid="raise", under="ignore"):
            result = run(problem, cfg.optimizer, callback=record)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError, RuntimeError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.error("numerical failure after %d iterations: %s", len(history), error)

    if result is None:
        result = RunResult(z=last_z[0], history=history, status="failed")
        summary = summarize(problem, result)
        summary["error"] = error
        code = EXIT_NUMERICAL
    else:
        summary = result.summary
        code = EXIT_CONVERGED if result.converged else EXIT_MAX_ITER
    summary = _plain(summary)
    summary["lam_final"] = problem.lam
    summary["config"] = cfg.to_dict()

    image = mesh.elemental_grid(problem.ops.P @ result.z)
    write_pgm(out / "density.pgm", image)
    write_density_csv(out / "density.csv", image)
    write_iterations(out / "iterations.csv", result.history)
    (out / "summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=False))
    return CaseResult(code, summary, result, image)


# -- refinement -----------------------------------------------------------------

def resample_nearest(image: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resampling of a cell image onto a grid of ``shape`` cells."""
    ny, nx = image.shape
    rows = ((np.arange(shape[0]) + 0.5) * ny / shape[0]).astype(int)
    cols = ((np.arange(shape[1]) + 0.5) * nx / shape[1]).astype(int)
    return image[np.ix_(rows, cols)]


def threshold_overlap(coarse: np.ndarray, fine: np.ndarray, level: float = 0.5) -> float:
    """Fraction of fine cells whose thresholded density matches the resampled coarse one."""
    up = resample_nearest(coarse, fine.shape)
    return float(np.mean((up >= level) == (fine >= level)))


def resampled_correlation(coarse: np.ndarray, fine: np.ndarray) -> float:
    up = resample_nearest(coarse, fine.shape).ravel()
    return float(np.corrcoef(up, fine.ravel())[0, 1])


def refine_sweep(cfg: RunConfig, factors: list[int], output_dir: str | Path | None = None) -> dict:
    """Solve the same physical problem on grids scaled by each factor.

    A failed level is recorded with its error and skipped in the comparisons.
    """
    if not factors or any(int(f) != f or f < 1 for f in factors):
        raise ConfigError(f"factors: expected positive integers, got {factors!r}")
    root = Path(output_dir if output_dir is not None else cfg.output_dir)
    levels, images = [], []
    for f in factors:
        level_cfg = dataclasses.replace(cfg, nx=cfg.nx * int(f), ny=cfg.ny * int(f))
        entry = {"factor": int(f), "nx": level_cfg.nx, "ny": level_cfg.ny}
        try:
            case = run_case(level_cfg, root / f"level_x{int(f)}")
        except (OSError, np.linalg.LinAlgError, ValueError) as exc:
            entry.update(status="failed", error=str(exc))
            levels.append(entry)
            images.append(None)
            continue
        s = case.summary
        entry.update({k: s.get(k) for k in ("status", "iterations", "backtracks", "V", "Jt", "discreteness")})
        if case.exit_code == EXIT_NUMERICAL:
            entry["status"] = "failed"
        levels.append(entry)
        images.append(case.image if entry["status"] != "failed" else None)

    comparisons = []
    for i in range(len(levels) - 1):
        a, b = images[i], images[i + 1]
        pair = {"from": levels[i]["factor"], "to": levels[i + 1]["factor"]}
        if a is None or b is None:
            pair["missing"] = True
        else:
            coarse, fine = (a, b) if a.size <= b.size else (b, a)
            pair.update(
                overlap=threshold_overlap(coarse, fine),
                correlation=resampled_correlation(coarse, fine),
                volume_difference=abs(levels[i]["V"] - levels[i + 1]["V"]),
            )
        comparisons.append(pair)
    report = _plain({"levels": levels, "comparisons": comparisons})
    root.mkdir(parents=True, exist_ok=True)
    (root / "refine.yaml").write_text(yaml.safe_dump(report, sort_keys=False))
    return report


# -- command line ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 2 is reserved for the iteration cap
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _factors(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toposplit", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one configuration")
    p_ref = sub.add_parser("refine", help="run a mesh refinement sweep")
    for p in (p_run, p_ref):
        p.add_argument("config", help="YAML configuration file")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config value, e.g. beta=0.01 or optimizer.tau0=2 (repeatable)")
    p_ref.add_argument("--factors", type=_factors, default=[1, 2, 4],
                       help="comma-separated grid multipliers (default 1,2,4)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override)
        if args.command == "run":
            case = run_case(cfg)
            s = case.summary
            print(f"{s['status']}: {s['iterations']} iterations, {s['backtracks']} backtracks, "
                  f"Jt={s.get('Jt', float('nan')):.6g}, V={s.get('V', float('nan')):.4f}, "
                  f"M={s['discreteness']:.2f}% -> {cfg.output_dir}")
            return case.exit_code
        report = refine_sweep(cfg, args.factors)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(yaml.safe_dump(report, sort_keys=False), end="")
    if any(lv.get("status") == "failed" for lv in report["levels"]):
        return EXIT_NUMERICAL
    if any(lv.get("status") != "converged" for lv in report["levels"]):
        return EXIT_MAX_ITER
    return EXIT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
