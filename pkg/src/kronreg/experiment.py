"""Configuration-driven experiments: problem instances x regularizers -> CSV + PGM."""

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, PreconditionError
from .pgm import write_pgm
from .problems import IMAGE_KINDS, ProblemInstance, add_noise, blur_instance, shaw2d_instance
from .regmat import Side, StencilKind, reg_factor
from .tikhonov import (
    DEFAULT_ETA,
    DEFAULT_MU_BRACKET,
    SolveReport,
    TikhonovKronProblem,
    default_k_max,
    solve_kron,
)

__all__ = [
    "CANONICAL_LABELS",
    "CSV_HEADER",
    "RegSpec",
    "ExperimentConfig",
    "ResultRow",
    "parse_regularizer",
    "load_config",
    "build_instance",
    "run",
    "render",
    "run_stem",
]

PROBLEMS = ("shaw2d", "blur", "custom")

# Row order of the experiment tables, top to bottom. Labels read
# "factor 2 x factor 1" to match the Kronecker product L2 (x) L1.
CANONICAL_LABELS = (
    "Lt1xLt1",
    "P1Lt1xP1Lt1",
    "Lt1P1xLt1P1",
    "Lt2xLt1",
    "P2Lt2xP1Lt1",
    "Lt2P2xLt1P1",
    "Lt2xLt2",
    "P2Lt2xP2Lt2",
    "Lt2P2xLt2P2",
)

CSV_HEADER = (
    "regularizer",
    "noise_level",
    "seed",
    "k",
    "mu",
    "residual",
    "rel_error",
    "wall_seconds",
    "converged",
)

_FACTOR_RE = re.compile(r"^(?:P(?P<l>[12])Lt(?P<l2>[12])|Lt(?P<r>[12])P(?P<r2>[12])|Lt(?P<n>[12]))$")


@dataclass(frozen=True)
class RegSpec:
    """Regularizer pair; ``factor1`` acts on rows of X, ``factor2`` on columns."""

    factor1: Tuple[StencilKind, Side]
    factor2: Tuple[StencilKind, Side]

    @property
    def label(self):
        return f"{_factor_label(*self.factor2)}x{_factor_label(*self.factor1)}"

    def build(self, n):
        return reg_factor(self.factor1[0], n, self.factor1[1]), reg_factor(
            self.factor2[0], n, self.factor2[1]
        )


def _factor_label(kind, side):
    o = kind.order
    if side is Side.LEFT:
        return f"P{o}Lt{o}"
    if side is Side.RIGHT:
        return f"Lt{o}P{o}"
    return f"Lt{o}"


def _parse_factor_label(text, where):
    m = _FACTOR_RE.match(text)
    if m is None:
        raise ConfigError(f"{where}: cannot parse regularizer factor {text!r}")
    if m.group("l"):
        a, b, side = m.group("l"), m.group("l2"), Side.LEFT
    elif m.group("r"):
        a, b, side = m.group("r"), m.group("r2"), Side.RIGHT
    else:
        a = b = m.group("n")
        side = Side.NONE
    if a != b:
        raise ConfigError(f"{where}: projector and stencil orders differ in {text!r}")
    kind = StencilKind.L1 if a == "1" else StencilKind.L2
    return kind, side


def _parse_pair(item, where):
    if not isinstance(item, (list, tuple)) or len(item) != 2:
        raise ConfigError(f"{where}: expected a [kind, side] pair, got {item!r}")
    kind, side = item
    try:
        kind = StencilKind(kind)
    except ValueError:
        raise ConfigError(f"{where}: kind must be 'L1' or 'L2', got {kind!r}") from None
    if kind.square:
        raise ConfigError(f"{where}: kind must be 'L1' or 'L2', got {kind.value!r}")
    try:
        side = Side(side)
    except ValueError:
        raise ConfigError(
            f"{where}: side must be 'None', 'Left' or 'Right', got {side!r}"
        ) from None
    return kind, side


def parse_regularizer(item, where="regularizers"):
    """Accept a label such as ``"P2Lt2xP1Lt1"`` or ``[[kind, side], [kind, side]]``.

    In the list form the first pair is factor 1 and the second factor 2.
    """
    if isinstance(item, str):
        parts = item.split("x")
        if len(parts) != 2:
            raise ConfigError(f"{where}: label {item!r} must look like '<factor2>x<factor1>'")
        f2 = _parse_factor_label(parts[0], where)
        f1 = _parse_factor_label(parts[1], where)
        return RegSpec(f1, f2)
    if isinstance(item, dict):
        extra = set(item) - {"factor1", "factor2"}
        if extra or len(item) != 2:
            raise ConfigError(f"{where}: expected keys factor1 and factor2, got {sorted(item)}")
        return RegSpec(
            _parse_pair(item["factor1"], f"{where}.factor1"),
            _parse_pair(item["factor2"], f"{where}.factor2"),
        )
    if isinstance(item, (list, tuple)) and len(item) == 2:
        return RegSpec(_parse_pair(item[0], f"{where}[0]"), _parse_pair(item[1], f"{where}[1]"))
    raise ConfigError(f"{where}: unrecognized regularizer {item!r}")


@dataclass
class ExperimentConfig:
    """Validated experiment description; see :func:`load_config`."""

    problem: str
    n: int
    noise_levels: List[float]
    seeds: List[int]
    regularizers: List[RegSpec]
    output_dir: str
    eta: float = DEFAULT_ETA
    k_max: Optional[int] = None
    mu_bracket: Tuple[float, float] = DEFAULT_MU_BRACKET
    image_kind: Optional[str] = None
    custom_npz: Optional[str] = None
    shaw_variant: str = "canonical"

    def __post_init__(self):
        _validate(self)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
        missing = [
            name
            for name in ("problem", "n", "noise_levels", "seeds", "regularizers", "output_dir")
            if name not in doc
        ]
        if missing:
            raise ConfigError(f"missing field(s): {', '.join(missing)}")
        doc = dict(doc)
        regs = doc["regularizers"]
        if regs == "all":
            regs = list(CANONICAL_LABELS)
        if not isinstance(regs, list):
            raise ConfigError("regularizers: expected a list or 'all'")
        doc["regularizers"] = [
            parse_regularizer(item, f"regularizers[{i}]") for i, item in enumerate(regs)
        ]
        if "mu_bracket" in doc:
            mb = doc["mu_bracket"]
            if not isinstance(mb, (list, tuple)) or len(mb) != 2:
                raise ConfigError("mu_bracket: expected [mu_min, mu_max]")
            doc["mu_bracket"] = tuple(mb)
        return cls(**doc)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _validate(cfg):
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"problem: expected one of {PROBLEMS}, got {cfg.problem!r}")
    if not _is_int(cfg.n) or cfg.n < 4:
        raise ConfigError(f"n: expected an integer >= 4, got {cfg.n!r}")
    if cfg.problem == "shaw2d" and cfg.n % 2:
        raise ConfigError(f"n: shaw2d needs an even n, got {cfg.n}")
    if cfg.problem == "blur" and cfg.n < 8:
        raise ConfigError(f"n: blur images need n >= 8, got {cfg.n}")
    if not isinstance(cfg.noise_levels, list) or not cfg.noise_levels:
        raise ConfigError("noise_levels: must be a nonempty list")
    for i, nu in enumerate(cfg.noise_levels):
        if not _is_real(nu) or nu < 0:
            raise ConfigError(f"noise_levels[{i}]: expected a nonnegative real, got {nu!r}")
    if not isinstance(cfg.seeds, list) or not cfg.seeds:
        raise ConfigError("seeds: must be a nonempty list")
    for i, s in enumerate(cfg.seeds):
        if not _is_int(s) or s < 0:
            raise ConfigError(f"seeds[{i}]: expected a nonnegative integer, got {s!r}")
    if not cfg.regularizers:
        raise ConfigError("regularizers: must be a nonempty list")
    labels = [spec.label for spec in cfg.regularizers]
    dupes = sorted({label for label in labels if labels.count(label) > 1})
    if dupes:
        raise ConfigError(f"regularizers: duplicate entries {dupes}")
    if not _is_real(cfg.eta) or cfg.eta < 1:
        raise ConfigError(f"eta: must be a real >= 1, got {cfg.eta!r}")
    if cfg.k_max is not None and (not _is_int(cfg.k_max) or cfg.k_max < 1):
        raise ConfigError(f"k_max: expected a positive integer, got {cfg.k_max!r}")
    lo, hi = cfg.mu_bracket
    if not (_is_real(lo) and _is_real(hi) and 0 < lo < hi):
        raise ConfigError(f"mu_bracket: need 0 < mu_min < mu_max, got {list(cfg.mu_bracket)}")
    if cfg.image_kind is not None:
        if cfg.problem != "blur":
            raise ConfigError("image_kind: only meaningful for problem 'blur'")
        if cfg.image_kind not in IMAGE_KINDS:
            raise ConfigError(f"image_kind: expected one of {IMAGE_KINDS}, got {cfg.image_kind!r}")
    if cfg.problem == "custom" and not cfg.custom_npz:
        raise ConfigError("custom_npz: required for problem 'custom'")
    if cfg.problem != "custom" and cfg.custom_npz is not None:
        raise ConfigError("custom_npz: only valid for problem 'custom'")
    if cfg.shaw_variant not in ("canonical", "displayed"):
        raise ConfigError(f"shaw_variant: expected 'canonical' or 'displayed', got {cfg.shaw_variant!r}")
    if cfg.problem != "shaw2d" and cfg.shaw_variant != "canonical":
        raise ConfigError("shaw_variant: only meaningful for problem 'shaw2d'")
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        raise ConfigError("output_dir: expected a nonempty path string")


def load_config(path):
    """Read and validate a JSON experiment config."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(doc)


@dataclass
class ResultRow:
    regularizer_label: str
    noise_level: float
    seed: int
    k: int
    mu: float
    discrepancy_residual: float
    relative_error: float
    wall_seconds: float
    converged: bool
    report: Optional[SolveReport] = field(default=None, repr=False, compare=False)

    def csv_fields(self):
        return [
            self.regularizer_label,
            repr(float(self.noise_level)),
            str(self.seed),
            str(self.k),
            repr(float(self.mu)),
            repr(float(self.discrepancy_residual)),
            repr(float(self.relative_error)),
            f"{self.wall_seconds:.6f}",
            "true" if self.converged else "false",
        ]


def build_instance(cfg, nu, seed):
    """Problem instance for one (noise level, seed) pair."""
    if cfg.problem == "shaw2d":
        return shaw2d_instance(cfg.n, nu, seed, variant=cfg.shaw_variant)
    if cfg.problem == "blur":
        return blur_instance(cfg.n, nu, seed, image_kind=cfg.image_kind or "checker")
    with np.load(cfg.custom_npz) as data:
        try:
            k1, k2, x_true = data["k1"], data["k2"], data["x_true"]
        except KeyError as exc:
            raise ConfigError(f"custom_npz: missing array {exc}") from None
    n = cfg.n
    if k1.shape != (n, n) or k2.shape != (n, n) or x_true.shape != (n, n):
        raise ConfigError(f"custom_npz: k1, k2 and x_true must all be {n}x{n}")
    b = k1 @ x_true @ k2.T
    return ProblemInstance(k1, k2, x_true, add_noise(b, nu, seed), "custom")


def run_stem(label, nu, seed):
    """File stem shared by a run's PGM and report."""
    return f"{label}_nu{nu:g}_seed{seed}"


def _instance_stem(nu, seed):
    return f"nu{nu:g}_seed{seed}"


def save_report(report, path, **meta):
    arrays = {
        "x_solution": report.x_solution,
        "mu": report.mu,
        "k_used": report.k_used,
        "discrepancy_residual": report.discrepancy_residual,
        "converged": report.converged,
        "relative_error": np.nan if report.relative_error is None else report.relative_error,
    }
    arrays.update(meta)
    np.savez(path, **arrays)


def load_report(path):
    with np.load(path) as data:
        rel = float(data["relative_error"])
        return SolveReport(
            x_solution=data["x_solution"].copy(),
            mu=float(data["mu"]),
            k_used=int(data["k_used"]),
            discrepancy_residual=float(data["discrepancy_residual"]),
            converged=bool(data["converged"]),
            relative_error=None if math.isnan(rel) else rel,
        )


def render(report, path):
    """Write the solution matrix held by `report` as a PGM image."""
    x = np.asarray(report.x_solution)
    if x.ndim != 2:
        raise PreconditionError(f"report holds no matrix solution (ndim={x.ndim})")
    write_pgm(x, path)


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_fields())


def _order_key(cfg):
    order = {label: i for i, label in enumerate(CANONICAL_LABELS)}
    position = {id(spec): i for i, spec in enumerate(cfg.regularizers)}

    def key(item):
        spec, nu_idx, seed_idx = item
        return (order.get(spec.label, len(order)), position[id(spec)], nu_idx, seed_idx)

    return key


def run(cfg: ExperimentConfig, log=None):
    """Run every (regularizer, noise level, seed) combination of `cfg`.

    Writes ``results.csv``, one PGM per run under ``runs/``, the data and
    the exact solution once per instance under ``instances/``, and an
    ``.npz`` report per run under ``reports/`` (consumed by ``render``).
    Rows come back in canonical table order, then noise level, then seed.
    """
    out = Path(cfg.output_dir)
    for sub in ("runs", "instances", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    k_max = cfg.k_max if cfg.k_max is not None else default_k_max(cfg.n)

    regs = {id(spec): spec.build(cfg.n) for spec in cfg.regularizers}
    results = {}
    for nu_idx, nu in enumerate(cfg.noise_levels):
        for seed_idx, seed in enumerate(cfg.seeds):
            inst = build_instance(cfg, nu, seed)
            stem = _instance_stem(nu, seed)
            write_pgm(inst.setup.b_noisy, out / "instances" / f"b_{stem}.pgm")
            write_pgm(inst.x_true, out / "instances" / f"xtrue_{stem}.pgm")
            for spec in cfg.regularizers:
                reg1, reg2 = regs[id(spec)]
                problem = TikhonovKronProblem(
                    inst.k1_factor,
                    inst.k2_factor,
                    inst.setup.b_noisy,
                    reg1,
                    reg2,
                    noise_bound_eps=inst.setup.eps,
                    eta=cfg.eta,
                    k_max=k_max,
                    mu_bracket=tuple(cfg.mu_bracket),
                )
                report = solve_kron(problem, reference=inst.x_true)
                row = ResultRow(
                    spec.label,
                    nu,
                    seed,
                    report.k_used,
                    report.mu,
                    report.discrepancy_residual,
                    report.relative_error,
                    report.wall_seconds,
                    report.converged,
                    report,
                )
                stem = run_stem(spec.label, nu, seed)
                render(report, out / "runs" / f"{stem}.pgm")
                save_report(report, out / "reports" / f"{stem}.npz", label=spec.label,
                            noise_level=nu, seed=seed)
                results[(spec, nu_idx, seed_idx)] = row
                if log is not None:
                    log(row)
    rows = [results[key] for key in sorted(results, key=_order_key(cfg))]
    write_csv(rows, out / "results.csv")
    return rows


def read_csv(path):
    """Parse a results CSV back into rows (without reports)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected CSV header {header}")
        rows = []
        for rec in reader:
            rows.append(
                ResultRow(
                    rec[0],
                    float(rec[1]),
                    int(rec[2]),
                    int(rec[3]),
                    float(rec[4]),
                    float(rec[5]),
                    float(rec[6]),
                    float(rec[7]),
                    rec[8] == "true",
                )
            )
    return rows


def render_input(path, out_dir):
    """Render a single ``.npz`` report, or every run listed in a results CSV.

    Returns the list of written image paths.
    """
    path = Path(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".npz":
        target = out_dir / f"{path.stem}.pgm"
        render(load_report(path), target)
        return [target]
    written = []
    for row in read_csv(path):
        stem = run_stem(row.regularizer_label, row.noise_level, row.seed)
        report_path = path.parent / "reports" / f"{stem}.npz"
        if not report_path.exists():
            raise FileNotFoundError(f"no report for {stem} next to {path}")
        target = out_dir / f"{stem}.pgm"
        render(load_report(report_path), target)
        written.append(target)
    return written


def config_to_dict(cfg):
    """JSON-serializable form of `cfg`, using canonical regularizer labels."""
    doc = asdict(cfg)
    doc["regularizers"] = [spec.label for spec in cfg.regularizers]
    doc["mu_bracket"] = list(cfg.mu_bracket)
    return doc
