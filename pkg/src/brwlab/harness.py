"""Experiment orchestration: configs, scans, fits, and the check suite.

A single ExperimentConfig drives every scan. Replicates are independent
given (seed, stage, unit, replicate), so runs are reproducible down to
the output bytes regardless of thread count: the worker pool preserves
submission order and all reductions happen sequentially over the
collected per-replicate values. Data goes to files (CSV with a metadata
header, or JSON), telemetry goes to stderr.
"""

from __future__ import annotations

import hashlib
import json
import math
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .blocks import two_tree_experiment, extra_intersections
from .branching import (
    ConditioningError,
    ProgenyLaw,
    PROGENY_PRESETS,
    extinction_probs,
    sample_backbone_tree,
    sample_gw_forest,
    size_bias,
)
from .resistance import (
    DisconnectedError,
    Network,
    SolverError,
    check_parallel_law,
    check_triangle,
    effective_resistance,
    nash_williams_lower,
    resistance_to_level,
)
from .trace import embed, embed_bridge
from .walk import (
    STEP_PRESETS,
    StepLaw,
    UnreachableError,
    covariance_norm,
    lclt_compare,
    norm_sq,
    sample_bridge,
    sample_endpoints,
    step_preset,
)

SCHEMA_VERSION = 1

# RNG stream tags: one per scan so unit indices never collide across scans.
STAGE_RESISTANCE = 1
STAGE_GAMMA = 2
STAGE_INTERSECTIONS = 3
STAGE_CHECKS = 4

SOLVER_METHODS = ("auto", "cg", "direct", "pinv")
FAULT_MODES = ("solver_residual", "asymmetric_step")


class ConfigError(ValueError):
    """Raised for unknown keys, malformed values, or inconsistent settings."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of a scan run.

    progeny is a preset name or an explicit pmf; step is a preset name,
    defaulting to the simple walk in `dim` dimensions. n_list drives the
    resistance and endpoint scans, delta_n_list the two-tree collision
    scan. Deadlines are m = m_factor * n with m_factor >= 2.
    """

    schema: int = SCHEMA_VERSION
    progeny: str | tuple[float, ...] = "binary"
    step: str = ""
    dim: int = 1
    n_list: tuple[int, ...] = ()
    m_factor: int = 2
    replicates: int = 100
    seed: int = 0
    threads: int = 1
    delta_n_list: tuple[int, ...] = ()
    offset: tuple[int, ...] = ()
    theta_grid: tuple[float, ...] = (0.5, 1.0, 2.0)
    k: int = 2
    c0_prime: float = 0.1
    n_star: int = 1
    block_detectors: bool = False
    gamma_x: tuple[tuple[int, ...], ...] = ()
    solver_method: str = "auto"
    solver_rtol: float = 1e-8
    timing: bool = False
    out_dir: str = "."

    def __post_init__(self) -> None:
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {self.schema!r}")
        if isinstance(self.progeny, str):
            if self.progeny not in PROGENY_PRESETS:
                raise ConfigError(
                    f"unknown progeny preset {self.progeny!r}; "
                    f"choose from {sorted(PROGENY_PRESETS)} or give a pmf"
                )
        else:
            object.__setattr__(self, "progeny", tuple(float(p) for p in self.progeny))
            try:
                ProgenyLaw(self.progeny).require_critical()
            except ValueError as exc:
                raise ConfigError(f"bad progeny pmf: {exc}") from None
        if self.step:
            if self.step not in STEP_PRESETS:
                raise ConfigError(
                    f"unknown step preset {self.step!r}; choose from {sorted(STEP_PRESETS)}"
                )
        elif f"srw_d{self.dim}" not in STEP_PRESETS:
            raise ConfigError(f"no simple-walk preset for dim={self.dim}")
        for name in ("n_list", "delta_n_list", "offset", "theta_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "gamma_x", tuple(tuple(int(c) for c in x) for x in self.gamma_x)
        )
        if any(n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be >= 1")
        if self.m_factor < 2:
            raise ConfigError("m_factor must be >= 2 (deadline m = m_factor * n)")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if any(dn < 3 for dn in self.delta_n_list):
            raise ConfigError("delta_n_list entries must be >= 3")
        if self.block_detectors and any(dn % 24 for dn in self.delta_n_list):
            raise ConfigError("block detectors need every delta_n divisible by 24")
        if any(th <= 0 for th in self.theta_grid):
            raise ConfigError("theta_grid entries must be positive")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.c0_prime <= 0:
            raise ConfigError("c0_prime must be positive")
        if self.n_star < 1:
            raise ConfigError("n_star must be >= 1")
        if self.solver_method not in SOLVER_METHODS:
            raise ConfigError(f"solver_method must be one of {SOLVER_METHODS}")
        if self.solver_rtol <= 0:
            raise ConfigError("solver_rtol must be positive")
        law = self.step_law()
        if self.offset:
            object.__setattr__(self, "offset", tuple(int(c) for c in self.offset))
            if len(self.offset) != law.dim:
                raise ConfigError(
                    f"offset has {len(self.offset)} coordinates, walk has dim {law.dim}"
                )
            if self.delta_n_list:
                # keep the planted separation inside the diffusive window
                reach = math.sqrt(min(self.delta_n_list))
                r = float(covariance_norm(law, np.asarray(self.offset)))
                if r > reach + 1e-9:
                    raise ConfigError(
                        f"offset norm {r:.3f} exceeds sqrt(min delta_n) = {reach:.3f}"
                    )
        for x in self.gamma_x:
            if len(x) != law.dim:
                raise ConfigError(
                    f"gamma_x entry {x} has {len(x)} coordinates, walk has dim {law.dim}"
                )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update(changes)
        return ExperimentConfig.from_dict(data)

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, tuple):
                return [plain(c) for c in v]
            return v

        return {f.name: plain(getattr(self, f.name)) for f in fields(self)}

    def sha256(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def progeny_law(self) -> ProgenyLaw:
        if isinstance(self.progeny, str):
            return PROGENY_PRESETS[self.progeny]
        return ProgenyLaw(self.progeny)

    def step_law(self) -> StepLaw:
        return step_preset(self.step if self.step else f"srw_d{self.dim}")

    def m_for(self, n: int) -> int:
        return self.m_factor * n


def replicate_rng(seed: int, stage: int, *unit: int) -> np.random.Generator:
    """Independent generator for one replicate of one scan unit.

    The entropy tuple (seed, stage, *unit) feeds a SeedSequence, so
    streams never depend on scheduling and adding replicates never
    shifts existing ones.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, stage) + unit))


def _run_replicates(fn, args, threads: int) -> list:
    """Apply fn over args, preserving order; threads only add concurrency."""
    if threads <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args))


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


# ---------------------------------------------------------------------------
# Row types
# ---------------------------------------------------------------------------


RESISTANCE_COLUMNS = ("n", "replicates", "failures", "mean_r", "se_r", "mean_nw", "wall_time")


@dataclass(frozen=True)
class ScanRow:
    """One resistance-scan aggregate. replicates counts successful solves;
    failures were configured but excluded (and reported, never hidden)."""

    n: int
    replicates: int
    failures: int
    mean_r: float
    se_r: float
    mean_nw: float
    wall_time: float | None = None

    def __post_init__(self) -> None:
        if self.replicates < 0 or self.failures < 0:
            raise ValueError("negative replicate accounting")
        if self.replicates > 0:
            if not self.se_r >= 0.0:
                raise ValueError(f"se_r must be >= 0, got {self.se_r!r}")
            if not self.mean_nw <= self.mean_r * (1 + 1e-8) + 1e-9:
                raise ValueError(
                    f"cutset bound {self.mean_nw!r} exceeds resistance {self.mean_r!r}"
                )

    def csv_values(self) -> list:
        return [self.n, self.replicates, self.failures, self.mean_r, self.se_r,
                self.mean_nw, self.wall_time]


GAMMA_COLUMNS = ("n", "x", "norm_x", "regime", "regime_bracket", "replicates",
                 "failures", "mean_gamma", "se_gamma", "wall_time")


@dataclass(frozen=True)
class GammaRow:
    """Mean root-to-top resistance for one (n, endpoint) pair under the
    conditioned embedding, with the displacement regime recorded (the
    shape comparison stays descriptive; nothing is asserted about it)."""

    n: int
    x: tuple[int, ...]
    norm_x: float
    regime: str
    regime_bracket: float | None
    replicates: int
    failures: int
    mean_gamma: float
    se_gamma: float
    wall_time: float | None = None

    def __post_init__(self) -> None:
        if self.replicates > 0:
            if not self.se_gamma >= 0.0:
                raise ValueError(f"se_gamma must be >= 0, got {self.se_gamma!r}")
            if not self.mean_gamma <= self.n * (1 + 1e-8) + 1e-9:
                raise ValueError(
                    f"mean resistance {self.mean_gamma!r} exceeds backbone length {self.n}"
                )

    def csv_values(self) -> list:
        return [self.n, " ".join(str(c) for c in self.x), self.norm_x, self.regime,
                self.regime_bracket, self.replicates, self.failures,
                self.mean_gamma, self.se_gamma, self.wall_time]


def intersection_columns(theta_grid: Sequence[float]) -> tuple[str, ...]:
    thetas = tuple(f"p_ge_{th:g}" for th in theta_grid)
    return ("delta_n", "replicates", "mean_count", "se_count", "mean_sq", "se_sq",
            "p_positive", "pz_lower") + thetas + ("mean_extra", "primed_pairs", "wall_time")


@dataclass(frozen=True)
class IntersectionRow:
    """Collision moments for one delta_n: first and second moments of the
    pair count, tail frequencies against theta * log(delta_n), and the
    second-moment lower bound on P(count > 0) with a 5-sigma margin."""

    delta_n: int
    replicates: int
    mean_count: float
    se_count: float
    mean_sq: float
    se_sq: float
    p_positive: float
    pz_lower: float
    p_theta: tuple[float, ...]
    mean_extra: float
    primed_pairs: int
    wall_time: float | None = None

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("intersection rows require at least one replicate")
        if not 0.0 <= self.p_positive <= 1.0:
            raise ValueError(f"p_positive {self.p_positive!r} outside [0, 1]")
        if self.se_count < 0 or self.se_sq < 0:
            raise ValueError("standard errors must be >= 0")

    def csv_values(self) -> list:
        return [self.delta_n, self.replicates, self.mean_count, self.se_count,
                self.mean_sq, self.se_sq, self.p_positive, self.pz_lower,
                *self.p_theta, self.mean_extra, self.primed_pairs, self.wall_time]


@dataclass(frozen=True)
class FitReport:
    model: str
    amplitude: float
    exponent: float
    exponent_se: float
    residual_rms: float
    rows_used: int

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "exponent_se": self.exponent_se,
            "residual_rms": self.residual_rms,
            "rows_used": self.rows_used,
        }


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _git_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(config: ExperimentConfig, columns: Sequence[str], rows) -> str:
    """CSV text with the metadata block. No timestamps anywhere, so equal
    (config, seed, code) runs produce equal bytes."""
    lines = [
        f"# schema={SCHEMA_VERSION}",
        f"# config_sha256={config.sha256()}",
        f"# seed={config.seed}",
        f"# git_rev={_git_revision()}",
        ",".join(columns),
    ]
    for row in rows:
        values = row.csv_values() if hasattr(row, "csv_values") else list(row)
        if len(values) != len(columns):
            raise ValueError(f"row width {len(values)} != header width {len(columns)}")
        lines.append(",".join(_fmt(v) for v in values))
    return "\n".join(lines) + "\n"


def write_csv(path: str, config: ExperimentConfig, columns: Sequence[str], rows) -> None:
    text = render_csv(config, columns, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_scan_csv(path: str) -> tuple[dict, list[dict]]:
    """Parse a scan CSV back into (metadata, row dicts with floats)."""
    meta: dict[str, str] = {}
    rows: list[dict] = []
    columns: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                continue
            cells = line.split(",")
            if columns is None:
                columns = cells
                continue
            row: dict = {}
            for name, cell in zip(columns, cells):
                if cell == "":
                    row[name] = None
                    continue
                try:
                    row[name] = int(cell)
                except ValueError:
                    try:
                        row[name] = float(cell)
                    except ValueError:
                        row[name] = cell
            rows.append(row)
    if columns is None:
        raise ValueError(f"{path} has no header row")
    return meta, rows


def write_jsonl(path: str, records) -> None:
    """One JSON object per line; records supply to_json() or are dicts."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for rec in records:
            obj = rec.to_json() if hasattr(rec, "to_json") else rec
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def _telemetry(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------


def scan_resistance(config: ExperimentConfig, csv_path: str | None = None) -> list[ScanRow]:
    """Mean root-to-level resistance with the cutset lower bound, per n.

    Each replicate samples a fresh conditioned tree, embeds it, and
    solves; solver failures are counted into the failures column and
    excluded from the means.
    """
    if not config.n_list:
        raise ConfigError("scan_resistance needs a non-empty n_list")
    p = config.progeny_law()
    law = config.step_law()
    rows: list[ScanRow] = []
    for n in config.n_list:
        m = config.m_for(n)
        t0 = time.perf_counter()

        def one(rep: int, n=n, m=m):
            rng = replicate_rng(config.seed, STAGE_RESISTANCE, n, rep)
            tree = sample_backbone_tree(p, n, m, rng)
            graph = embed(tree, law, rng)
            try:
                r = resistance_to_level(graph, n, method=config.solver_method).value
                nw = nash_williams_lower(graph, n)
            except (SolverError, DisconnectedError):
                return None
            return r, nw

        results = _run_replicates(one, range(config.replicates), config.threads)
        kept = [res for res in results if res is not None]
        failures = config.replicates - len(kept)
        mean_r, se_r = _mean_se([r for r, _ in kept])
        mean_nw, _ = _mean_se([nw for _, nw in kept])
        wall = time.perf_counter() - t0
        rows.append(
            ScanRow(
                n=n,
                replicates=len(kept),
                failures=failures,
                mean_r=mean_r,
                se_r=se_r,
                mean_nw=mean_nw,
                wall_time=wall if config.timing else None,
            )
        )
        _telemetry(
            f"[scan-r] n={n} replicates={len(kept)} failures={failures} "
            f"mean_r={mean_r:.4f} ({wall:.1f}s)"
        )
    if csv_path is not None:
        write_csv(csv_path, config, RESISTANCE_COLUMNS, rows)
    return rows


def _regime(law: StepLaw, x, n: int) -> tuple[float, str, float | None]:
    """Displacement regime of an endpoint: within one diffusive width, the
    intermediate band up to n/2, or beyond. The bracket records the
    log-correction factor base 1 - log(|x|^2 / n) / log(n) for the middle
    band, where the predicted bound interpolates."""
    r = float(covariance_norm(law, np.asarray(x, dtype=np.int64)))
    if r <= math.sqrt(n):
        return r, "diffusive", None
    if r <= n / 2:
        return r, "intermediate", 1.0 - math.log(r * r / n) / math.log(n)
    return r, "far", None


def scan_gamma(
    config: ExperimentConfig,
    x_list: Sequence[Sequence[int]] | None = None,
    csv_path: str | None = None,
) -> list[GammaRow]:
    """Mean root-to-top resistance conditioned on the backbone endpoint.

    The backbone is embedded as an exact walk bridge to (x, n); side
    edges keep the free step law. Unreachable endpoints raise before any
    sampling starts.
    """
    if not config.n_list:
        raise ConfigError("scan_gamma needs a non-empty n_list")
    xs = [tuple(int(c) for c in x) for x in (x_list if x_list is not None else config.gamma_x)]
    if not xs:
        raise ConfigError("scan_gamma needs endpoints (gamma_x or x_list)")
    p = config.progeny_law()
    law = config.step_law()
    for x in xs:
        if len(x) != law.dim:
            raise ConfigError(f"endpoint {x} has wrong dimension for the walk")
    for n in config.n_list:
        for x in xs:
            # exact support probe; also warms the bridge's pmf cache
            sample_bridge(law, n, np.asarray(x, dtype=np.int64), np.random.default_rng(0))
    rows: list[GammaRow] = []
    for n in config.n_list:
        m = config.m_for(n)
        for xi, x in enumerate(xs):
            t0 = time.perf_counter()

            def one(rep: int, n=n, m=m, x=x, xi=xi):
                rng = replicate_rng(config.seed, STAGE_GAMMA, n, xi, rep)
                tree = sample_backbone_tree(p, n, m, rng)
                try:
                    graph = embed_bridge(tree, law, np.asarray(x, dtype=np.int64), rng)
                    r = effective_resistance(
                        graph,
                        graph.root_point,
                        graph.point_of_vertex(n),
                        method=config.solver_method,
                    ).value
                except (SolverError, DisconnectedError, UnreachableError):
                    return None
                return r

            results = _run_replicates(one, range(config.replicates), config.threads)
            kept = [r for r in results if r is not None]
            mean_g, se_g = _mean_se(kept)
            norm_x, regime, bracket = _regime(law, x, n)
            wall = time.perf_counter() - t0
            rows.append(
                GammaRow(
                    n=n,
                    x=x,
                    norm_x=norm_x,
                    regime=regime,
                    regime_bracket=bracket,
                    replicates=len(kept),
                    failures=config.replicates - len(kept),
                    mean_gamma=mean_g,
                    se_gamma=se_g,
                    wall_time=(wall if config.timing else None),
                )
            )
            _telemetry(
                f"[scan-gamma] n={n} x={x} regime={regime} "
                f"mean={mean_g:.4f} ({wall:.1f}s)"
            )
    if csv_path is not None:
        write_csv(csv_path, config, GAMMA_COLUMNS, rows)
    return rows


def scan_intersections(
    config: ExperimentConfig,
    csv_path: str | None = None,
    jsonl_path: str | None = None,
) -> list[IntersectionRow]:
    """Two-tree collision moments per delta_n.

    Counts are integers, so the sums below are exact and independent of
    accumulation order. pz_lower is the second-moment bound mean^2 /
    mean-of-squares minus five combined standard errors (delta method on
    the ratio, binomial on the positive fraction); P(count > 0) should
    sit above it whenever the bound itself holds.
    """
    if not config.delta_n_list:
        raise ConfigError("scan_intersections needs a non-empty delta_n_list")
    p = config.progeny_law()
    law = config.step_law()
    off = np.asarray(config.offset if config.offset else (0,) * law.dim, dtype=np.int64)
    thetas = config.theta_grid
    rows: list[IntersectionRow] = []
    jsonl_records: list[dict] = []
    for dn in config.delta_n_list:
        t0 = time.perf_counter()
        log_dn = math.log(dn)

        def one(rep: int, dn=dn):
            rng = replicate_rng(config.seed, STAGE_INTERSECTIONS, dn, rep)
            res = two_tree_experiment(p, law, dn, off, rng, records="primed")
            extra = sum(
                extra_intersections(res, pair, n_star=config.n_star)
                for pair in res.records
            )
            return res.count, len(res.records), extra

        results = _run_replicates(one, range(config.replicates), config.threads)
        nrep = len(results)
        s1 = s2 = s3 = s4 = 0
        positives = 0
        tails = [0] * len(thetas)
        primed_pairs = 0
        extra_total = 0
        for count, pairs, extra in results:
            s1 += count
            s2 += count * count
            s3 += count**3
            s4 += count**4
            positives += 1 if count > 0 else 0
            for j, th in enumerate(thetas):
                tails[j] += 1 if count >= th * log_dn else 0
            primed_pairs += pairs
            extra_total += extra
        m1 = s1 / nrep
        m2 = s2 / nrep
        m3 = s3 / nrep
        m4 = s4 / nrep
        var_c = max(0.0, (s2 - nrep * m1 * m1) / max(nrep - 1, 1))
        var_sq = max(0.0, (s4 - nrep * m2 * m2) / max(nrep - 1, 1))
        p_pos = positives / nrep
        if m2 > 0:
            rhs = m1 * m1 / m2
            g1, g2 = 2 * m1 / m2, -(m1 * m1) / (m2 * m2)
            c11 = (m2 - m1 * m1) / nrep
            c22 = (m4 - m2 * m2) / nrep
            c12 = (m3 - m1 * m2) / nrep
            var_rhs = max(0.0, g1 * g1 * c11 + 2 * g1 * g2 * c12 + g2 * g2 * c22)
            se_p = math.sqrt(p_pos * (1 - p_pos) / nrep)
            pz_lower = rhs - 5.0 * math.hypot(se_p, math.sqrt(var_rhs))
        else:
            pz_lower = 0.0
        wall = time.perf_counter() - t0
        rows.append(
            IntersectionRow(
                delta_n=dn,
                replicates=nrep,
                mean_count=m1,
                se_count=math.sqrt(var_c / nrep),
                mean_sq=m2,
                se_sq=math.sqrt(var_sq / nrep),
                p_positive=p_pos,
                pz_lower=pz_lower,
                p_theta=tuple(t / nrep for t in tails),
                mean_extra=(extra_total / primed_pairs if primed_pairs else 0.0),
                primed_pairs=primed_pairs,
                wall_time=(wall if config.timing else None),
            )
        )
        if jsonl_path is not None:
            for rep, (count, pairs, extra) in enumerate(results):
                jsonl_records.append(
                    {"delta_n": dn, "replicate": rep, "count": count,
                     "primed_pairs": pairs, "extra": extra}
                )
        _telemetry(
            f"[scan-i] delta_n={dn} mean={m1:.4f} mean_sq={m2:.4f} "
            f"p_pos={p_pos:.4f} ({wall:.1f}s)"
        )
    if csv_path is not None:
        write_csv(csv_path, config, intersection_columns(thetas), rows)
    if jsonl_path is not None:
        write_jsonl(jsonl_path, jsonl_records)
    return rows


# ---------------------------------------------------------------------------
# Exponent fits
# ---------------------------------------------------------------------------


def _fit_rows(rows) -> tuple[np.ndarray, np.ndarray]:
    ns, rs = [], []
    for row in rows:
        if isinstance(row, ScanRow):
            n, r = row.n, row.mean_r
        elif isinstance(row, dict):
            n, r = row["n"], row["mean_r"]
        else:
            n, r = row[0], row[1]
        ns.append(float(n))
        rs.append(float(r))
    return np.asarray(ns), np.asarray(rs)


def fit_exponent(rows, model: str = "power") -> FitReport:
    """Least-squares exponent fit over scan rows.

    power: R = a * n^e, regressing log R on log n. log-correction:
    R = a * n / (log n)^e, regressing log(R / n) on log log n. Standard
    errors come from the usual linear-model covariance.
    """
    if model not in ("power", "log-correction"):
        raise ValueError(f"model must be 'power' or 'log-correction', got {model!r}")
    ns, rs = _fit_rows(rows)
    if len(ns) < 4:
        raise ValueError(f"need at least 4 rows to fit, got {len(ns)}")
    if np.any(rs <= 0):
        raise ValueError("resistance values must be positive to fit on a log scale")
    if model == "power":
        if np.any(ns < 1):
            raise ValueError("power fit needs n >= 1")
        predictor = np.log(ns)
        y = np.log(rs)
        sign = 1.0
    else:
        if np.any(ns < 2):
            raise ValueError("log-correction fit needs n >= 2")
        predictor = np.log(np.log(ns))
        y = np.log(rs / ns)
        sign = -1.0
    x_mat = np.column_stack([np.ones_like(predictor), predictor])
    if np.linalg.matrix_rank(x_mat) < 2:
        raise ValueError("degenerate design matrix: predictor values coincide")
    coef, _, _, _ = np.linalg.lstsq(x_mat, y, rcond=None)
    resid = y - x_mat @ coef
    rss = float(resid @ resid)
    dof = len(ns) - 2
    cov = rss / dof * np.linalg.inv(x_mat.T @ x_mat) if dof > 0 else np.zeros((2, 2))
    return FitReport(
        model=model,
        amplitude=float(np.exp(coef[0])),
        exponent=float(sign * coef[1]),
        exponent_se=float(np.sqrt(max(cov[1, 1], 0.0))),
        residual_rms=math.sqrt(rss / len(ns)),
        rows_used=len(ns),
    )


# ---------------------------------------------------------------------------
# Dominance experiment (shared by the check suite and heavier tests)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominanceResult:
    """One-sided CDF comparison of side-tree sizes: trees conditioned to
    reach a height against the plain deadline-conditioned law. gap is
    max_x (F_reaching - F_plain); stochastic dominance predicts it stays
    within the two-sample DKW band."""

    gap: float
    band: float
    n_per_arm: int
    accept_rate: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.band


def dominance_experiment(
    p: ProgenyLaw,
    deadline: int,
    reach: int,
    n_per_arm: int,
    rng: np.random.Generator,
    alpha: float = 0.001,
) -> DominanceResult:
    """Sample both arms and compare size CDFs one-sidedly.

    Both arms use the side-tree law (size-biased first generation, body
    below, extinct by the deadline); the reaching arm keeps only trees
    whose height reaches `reach`. Arms are disjoint batches, so the DKW
    band for independent samples applies: eps = sqrt(log(1/alpha) / 2N)
    per arm, added.
    """
    if not 0 < reach < deadline:
        raise ValueError("need 0 < reach < deadline")
    first = size_bias(p)
    batch = max(4 * n_per_arm, 1000)
    plain: np.ndarray | None = None
    reaching: list[np.ndarray] = []
    got = 0
    drawn = 0
    while got < n_per_arm:
        parent, height, tree_id = sample_gw_forest(first, p, deadline, batch, rng)
        sizes = np.bincount(tree_id, minlength=batch) + 1
        hmax = np.zeros(batch, dtype=np.int64)
        np.maximum.at(hmax, tree_id, height)
        if plain is None:
            plain = sizes[:n_per_arm]
            sizes, hmax = sizes[n_per_arm:], hmax[n_per_arm:]
            drawn -= n_per_arm
        kept = sizes[hmax >= reach][: n_per_arm - got]
        reaching.append(kept)
        got += len(kept)
        drawn += batch
        if drawn > 500 * n_per_arm + batch:
            raise RuntimeError(
                f"reaching height {reach} is too rare under this law "
                f"({got} hits in {drawn} draws)"
            )
    cond = np.concatenate(reaching)
    assert plain is not None and len(plain) == n_per_arm and len(cond) == n_per_arm
    support = np.unique(np.concatenate([plain, cond]))
    f_plain = np.searchsorted(np.sort(plain), support, side="right") / n_per_arm
    f_cond = np.searchsorted(np.sort(cond), support, side="right") / n_per_arm
    gap = float(np.max(f_cond - f_plain))
    eps = math.sqrt(math.log(1.0 / alpha) / (2 * n_per_arm))
    accept = got / max(drawn, 1)
    return DominanceResult(gap=gap, band=2 * eps, n_per_arm=n_per_arm, accept_rate=accept)


# ---------------------------------------------------------------------------
# Check suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def __post_init__(self) -> None:
        # numpy scalars sneak in through comparisons; keep JSON clean
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "threshold", float(self.threshold))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class CheckSuiteReport:
    config_sha256: str
    seed: int
    fault: str | None
    checks: tuple[CheckResult, ...] = field(default=())

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "fault": self.fault,
            "all_pass": self.all_pass,
            "checks": [c.to_json() for c in self.checks],
        }


def _random_network(rng: np.random.Generator, spine: bool) -> Network:
    nn = int(rng.integers(4, 12))
    extra = rng.integers(0, nn, size=(int(rng.integers(nn, 3 * nn)), 2))
    pairs = extra[extra[:, 0] != extra[:, 1]]
    if spine:
        chain = np.column_stack([np.arange(nn - 1), np.arange(1, nn)])
        pairs = np.vstack([chain, pairs])
    return Network.from_edge_pairs(nn, pairs)


def _check_step_symmetry(config: ExperimentConfig, fault: str | None) -> CheckResult:
    law = config.step_law()
    support, probs = law.support, law.probs
    if fault == "asymmetric_step":
        support, probs = ((1,), (2,)), (0.5, 0.5)
    table = {pt: pr for pt, pr in zip(support, probs)}
    value = max(
        abs(pr - table.get(tuple(-c for c in pt), 0.0)) for pt, pr in table.items()
    )
    detail = ""
    try:
        StepLaw(support, probs)
        loaded = True
    except ValueError as exc:
        loaded = False
        detail = f"rejected at load: {exc}"
    threshold = 1e-12
    return CheckResult(
        name="step_law_symmetry",
        passed=loaded and value <= threshold,
        value=value,
        threshold=threshold,
        detail=detail,
    )


def _check_extinction(config: ExperimentConfig, rng: np.random.Generator) -> CheckResult:
    p = config.progeny_law()
    horizon = 6
    q = extinction_probs(p, horizon)
    n_trees = 40_000
    _, height, tree_id = sample_gw_forest(p, p, None, n_trees, rng, max_height=horizon)
    alive = len(np.unique(tree_id[height == horizon]))
    frac = 1.0 - alive / n_trees
    se = math.sqrt(max(q[horizon] * (1 - q[horizon]), 1e-12) / n_trees)
    z = abs(frac - q[horizon]) / se
    return CheckResult(
        name="extinction_recursion",
        passed=z <= 4.0,
        value=z,
        threshold=4.0,
        detail=f"q[{horizon}]={q[horizon]:.6f} observed={frac:.6f}",
    )


def _check_msd(config: ExperimentConfig, rng: np.random.Generator) -> CheckResult:
    law = config.step_law()
    n, reps = 50, 20_000
    v = norm_sq(law, sample_endpoints(law, n, rng, reps))
    se = float(v.std(ddof=1) / math.sqrt(reps))
    z = abs(float(v.mean()) - n) / se
    return CheckResult(
        name="mean_square_displacement",
        passed=z <= 4.0,
        value=z,
        threshold=4.0,
        detail=f"mean={v.mean():.3f} target={n}",
    )


def _check_lclt(config: ExperimentConfig) -> CheckResult:
    # calibration cases for the local-limit ratio; the displacement range
    # is one diffusive width, where the Gaussian approximation is tight
    n = 400
    worst = 0.0
    for d in (1, 2):
        law = step_preset(f"srw_d{d}")
        radius = int(math.isqrt(n))
        grid = np.arange(-radius, radius + 1)
        pts = (
            grid[:, None]
            if d == 1
            else np.stack(np.meshgrid(grid, grid), axis=-1).reshape(-1, 2)
        )
        for y in pts:
            if float(norm_sq(law, y)) > n or not law.reachable(y, n):
                continue
            comp = lclt_compare(law, n, y)
            worst = max(worst, abs(comp.ratio - 1.0))
    return CheckResult(
        name="lclt_ratio",
        passed=worst <= 0.15,
        value=worst,
        threshold=0.15,
        detail="simple walk, d in {1, 2}, n=400",
    )


def _check_parallel(rng: np.random.Generator) -> CheckResult:
    worst = -math.inf
    detail = ""
    passed = True
    for _ in range(50):
        g1 = _random_network(rng, spine=True)
        g2 = Network(
            g1.num_nodes,
            rng.integers(0, g1.num_nodes - 1, size=g1.num_nodes),
            np.full(g1.num_nodes, g1.num_nodes - 1),
            rng.uniform(0.5, 2.0, size=g1.num_nodes),
        )
        try:
            r, r1, r2 = check_parallel_law(g1, g2, 0, g1.num_nodes - 1)
        except AssertionError as exc:
            passed = False
            detail = f"violated: {exc}"
            worst = math.inf
            break
        inv = (0.0 if math.isinf(r1) else 1 / r1) + (0.0 if math.isinf(r2) else 1 / r2)
        harmonic = math.inf if inv == 0 else 1 / inv
        if not math.isinf(harmonic):
            worst = max(worst, r - harmonic)
    return CheckResult(
        name="parallel_law",
        passed=passed and worst <= 1e-9,
        value=worst,
        threshold=1e-9,
        detail=detail,
    )


def _check_triangle(rng: np.random.Generator) -> CheckResult:
    worst = -math.inf
    detail = ""
    passed = True
    for _ in range(50):
        net = _random_network(rng, spine=True)
        x, y, z = rng.choice(net.num_nodes, size=3, replace=False)
        try:
            _, r_xz, r_xy, r_yz = check_triangle(net, int(x), int(y), int(z))
        except AssertionError as exc:
            passed = False
            detail = f"violated: {exc}"
            worst = math.inf
            break
        worst = max(worst, r_xz - r_xy - r_yz)
    return CheckResult(
        name="triangle_inequality",
        passed=passed and worst <= 1e-9,
        value=worst,
        threshold=1e-9,
        detail=detail,
    )


def _check_dominance(config: ExperimentConfig, rng: np.random.Generator) -> CheckResult:
    p = config.progeny_law()
    if p.sigma_sq == 0.0:
        return CheckResult(
            name="conditioned_size_dominance",
            passed=True,
            value=0.0,
            threshold=0.0,
            detail="deterministic progeny; dominance is vacuous",
        )
    try:
        result = dominance_experiment(p, deadline=180, reach=36, n_per_arm=1500, rng=rng)
    except (ConditioningError, RuntimeError) as exc:
        return CheckResult(
            name="conditioned_size_dominance",
            passed=False,
            value=math.inf,
            threshold=0.0,
            detail=str(exc),
        )
    return CheckResult(
        name="conditioned_size_dominance",
        passed=result.holds,
        value=result.gap,
        threshold=result.band,
        detail=f"accept_rate={result.accept_rate:.4f}",
    )


def _check_solver(config: ExperimentConfig, rng: np.random.Generator, fault: str | None) -> CheckResult:
    worst = 0.0
    for _ in range(30):
        net = _random_network(rng, spine=True)
        a, b = 0, net.num_nodes - 1
        fast = effective_resistance(net, a, b, method="cg").value
        if fault == "solver_residual":
            fast *= 1.0 + 1e-2
        ref = effective_resistance(net, a, b, method="pinv").value
        worst = max(worst, abs(fast - ref) / max(ref, 1e-30))
    return CheckResult(
        name="solver_oracle",
        passed=worst <= config.solver_rtol,
        value=worst,
        threshold=config.solver_rtol,
        detail="conjugate gradient against dense pseudoinverse",
    )


def check_suite(config: ExperimentConfig, fault: str | None = None) -> CheckSuiteReport:
    """Run the invariant checks and return a machine-readable report.

    fault injects a known defect to prove the corresponding check has
    teeth: 'solver_residual' perturbs the fast solver's answer by 1e-2,
    'asymmetric_step' swaps in a step law whose mirror masses differ.
    """
    if fault is not None and fault not in FAULT_MODES:
        raise ValueError(f"fault must be None or one of {FAULT_MODES}")
    checks = [
        _check_step_symmetry(config, fault),
        _check_extinction(config, replicate_rng(config.seed, STAGE_CHECKS, 1)),
        _check_msd(config, replicate_rng(config.seed, STAGE_CHECKS, 2)),
        _check_lclt(config),
        _check_parallel(replicate_rng(config.seed, STAGE_CHECKS, 4)),
        _check_triangle(replicate_rng(config.seed, STAGE_CHECKS, 5)),
        _check_dominance(config, replicate_rng(config.seed, STAGE_CHECKS, 6)),
        _check_solver(config, replicate_rng(config.seed, STAGE_CHECKS, 7), fault),
    ]
    for c in checks:
        _telemetry(
            f"[check] {'PASS' if c.passed else 'FAIL'} {c.name} "
            f"value={c.value:.6g} threshold={c.threshold:.6g}"
        )
    return CheckSuiteReport(
        config_sha256=config.sha256(),
        seed=config.seed,
        fault=fault,
        checks=tuple(checks),
    )
