"""Run configuration: flat ``key = value`` text with ``#`` comments.

Dotted keys group settings (problem.*, time.*, rom.*, svd.*, paths.*).
Parameter points are comma-separated component lists in the order given by
``problems.PARAM_NAMES[kind]``; multiple points are separated by
semicolons or whitespace, e.g. ``samples = 0.5; 1.0; 2.0``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

from .problems import PARAM_NAMES, PROBLEM_KINDS, ProblemSpec


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem_kind: str = "heat1d"
    problem_nx: int = 32
    problem_ny: int = 8
    problem_n_dir: int = 4
    problem_kappa: float = 1.0
    problem_vx: float = 1.0
    problem_vy: float = 0.5
    problem_sigma_t: float = 1.0
    problem_sigma_s: float = 0.5
    problem_speed: float = 1.0
    problem_source: float = 1.0
    time_dt: float = 0.01
    time_nt: int = 50
    samples: list = field(default_factory=lambda: [[0.5], [1.0], [2.0]])
    test_params: list = field(default_factory=lambda: [[1.3]])
    rom_ns: int = 4
    rom_nt: int = 2
    svd_tol: float = 2e-8
    svd_sv_tol: float = 1e-14
    svd_max_rank: int = 0  # 0 means uncapped
    svd_cap_mode: str = "restart"
    ref_mode: str = "initial_state"
    run_fom: bool = True
    train_save_snapshots: bool = False
    paths_snapshots: str = "snapshots"
    paths_bases: str = "bases"
    paths_reports: str = "reports"
    seed: int = 0

    def validate(self) -> None:
        if self.problem_kind not in PROBLEM_KINDS:
            raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}")
        if self.rom_ns < 1:
            raise ConfigError("rom.ns must be at least 1")
        if not self.samples:
            raise ConfigError("need at least one training sample")
        ceiling = min(self.time_nt, len(self.samples))
        if not 1 <= self.rom_nt <= ceiling:
            raise ConfigError(
                f"rom.nt must lie in [1, min(time.nt, #samples)] = [1, {ceiling}]"
            )
        if self.svd_tol <= 0.0:
            raise ConfigError("svd.tol must be positive")
        if self.time_dt <= 0.0 or self.time_nt < 1:
            raise ConfigError("time.dt must be positive and time.nt >= 1")
        n_names = len(PARAM_NAMES[self.problem_kind])
        for point in list(self.samples) + list(self.test_params):
            if not 1 <= len(point) <= n_names:
                raise ConfigError(
                    f"parameter point {point} has wrong arity for {self.problem_kind} "
                    f"(expects up to {n_names} components)"
                )

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            kind=self.problem_kind,
            nx=self.problem_nx,
            ny=self.problem_ny,
            n_dir=self.problem_n_dir,
            kappa=self.problem_kappa,
            vx=self.problem_vx,
            vy=self.problem_vy,
            sigma_t=self.problem_sigma_t,
            sigma_s=self.problem_sigma_s,
            speed=self.problem_speed,
            source=self.problem_source,
        )

    def param_point(self, components) -> dict:
        names = PARAM_NAMES[self.problem_kind]
        return {name: float(v) for name, v in zip(names, components)}


_KEY_TO_FIELD = {
    "problem.kind": "problem_kind",
    "problem.nx": "problem_nx",
    "problem.ny": "problem_ny",
    "problem.ndir": "problem_n_dir",
    "problem.kappa": "problem_kappa",
    "problem.vx": "problem_vx",
    "problem.vy": "problem_vy",
    "problem.sigma_t": "problem_sigma_t",
    "problem.sigma_s": "problem_sigma_s",
    "problem.speed": "problem_speed",
    "problem.source": "problem_source",
    "time.dt": "time_dt",
    "time.nt": "time_nt",
    "samples": "samples",
    "test_params": "test_params",
    "rom.ns": "rom_ns",
    "rom.nt": "rom_nt",
    "svd.tol": "svd_tol",
    "svd.sv_tol": "svd_sv_tol",
    "svd.max_rank": "svd_max_rank",
    "svd.cap_mode": "svd_cap_mode",
    "ref_mode": "ref_mode",
    "run.fom": "run_fom",
    "train.save_snapshots": "train_save_snapshots",
    "paths.snapshots": "paths_snapshots",
    "paths.bases": "paths_bases",
    "paths.reports": "paths_reports",
    "seed": "seed",
}


def parse_param_list(text: str) -> list:
    """Parse ``0.5,1.0; 2.0,0.3`` (or whitespace-separated) into point lists."""
    points = []
    for chunk in re.split(r"[;\s]+", text.strip()):
        if not chunk:
            continue
        points.append([float(v) for v in chunk.split(",") if v])
    return points


def _coerce(value: str, target):
    if isinstance(target, bool):
        low = value.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(target, int):
        return int(value)
    if isinstance(target, float):
        return float(value)
    if isinstance(target, list):
        return parse_param_list(value)
    return value.strip()


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        attr = _KEY_TO_FIELD.get(key)
        if attr is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        current = getattr(cfg, attr)
        try:
            setattr(cfg, attr, _coerce(value, current))
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_summary(cfg: RunConfig) -> list[tuple[str, str]]:
    """Config as (dotted key, rendered value) pairs, for reports."""
    reverse = {v: k for k, v in _KEY_TO_FIELD.items()}
    out = []
    for f in fields(cfg):
        key = reverse[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            rendered = "; ".join(",".join(str(c) for c in point) for point in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        out.append((key, rendered))
    return out
