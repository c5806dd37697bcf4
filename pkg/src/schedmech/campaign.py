"""Seeded simulation campaigns with CSV/JSON report emission.

A campaign samples ``trials`` fresh instances, runs the configured
mechanism on each (payments skipped; they do not affect the schedule), and
aggregates makespans together with an optional ratio against a first-best
reference bound.  Determinism is absolute: every trial derives its own seed
from ``(master_seed, stream, trial_index)``, so results are byte-identical
for a given configuration regardless of the thread count.

Report layout (CSV): `#`-prefixed header lines carry the configuration
echo, a version string and the aggregate statistics; then one row per trial
with columns ``trial,makespan,total_work,max_load,stage1_makespan,
stage2_makespan,greedy_first_best,seed`` (empty fields where a column does
not apply).  The JSON format mirrors the same fields.
"""

from __future__ import annotations

import importlib.metadata
import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .assignment import UNSCHEDULED, first_best_makespan_greedy
from .distributions import DistributionSpec
from .instances import Instance, sample_instance
from .mechanisms import (
    MechanismConfig,
    derive_reserve,
    overload_cap,
    partition_sizes,
    run_mechanism,
)
from .optbounds import OptEstimate, opt_reference, reduced_machine_count

__all__ = [
    "REFERENCES",
    "REPORT_COLUMNS",
    "ExperimentConfig",
    "ReportRow",
    "CampaignResult",
    "InvariantViolation",
    "run_campaign",
    "emit_report",
    "parse_report",
    "version_string",
    "derive_trial_seed",
]

REFERENCES = ("none", "opt-half", "opt-third", "opt-delta-half")
REPORT_COLUMNS = (
    "trial",
    "makespan",
    "total_work",
    "max_load",
    "stage1_makespan",
    "stage2_makespan",
    "greedy_first_best",
    "seed",
)

_TRIAL_STREAM = 0
_REFERENCE_STREAM = 1

# Structural slack when asserting makespan >= the largest scheduled runtime.
_INVARIANT_TOL = 1e-9


class InvariantViolation(AssertionError):
    """A per-trial structural invariant failed (load cap, makespan floor)."""


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: MechanismConfig
    dist: DistributionSpec | tuple[DistributionSpec, ...]
    n: int
    m: int
    trials: int
    master_seed: int
    reference: str = "none"
    paired: bool = False
    threads: int = 0  # 0 = use all cores

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        if self.trials < 1:
            raise ValueError("need trials >= 1")
        if self.master_seed < 0:
            raise ValueError("master seed must be a nonnegative integer")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown reference {self.reference!r}")
        if isinstance(self.dist, tuple) and len(self.dist) != self.n:
            raise ValueError("per-job spec list must have length n")
        if self.mechanism.uses_reserve and isinstance(self.dist, tuple):
            if any(s is not self.dist[0] for s in self.dist):
                raise ValueError(
                    "sieve-based mechanisms require identically distributed jobs"
                )
        delta = self.reference_delta
        if delta is not None and delta * self.m < 1.0 - 1e-12:
            raise ValueError(
                f"reference '{self.reference}' needs at least one machine "
                f"(delta*m = {delta * self.m:.3g} < 1)"
            )

    @property
    def reference_delta(self) -> float | None:
        if self.reference == "none":
            return None
        if self.reference == "opt-half":
            return 0.5
        if self.reference == "opt-third":
            return 1.0 / 3.0
        if self.mechanism.delta is None:
            raise ValueError("opt-delta-half needs a mechanism partition delta")
        return 0.5 * self.mechanism.delta

    @property
    def job_specs(self) -> tuple[DistributionSpec, ...]:
        if isinstance(self.dist, tuple):
            return self.dist
        return (self.dist,) * self.n

    def echo(self) -> dict:
        """Configuration summary embedded in reports (thread count omitted:
        it never affects the numbers)."""
        mech = self.mechanism
        if isinstance(self.dist, tuple):
            dist = [s.spec_string for s in self.dist]
        else:
            dist = self.dist.spec_string
        return {
            "mechanism": mech.kind,
            "c": mech.c,
            "beta": mech.beta,
            "delta": mech.delta,
            "k": mech.k,
            "dist": dist,
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "reference": self.reference,
            "paired": self.paired,
        }


@dataclass(frozen=True)
class ReportRow:
    trial: int
    makespan: float
    total_work: float
    max_load: int
    stage1_makespan: float | None
    stage2_makespan: float | None
    greedy_first_best: float
    seed: int

    def as_tuple(self) -> tuple:
        return (
            self.trial,
            self.makespan,
            self.total_work,
            self.max_load,
            self.stage1_makespan,
            self.stage2_makespan,
            self.greedy_first_best,
            self.seed,
        )


@dataclass
class CampaignResult:
    config: ExperimentConfig
    rows: list[ReportRow]
    aggregate: dict
    reference: OptEstimate | None


def derive_trial_seed(master_seed: int, stream: int, index: int) -> int:
    """Stable 64-bit seed for (master, stream, trial); order-independent."""
    state = np.random.SeedSequence((master_seed, stream, index)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def _resolve_mechanism(cfg: ExperimentConfig) -> MechanismConfig:
    mech = cfg.mechanism
    if not mech.uses_reserve or mech.beta is not None:
        return mech
    if mech.k is None:
        raise ValueError(f"{mech.kind} needs --beta or the tuning parameter --k")
    spec = cfg.job_specs[0]
    rng = np.random.default_rng(derive_trial_seed(cfg.master_seed, _REFERENCE_STREAM, 1))
    beta = derive_reserve(spec, cfg.n, cfg.m, rule="count-target", k=mech.k, rng=rng)
    return replace(mech, beta=beta)


def _check_invariants(cfg: ExperimentConfig, mech: MechanismConfig, inst: Instance, outcome):
    sched = outcome.schedule
    scheduled = sched.assignment != UNSCHEDULED
    if scheduled.any():
        top = inst.runtimes[scheduled, sched.assignment[scheduled]].max()
        if sched.makespan < top - _INVARIANT_TOL:
            raise InvariantViolation("makespan fell below the largest scheduled runtime")
    if mech.kind == "bounded-overload":
        if sched.loads.max() > overload_cap(cfg.n, cfg.m, mech.c):
            raise InvariantViolation("a machine exceeded the overload cap")
    if mech.kind == "sieve-bounded-overload" and sched.n_unscheduled:
        raise InvariantViolation("combined mechanism left a job unscheduled")


def _run_trial(cfg: ExperimentConfig, mech: MechanismConfig, index: int):
    seed = derive_trial_seed(cfg.master_seed, _TRIAL_STREAM, index)
    rng = np.random.default_rng(seed)
    inst = sample_instance(cfg.job_specs, cfg.m, rng)
    outcome = run_mechanism(mech, inst, compute_payments=False)
    _check_invariants(cfg, mech, inst, outcome)
    sched = outcome.schedule

    stage1 = stage2 = None
    if mech.kind == "sieve-bounded-overload":
        m1, _ = partition_sizes(cfg.m, mech.delta)
        stage1 = float(sched.works[:m1].max())
        stage2 = float(sched.works[m1:].max())

    row = ReportRow(
        trial=index,
        makespan=sched.makespan,
        total_work=sched.total_work,
        max_load=int(sched.loads.max()),
        stage1_makespan=stage1,
        stage2_makespan=stage2,
        greedy_first_best=first_best_makespan_greedy(inst),
        seed=seed,
    )

    paired_stats = None
    delta = cfg.reference_delta
    if cfg.paired and delta is not None:
        machines = reduced_machine_count(cfg.m, delta)
        best = inst.runtimes[:, :machines].min(axis=1)
        paired_stats = (float(best.max()), float(best.sum() / machines))
    return row, paired_stats


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, se


def run_campaign(cfg: ExperimentConfig) -> CampaignResult:
    mech = _resolve_mechanism(cfg)
    workers = cfg.threads if cfg.threads > 0 else None
    if cfg.threads == 1:
        results = [_run_trial(cfg, mech, t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _run_trial(cfg, mech, t), range(cfg.trials)))
    rows = [r for r, _ in results]

    makespans = np.array([r.makespan for r in rows])
    msp_mean, msp_se = _mean_se(makespans)
    aggregate = {
        "trials": cfg.trials,
        "mean_makespan": msp_mean,
        "se_makespan": msp_se,
        "mean_total_work": float(np.mean([r.total_work for r in rows])),
        "mean_max_load": float(np.mean([r.max_load for r in rows])),
    }

    reference = None
    delta = cfg.reference_delta
    if delta is not None:
        if cfg.paired:
            wb = np.array([s[0] for _, s in results])
            ab = np.array([s[1] for _, s in results])
            wb_mean, wb_se = _mean_se(wb)
            ab_mean, ab_se = _mean_se(ab)
            if wb_mean >= ab_mean:
                ref_samples, ref_mean, ref_se, kind = wb, wb_mean, wb_se, "worst-best"
            else:
                ref_samples, ref_mean, ref_se, kind = ab, ab_mean, ab_se, "average-best"
            reference = OptEstimate(
                "max-of-both", reduced_machine_count(cfg.m, delta), ref_mean, ref_se, cfg.trials
            )
            cov = float(np.cov(makespans, ref_samples, ddof=1)[0, 1]) / cfg.trials
            ratio = msp_mean / ref_mean
            var = ratio**2 * (
                (msp_se / msp_mean) ** 2
                + (ref_se / ref_mean) ** 2
                - 2.0 * cov / (msp_mean * ref_mean)
            )
            ratio_se = math.sqrt(max(var, 0.0))
            aggregate["reference_chosen_bound"] = kind
        else:
            rng = np.random.default_rng(
                derive_trial_seed(cfg.master_seed, _REFERENCE_STREAM, 0)
            )
            reference = opt_reference(cfg.job_specs, cfg.n, cfg.m, delta, cfg.trials, rng)
            ratio = msp_mean / reference.mean
            ratio_se = abs(ratio) * math.hypot(
                msp_se / msp_mean if msp_mean else 0.0,
                reference.standard_error / reference.mean if reference.mean else 0.0,
            )
        aggregate.update(
            {
                "reference_kind": cfg.reference,
                "reference_machines": reference.machines_used,
                "reference_mean": reference.mean,
                "reference_se": reference.standard_error,
                "ratio": ratio,
                "ratio_se": ratio_se,
            }
        )
    return CampaignResult(config=cfg, rows=rows, aggregate=aggregate, reference=reference)


def version_string() -> str:
    try:
        base = importlib.metadata.version("schedmech")
    except importlib.metadata.PackageNotFoundError:
        base = "0.0.0+unpackaged"
    describe = ""
    try:
        proc = subprocess.run(
            ["git", "-C", str(Path(__file__).resolve().parent), "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if proc.returncode == 0 and proc.stdout.strip():
            describe = f"+g{proc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"schedmech {base}{describe}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_report(result: CampaignResult, path: str | Path | None, fmt: str = "csv") -> str:
    """Write the report; returns the rendered text.

    ``path=None`` renders without touching the filesystem (the CLI then
    prints to stdout).  Output is byte-deterministic for a fixed config and
    seed.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "csv":
        lines = ["# schedmech-report"]
        lines.append(f"# version={version_string()}")
        lines.append(f"# config={json.dumps(result.config.echo(), sort_keys=True)}")
        lines.append(f"# aggregate={json.dumps(result.aggregate, sort_keys=True)}")
        lines.append(",".join(REPORT_COLUMNS))
        for row in result.rows:
            lines.append(",".join(_fmt(v) for v in row.as_tuple()))
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "kind": "schedmech-report",
            "version": version_string(),
            "config": result.config.echo(),
            "aggregate": result.aggregate,
            "columns": list(REPORT_COLUMNS),
            "rows": [list(row.as_tuple()) for row in result.rows],
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse_cell(column: str, cell: str):
    if cell == "":
        return None
    if column in ("trial", "max_load", "seed"):
        return int(cell)
    return float(cell)


def parse_report(text: str) -> dict:
    """Parse an emitted report (either format) back to metadata plus rows."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(stripped)
        rows = [
            ReportRow(**dict(zip(payload["columns"], row))) for row in payload["rows"]
        ]
        return {
            "version": payload["version"],
            "config": payload["config"],
            "aggregate": payload["aggregate"],
            "rows": rows,
        }
    meta: dict = {}
    rows = []
    header_seen = False
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                if key in ("config", "aggregate"):
                    meta[key] = json.loads(value)
                else:
                    meta[key] = value
            continue
        if not header_seen:
            if tuple(line.split(",")) != REPORT_COLUMNS:
                raise ValueError("unexpected CSV column header")
            header_seen = True
            continue
        cells = line.split(",")
        values = {col: _parse_cell(col, cell) for col, cell in zip(REPORT_COLUMNS, cells)}
        rows.append(ReportRow(**values))
    meta["rows"] = rows
    return meta
