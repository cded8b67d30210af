"""Config ingestion, Monte Carlo sweeps and CSV / JSON-lines emission.

Config files are TOML with three optional tables::

    [scenario]            # physical scalars; powers in dBm
    [sweep]               # axis, values, seeds, topologies
    [solver]              # SolverSettings fields

An empty file gives the default scenario (N_I=32, N_T=4, N_S=6, K=4, Q=2,
M=128, P=6 dBm, noise 0 dBm, rho=0.8, 30 GHz) swept over a single point.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, fields, replace
import io
import json
import math
import sys
import time
from typing import Any, Iterable, Sequence

import numpy as np

from .ao import NumericalAbort, SolverSettings, compute_normalizers, run
from .geometry import SPEED_OF_LIGHT, ScenarioConfig, dbm_to_watt, make_scenario
from .manifold import DegenerateProjectionError
from .metrics import SingularFimError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

AXES = ("rho", "power_dbm", "n_ris", "n_sensor", "n_targets")
TOPOLOGIES = ("fully", "group", "single")
MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid or unparsable configuration; the message names the offending field."""


# scenario keys accepted in the config file -> (ScenarioConfig field, converter)
_SCENARIO_KEYS = {
    "n_tx": ("n_tx", int),
    "n_ris": ("n_ris", int),
    "n_sensor": ("n_sensor", int),
    "n_users": ("n_users", int),
    "n_targets": ("n_targets", int),
    "cpi_len": ("cpi_len", int),
    "power_dbm": ("power_budget", dbm_to_watt),
    "noise_comm_dbm": ("noise_comm", dbm_to_watt),
    "noise_sense_dbm": ("noise_sense", dbm_to_watt),
    "rho": ("weight_rho", float),
    "carrier_hz": ("wavelength", lambda f: SPEED_OF_LIGHT / float(f)),
    "topology": ("topology", str),
    "group_sizes": ("group_sizes", lambda v: tuple(int(x) for x in v)),
    "n_groups": ("n_groups", int),
    "feed_offset": ("feed_offset", float),
    "power_eff": ("power_eff", float),
    "gain_active_db": ("gain_active_db", float),
    "gain_passive_db": ("gain_passive_db", float),
    "target_angles_deg": ("target_angles_deg", lambda v: tuple((float(a), float(b)) for a, b in v)),
    "psi_init": ("psi_init", str),
}


@dataclass(frozen=True)
class SweepSpec:
    axis: str = "rho"
    values: tuple = ()
    seeds: tuple[int, ...] = (0,)
    topologies: tuple[str, ...] = ("fully",)
    # topology whose endpoint runs supply V_c, V_s; "same" normalizes each topology by itself
    normalizer_topology: str = "fully"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep.axis: expected one of {', '.join(AXES)}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep.values: must be non-empty")
        if not self.seeds:
            raise ConfigError("sweep.seeds: must be non-empty")
        for s in self.seeds:
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s <= MAX_SEED:
                raise ConfigError(f"sweep.seeds: {s!r} is not a 64-bit unsigned integer")
        if not self.topologies:
            raise ConfigError("sweep.topologies: must be non-empty")
        for t in self.topologies:
            if t not in TOPOLOGIES:
                raise ConfigError(f"sweep.topologies: unknown topology {t!r}")
        if self.normalizer_topology not in TOPOLOGIES + ("same",):
            raise ConfigError(f"sweep.normalizer_topology: unknown value {self.normalizer_topology!r}")

    def with_seed_offset(self, offset: int) -> "SweepSpec":
        return replace(self, seeds=tuple(s + offset for s in self.seeds))


def point_config(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Scenario at one sweep point."""
    if axis == "rho":
        return replace(cfg, weight_rho=float(value))
    if axis == "power_dbm":
        return replace(cfg, power_budget=dbm_to_watt(float(value)))
    # integer axes: drop explicit group sizes that would no longer sum to N_I
    if axis == "n_ris" and cfg.group_sizes is not None:
        return replace(cfg, n_ris=int(value), group_sizes=None)
    return replace(cfg, **{axis: int(value)})


def _check_table(name: str, table: Any, allowed: Iterable[str]) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    return table


def parse_config(doc: dict) -> tuple[ScenarioConfig, SweepSpec, SolverSettings]:
    """Validate a parsed config document; see the module docstring for the schema."""
    _check_table("config", doc, ("scenario", "sweep", "solver"))

    scen = _check_table("scenario", doc.get("scenario", {}), _SCENARIO_KEYS)
    kwargs = {}
    for key, raw in scen.items():
        target, conv = _SCENARIO_KEYS[key]
        try:
            kwargs[target] = conv(raw)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"scenario.{key}: cannot interpret {raw!r} ({exc})") from None
    if "topology" in kwargs and kwargs["topology"] not in TOPOLOGIES:
        raise ConfigError(f"scenario.topology: unknown topology {kwargs['topology']!r}")
    try:
        cfg = ScenarioConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        for key, (target, _) in _SCENARIO_KEYS.items():
            if key != target:
                msg = msg.replace(target, f"{target} (config key {key!r})", 1) if msg.startswith(target) else msg
        raise ConfigError(f"scenario: {msg}") from None

    sw = _check_table("sweep", doc.get("sweep", {}), [f.name for f in fields(SweepSpec)])
    axis = sw.get("axis", "rho")
    values = sw.get("values")
    if values is None:
        # a single point at the scenario's own value
        current = {"rho": cfg.weight_rho, "n_ris": cfg.n_ris, "n_sensor": cfg.n_sensor, "n_targets": cfg.n_targets}
        values = [float(scen.get("power_dbm", 6.0))] if axis == "power_dbm" else [current.get(axis)]
    if not isinstance(values, list):
        raise ConfigError("sweep.values: must be a list")
    seeds = sw.get("seeds", [0])
    topologies = sw.get("topologies", [cfg.topology])
    if not isinstance(seeds, list) or not isinstance(topologies, list):
        raise ConfigError("sweep.seeds and sweep.topologies must be lists")
    spec = SweepSpec(
        axis=axis,
        values=tuple(values),
        seeds=tuple(seeds),
        topologies=tuple(topologies),
        normalizer_topology=sw.get("normalizer_topology", "fully"),
    )
    # every sweep point must itself be a valid scenario, for every topology
    for v in spec.values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"sweep.values: {v!r} is not a number")
        if spec.axis not in ("rho", "power_dbm") and float(v) != int(v):
            raise ConfigError(f"sweep.values: {spec.axis} needs integers, got {v!r}")
        for topo in sorted(set(spec.topologies) | ({spec.normalizer_topology} - {"same"})):
            try:
                replace(point_config(cfg, spec.axis, v), topology=topo)
            except ValueError as exc:
                raise ConfigError(f"sweep.values: {spec.axis}={v!r} with topology {topo!r}: {exc}") from None

    solver = _check_table("solver", doc.get("solver", {}), [f.name for f in fields(SolverSettings)])
    try:
        settings = SolverSettings(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    return cfg, spec, settings


def load_config(path) -> tuple[ScenarioConfig, SweepSpec, SolverSettings]:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return parse_config(doc)


# ---------------------------------------------------------------------------
# results

COLUMNS = (
    "axis",
    "point",
    "seed",
    "topology",
    "n_tx",
    "n_ris",
    "n_sensor",
    "n_users",
    "n_targets",
    "cpi_len",
    "power_budget",
    "noise_comm",
    "noise_sense",
    "weight_rho",
    "wavelength",
    "n_groups",
    "group_sizes",
    "feed_offset",
    "power_eff",
    "gain_active_db",
    "gain_passive_db",
    "psi_init",
    "vc",
    "vs",
    "sum_rate",
    "crb_avg",
    "objective",
    "n_outer",
    "converged",
    "wall_ms",
    "error",
)


@dataclass(frozen=True)
class ResultRow:
    """One (sweep point, seed, topology) outcome.

    ``sum_rate`` is in bits per channel use, ``crb_avg`` is tr(F^-1)/Q.
    Powers are in Watts. ``wall_ms`` is None unless timing was requested,
    which keeps repeated sweeps byte-identical.
    """

    axis: str
    point: float
    seed: int
    topology: str
    n_tx: int
    n_ris: int
    n_sensor: int
    n_users: int
    n_targets: int
    cpi_len: int
    power_budget: float
    noise_comm: float
    noise_sense: float
    weight_rho: float
    wavelength: float
    n_groups: int
    group_sizes: str
    feed_offset: float
    power_eff: float
    gain_active_db: float
    gain_passive_db: float
    psi_init: str
    vc: float | None
    vs: float | None
    sum_rate: float | None
    crb_avg: float | None
    objective: float | None
    n_outer: int | None
    converged: bool
    wall_ms: float | None
    error: str

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def numerical_abort(self) -> bool:
        return "numerical:" in self.error


def _base_row(cfg: ScenarioConfig, axis: str, point, seed: int, topology: str) -> dict:
    return dict(
        axis=axis,
        point=point,
        seed=seed,
        topology=topology,
        n_tx=cfg.n_tx,
        n_ris=cfg.n_ris,
        n_sensor=cfg.n_sensor,
        n_users=cfg.n_users,
        n_targets=cfg.n_targets,
        cpi_len=cfg.cpi_len,
        power_budget=cfg.power_budget,
        noise_comm=cfg.noise_comm,
        noise_sense=cfg.noise_sense,
        weight_rho=cfg.weight_rho,
        wavelength=cfg.wavelength,
        n_groups=cfg.n_groups,
        group_sizes=" ".join(str(s) for s in cfg.topology_spec().group_sizes) if topology == "group" else "",
        feed_offset=cfg.feed_offset,
        power_eff=cfg.power_eff,
        gain_active_db=cfg.gain_active_db,
        gain_passive_db=cfg.gain_passive_db,
        psi_init=cfg.psi_init,
    )


@dataclass(frozen=True)
class _Task:
    index: int
    cfg: ScenarioConfig
    axis: str
    point: Any
    seed: int
    topologies: tuple[str, ...]
    normalizer_topology: str
    settings: SolverSettings
    timing: bool


_FAILURES = (NumericalAbort, SingularFimError, DegenerateProjectionError, np.linalg.LinAlgError, FloatingPointError)


def _describe(exc: BaseException) -> str:
    kind = "numerical" if isinstance(exc, _FAILURES) else "error"
    return f"{kind}: {type(exc).__name__}: {exc}".replace("\x00", "")


def _run_task(task: _Task) -> list[ResultRow]:
    """All topologies of one (point, seed); normalizers are shared within the task."""
    rows = []
    shared = None
    shared_err = ""
    if task.normalizer_topology != "same":
        try:
            shared = compute_normalizers(
                make_scenario(replace(task.cfg, topology=task.normalizer_topology), task.seed), task.settings
            )
        except Exception as exc:  # recorded in every row of this task
            shared_err = "normalizers " + _describe(exc)
    for topo in task.topologies:
        cfg = replace(task.cfg, topology=topo)
        base = _base_row(cfg, task.axis, task.point, task.seed, topo)
        t0 = time.perf_counter()
        out = dict(vc=None, vs=None, sum_rate=None, crb_avg=None, objective=None, n_outer=None, converged=False)
        err = shared_err
        if not err:
            try:
                scn = make_scenario(cfg, task.seed)
                norm = shared if shared is not None else compute_normalizers(scn, task.settings)
                res = run(scn, task.settings, norm)
                fin = res.final
                out.update(
                    vc=norm.vc,
                    vs=norm.vs,
                    sum_rate=fin.sum_rate,
                    crb_avg=fin.crb / cfg.n_targets,
                    objective=fin.objective,
                    n_outer=res.trace.n_outer,
                    converged=res.trace.converged,
                )
            except Exception as exc:
                err = _describe(exc)
        wall = (time.perf_counter() - t0) * 1e3 if task.timing else None
        rows.append(ResultRow(**base, **out, wall_ms=wall, error=err))
    return rows


def sweep_tasks(cfg: ScenarioConfig, spec: SweepSpec, settings: SolverSettings, timing: bool = False) -> list[_Task]:
    tasks = []
    for value in spec.values:
        pcfg = point_config(cfg, spec.axis, value)
        for seed in spec.seeds:
            tasks.append(
                _Task(len(tasks), pcfg, spec.axis, value, seed, spec.topologies, spec.normalizer_topology, settings, timing)
            )
    return tasks


def run_sweep(
    cfg: ScenarioConfig,
    spec: SweepSpec,
    settings: SolverSettings = SolverSettings(),
    workers: int = 1,
    timing: bool = False,
) -> list[ResultRow]:
    """One row per point x seed x topology, ordered point-major, then seed, then topology.

    Failures are recorded in the row's ``error`` field; the sweep always completes.
    """
    tasks = sweep_tasks(cfg, spec, settings, timing)
    if workers <= 1 or len(tasks) <= 1:
        results = [(t.index, _run_task(t)) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(zip((t.index for t in tasks), pool.map(_run_task, tasks)))
    results.sort(key=lambda item: item[0])
    return [row for _, rows in results for row in rows]


# ---------------------------------------------------------------------------
# emission


def _csv_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)  # shortest round-trip representation
    return str(value)


def _json_field(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_rows(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(COLUMNS)
        for row in rows:
            d = row.as_dict()
            writer.writerow([_csv_field(d[c]) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for row in rows:
            d = row.as_dict()
            lines.append(json.dumps({c: _json_field(d[c]) for c in COLUMNS}, allow_nan=False))
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown format {fmt!r}")


def emit(rows: Sequence[ResultRow], fmt: str = "csv", path=None) -> None:
    """Write ``rows`` to ``path`` (or stdout when None)."""
    if not rows:
        raise ValueError("nothing to emit")
    text = format_rows(rows, fmt)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    # newline="" keeps the CSV's CRLF terminators untouched
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


_INT_COLS = {"seed", "n_tx", "n_ris", "n_sensor", "n_users", "n_targets", "cpi_len", "n_groups", "n_outer"}
_STR_COLS = {"axis", "topology", "group_sizes", "psi_init", "error"}


def parse_csv(text: str) -> list[dict]:
    """Inverse of the CSV emitter, with typed values (used for round-trip checks and scripts)."""
    reader = csv.DictReader(io.StringIO(text, newline=""))
    out = []
    for rec in reader:
        d = {}
        for key, raw in rec.items():
            if key in _STR_COLS:
                d[key] = raw
            elif raw == "":
                d[key] = None
            elif key == "converged":
                d[key] = raw == "true"
            elif key in _INT_COLS:
                d[key] = int(raw)
            else:
                d[key] = float(raw)
        out.append(d)
    return out


def summarize(rows: Sequence[ResultRow]) -> list[dict]:
    """Means over seeds of the successful rows, per (point, topology), in sweep order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.point, r.topology), []).append(r)
    out = []
    for (point, topo), grp in groups.items():
        ok = [r for r in grp if not r.error]
        mean = (lambda key: float(np.mean([getattr(r, key) for r in ok])) if ok else math.nan)
        out.append(
            dict(
                point=point,
                topology=topo,
                runs=len(grp),
                failed=len(grp) - len(ok),
                converged=sum(r.converged for r in ok),
                sum_rate=mean("sum_rate"),
                crb_avg=mean("crb_avg"),
                objective=mean("objective"),
            )
        )
    return out
