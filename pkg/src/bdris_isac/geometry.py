"""Array geometry, steering vectors, feed channel and random channel draws."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .manifold import TopologySpec

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_TARGETS_DEG = ((-30.0, 15.0), (10.0, -45.0), (-60.0, -75.0))


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and algorithmic scalars of one scenario.

    Powers are stored in Watts; the dBm conversion happens once in the
    config loader. Target angles are given in degrees as (azimuth, elevation).
    """

    n_tx: int = 4
    n_ris: int = 32
    n_sensor: int = 6
    n_users: int = 4
    n_targets: int = 2
    cpi_len: int = 128
    power_budget: float = dbm_to_watt(6.0)
    noise_comm: float = dbm_to_watt(0.0)
    noise_sense: float = dbm_to_watt(0.0)
    weight_rho: float = 0.8
    wavelength: float = SPEED_OF_LIGHT / 30e9
    topology: str = "fully"
    group_sizes: tuple[int, ...] | None = None
    n_groups: int = 4
    feed_offset: float = 10.0
    power_eff: float = 1.0
    gain_active_db: float = 3.0
    gain_passive_db: float = 3.0
    target_angles_deg: tuple[tuple[float, float], ...] = DEFAULT_TARGETS_DEG
    psi_init: str = "matched"
    rng_seed: int = 0

    def __post_init__(self):
        if self.group_sizes is not None:
            object.__setattr__(self, "group_sizes", tuple(int(s) for s in self.group_sizes))
        object.__setattr__(
            self, "target_angles_deg", tuple((float(a), float(b)) for a, b in self.target_angles_deg)
        )
        self.validate()

    def validate(self) -> None:
        for name in ("n_tx", "n_ris", "n_sensor", "n_users", "n_targets", "cpi_len"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("power_budget", "noise_comm", "noise_sense", "wavelength", "feed_offset", "power_eff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.weight_rho < 1.0:
            raise ValueError(f"weight_rho must lie in (0, 1), got {self.weight_rho}")
        if self.psi_init not in ("matched", "random"):
            raise ValueError(f"psi_init must be 'matched' or 'random', got {self.psi_init!r}")
        if len(self.target_angles_deg) < self.n_targets:
            raise ValueError(
                f"n_targets={self.n_targets} but only {len(self.target_angles_deg)} target angles given"
            )
        for az, el in self.target_angles_deg[: self.n_targets]:
            if not (-90.0 < az < 90.0 and -90.0 < el < 90.0):
                raise ValueError(f"target angles must lie in (-90, 90) degrees, got ({az}, {el})")
        self.topology_spec()

    def topology_spec(self) -> TopologySpec:
        kind = self.topology
        if kind == "single":
            return TopologySpec.single(self.n_ris)
        if kind == "fully":
            return TopologySpec.fully(self.n_ris)
        if kind == "group":
            if self.group_sizes is not None:
                spec = TopologySpec(self.group_sizes)
                if spec.n_ports != self.n_ris:
                    raise ValueError(
                        f"group sizes {self.group_sizes} sum to {spec.n_ports}, expected n_ris={self.n_ris}"
                    )
                return spec
            return TopologySpec.uniform(self.n_ris, self.n_groups)
        raise ValueError(f"unknown topology {kind!r} (expected single, group or fully)")


@dataclass(frozen=True)
class ArrayGeometry:
    ris_y: np.ndarray
    ris_z: np.ndarray
    sensor_y: np.ndarray
    feed_positions: np.ndarray  # (N_T, 3)
    wavelength: float

    @property
    def ris_positions(self) -> np.ndarray:
        return np.stack([np.zeros_like(self.ris_y), self.ris_y, self.ris_z], axis=1)


@dataclass(frozen=True)
class TargetParams:
    azimuths: np.ndarray
    elevations: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_degrees(cls, angles_deg, coeffs) -> "TargetParams":
        ang = np.deg2rad(np.asarray(angles_deg, dtype=float).reshape(-1, 2))
        return cls(ang[:, 0].copy(), ang[:, 1].copy(), np.asarray(coeffs, dtype=complex))

    @property
    def n_targets(self) -> int:
        return self.azimuths.size


@dataclass(frozen=True)
class SteeringBundle:
    a_mat: np.ndarray
    b_mat: np.ndarray
    da_theta: np.ndarray
    da_phi: np.ndarray
    db_theta: np.ndarray
    db_phi: np.ndarray
    u_mat: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return np.diag(self.u_mat)


@dataclass(frozen=True)
class ChannelSet:
    feed: np.ndarray  # H, (N_I, N_T)
    users: np.ndarray  # H_c, (N_I, K)


def upa_shape(n: int) -> tuple[int, int]:
    """Most square factor pair (rows, cols) of ``n`` with rows <= cols."""
    rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
    return rows, n // rows


def _centered(n: int, spacing: float) -> np.ndarray:
    return (np.arange(n) - (n - 1) / 2.0) * spacing


def build_geometry(cfg: ScenarioConfig) -> ArrayGeometry:
    lam = cfg.wavelength
    half = lam / 2.0
    rows, cols = upa_shape(cfg.n_ris)
    zz, yy = np.meshgrid(_centered(rows, half), _centered(cols, half), indexing="ij")
    feed = np.zeros((cfg.n_tx, 3))
    feed[:, 0] = cfg.feed_offset * lam
    feed[:, 1] = _centered(cfg.n_tx, half)
    return ArrayGeometry(
        ris_y=yy.ravel(),
        ris_z=zz.ravel(),
        sensor_y=_centered(cfg.n_sensor, half),
        feed_positions=feed,
        wavelength=lam,
    )


def steering(geom: ArrayGeometry, tp: TargetParams) -> SteeringBundle:
    """Transmit/receive steering matrices and their exact angle derivatives."""
    k = 2.0 * np.pi / geom.wavelength
    th, ph = tp.azimuths[None, :], tp.elevations[None, :]
    ry, rz, sy = geom.ris_y[:, None], geom.ris_z[:, None], geom.sensor_y[:, None]

    a = np.exp(-1j * k * (ry * np.sin(th) * np.cos(ph) + rz * np.sin(ph)))
    b = np.exp(-1j * k * (sy * np.sin(th) * np.cos(ph)))
    da_theta = a * (-1j * k) * (ry * np.cos(th) * np.cos(ph))
    da_phi = a * (-1j * k) * (-ry * np.sin(th) * np.sin(ph) + rz * np.cos(ph))
    db_theta = b * (-1j * k) * (sy * np.cos(th) * np.cos(ph))
    db_phi = b * (-1j * k) * (-sy * np.sin(th) * np.sin(ph))
    return SteeringBundle(a, b, da_theta, da_phi, db_theta, db_phi, np.diag(tp.coeffs.astype(complex)))


def feed_channel(cfg: ScenarioConfig, geom: ArrayGeometry) -> np.ndarray:
    """Near-field feed-to-RIS channel with angle-independent antenna gains."""
    lam = geom.wavelength
    diff = geom.ris_positions[:, None, :] - geom.feed_positions[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    if np.any(d == 0.0):
        raise ValueError("feed antenna coincides with a RIS element")
    gain = cfg.power_eff * db_to_linear(cfg.gain_active_db) * db_to_linear(cfg.gain_passive_db)
    return lam * np.sqrt(gain) / (4.0 * np.pi * d) * np.exp(-2j * np.pi * d / lam)


def sample_user_channels(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    shape = (cfg.n_ris, cfg.n_users)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def reflection_coeff(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return (1.0 + 0.2 * n) * np.exp(2j * np.pi * n)


def sample_reflection_coeffs(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    return reflection_coeff(rng.uniform(0.0, 1.0, cfg.n_targets))


@dataclass(frozen=True)
class Scenario:
    """One channel realization: everything the optimizer treats as fixed."""

    cfg: ScenarioConfig
    seed: int
    geometry: ArrayGeometry
    targets: TargetParams
    bundle: SteeringBundle
    channels: ChannelSet
    topology: TopologySpec
    init_stream: np.random.SeedSequence = field(repr=False)

    def init_rng(self) -> np.random.Generator:
        # fresh generator each call so every run from this realization draws the same W_s
        return np.random.default_rng(self.init_stream)


def make_scenario(cfg: ScenarioConfig, seed: int | None = None) -> Scenario:
    """Draw the random parts of a scenario from independent child streams of ``seed``."""
    seed = cfg.rng_seed if seed is None else seed
    ch_stream, coeff_stream, init_stream = np.random.SeedSequence(seed).spawn(3)
    geom = build_geometry(cfg)
    coeffs = sample_reflection_coeffs(cfg, np.random.default_rng(coeff_stream))
    targets = TargetParams.from_degrees(cfg.target_angles_deg[: cfg.n_targets], coeffs)
    channels = ChannelSet(
        feed=feed_channel(cfg, geom),
        users=sample_user_channels(cfg, np.random.default_rng(ch_stream)),
    )
    return Scenario(
        cfg=cfg,
        seed=int(seed),
        geometry=geom,
        targets=targets,
        bundle=steering(geom, targets),
        channels=channels,
        topology=cfg.topology_spec(),
        init_stream=init_stream,
    )
