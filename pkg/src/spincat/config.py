"""Experiment configuration: parsing, defaults, validation, serialization.

Config documents are JSON with six sections (model, space, measurement,
integration, wavelet, output).  Every key is optional; anything omitted
is filled from the defaults below, most of which are derived from the
model parameters.  Unknown sections or keys are rejected.

Derived defaults
----------------
omega          10 * g  (record carrier well above the envelope bands)
n_max          ceil(nbar + 10 sqrt(nbar)), nbar = |alpha|^2
t_final        1.2 * t_r1
dt             t_R / 500 when gamma = 0; otherwise additionally capped at
               1e-5 / (gamma * (nbar + 3 sqrt(nbar) + 4)) so the per-step
               pre-renormalization norm drift stays below 1e-4
output_stride  chosen so roughly 4000 samples span t_final
record_mode    "noisy" when gamma > 0, "ideal" otherwise
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .hilbert import Representation, SpaceSpec, StateVector, embed_product
from .model import (
    CatParity,
    ModelParams,
    Timescales,
    coherent_state,
    spin_cat_state,
    spin_coherent_state,
    timescales,
)
from .qsd import IntegrationParams, MeasurementParams, RecordMode, StepMethod
from .wavelet import WaveletParams, morlet_center_frequency

SECTIONS = ("model", "space", "measurement", "integration", "wavelet", "output")

TARGET_SAMPLES = 4000
DRIFT_BUDGET = 1e-5  # dt cap coefficient keeping per-step norm drift < 1e-4


INITIAL_SPIN_CHOICES = ("cat", "coherent")


@dataclass
class SimConfig:
    """Fully resolved experiment description (all defaults applied)."""

    # model
    n_qubits: int = 5
    alpha: float = 5.0
    z: float = 1.0
    parity: CatParity = CatParity.MINUS
    g: float = 1.0
    omega: float = 10.0
    initial_spin: str = "cat"
    # space
    n_max: int = 75
    representation: Representation = Representation.SYMMETRIC
    # measurement
    gamma: float = 0.0
    record_mode: RecordMode = RecordMode.IDEAL
    # integration
    dt: float = 0.0
    t_final: float = 0.0
    output_stride: int = 1
    seed: int = 1
    n_trajectories: int = 1
    method: StepMethod = StepMethod.SPLIT
    # wavelet
    wavelet: WaveletParams = field(default_factory=WaveletParams)
    node_threshold: float = 0.15
    # output
    output_dir: str = "out"

    # ------------------------------------------------------------------
    @property
    def nbar(self) -> float:
        return abs(self.alpha) ** 2

    def model_params(self) -> ModelParams:
        return ModelParams(omega=self.omega, g=self.g, n_qubits=self.n_qubits)

    def space_spec(self) -> SpaceSpec:
        return SpaceSpec(self.n_max, self.n_qubits, self.representation)

    def measurement_params(self) -> MeasurementParams:
        return MeasurementParams(gamma=self.gamma, record_mode=self.record_mode)

    def integration_params(
        self, trajectory_index: Optional[int] = None
    ) -> IntegrationParams:
        return IntegrationParams(
            dt=self.dt,
            t_final=self.t_final,
            output_stride=self.output_stride,
            seed=self.seed,
            trajectory_index=trajectory_index or 0,
        )

    def step_method(self) -> StepMethod:
        return self.method

    def time_scales(self) -> Timescales:
        return timescales(self.model_params(), self.nbar)

    def initial_state(self, space: Optional[SpaceSpec] = None) -> StateVector:
        space = space if space is not None else self.space_spec()
        fld = coherent_state(self.alpha, space.n_max)
        if self.initial_spin == "cat":
            spin = spin_cat_state(
                self.z, self.n_qubits, self.parity, space.representation
            )
        else:
            spin = spin_coherent_state(self.z, self.n_qubits, space.representation)
        return embed_product(fld, spin, space)

    def low_frequency_band(self, dt_sample: float):
        """Scale band (samples) mapped from pseudo-frequencies [1/t_r1, 1/t_c]."""
        ts = self.time_scales()
        f_c = morlet_center_frequency(self.wavelet.omega0)
        return (f_c * ts.collapse / dt_sample, f_c * ts.first_revival / dt_sample)

    def node_separation(self) -> float:
        return 2.0 * self.time_scales().rabi

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "model": {
                "n_qubits": self.n_qubits,
                "alpha": self.alpha,
                "z": self.z,
                "parity": self.parity.value,
                "g": self.g,
                "omega": self.omega,
                "initial_spin": self.initial_spin,
            },
            "space": {
                "n_max": self.n_max,
                "representation": self.representation.value,
            },
            "measurement": {
                "gamma": self.gamma,
                "record_mode": self.record_mode.value,
            },
            "integration": {
                "dt": self.dt,
                "t_final": self.t_final,
                "output_stride": self.output_stride,
                "seed": self.seed,
                "n_trajectories": self.n_trajectories,
                "method": self.method.value,
            },
            "wavelet": {
                "omega0": self.wavelet.omega0,
                "n_scales": self.wavelet.n_scales,
                "scale_min": self.wavelet.scale_min,
                "scale_max": self.wavelet.scale_max,
                "detrend": self.wavelet.detrend,
                "node_threshold": self.node_threshold,
            },
            "output": {"directory": self.output_dir},
        }


def serialize_config(config: SimConfig) -> str:
    return json.dumps(config.to_dict(), indent=2)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return dict(sec)


def _take(sec: dict, section: str, key: str, kind, default):
    if key not in sec:
        return default
    val = sec.pop(key)
    where = f"{section}.{key}"
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where} must be a number, got {val!r}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where} must be an integer, got {val!r}")
        return val
    if kind is bool:
        if not isinstance(val, bool):
            raise ConfigError(f"{where} must be a boolean, got {val!r}")
        return val
    if kind is str:
        if not isinstance(val, str):
            raise ConfigError(f"{where} must be a string, got {val!r}")
        return val
    raise AssertionError(kind)


def _reject_unknown(sec: dict, section: str):
    if sec:
        raise ConfigError(
            f"unknown key(s) in section {section!r}: {sorted(sec)}"
        )


def config_from_dict(raw: dict) -> SimConfig:
    """Resolve a (possibly sparse) config mapping into a full SimConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    model = _section(raw, "model")
    n_qubits = _take(model, "model", "n_qubits", int, 5)
    alpha = _take(model, "model", "alpha", float, 5.0)
    z = _take(model, "model", "z", float, 1.0)
    parity_s = _take(model, "model", "parity", str, CatParity.MINUS.value)
    g = _take(model, "model", "g", float, 1.0)
    omega = _take(model, "model", "omega", float, 10.0 * g)
    initial_spin = _take(model, "model", "initial_spin", str, "cat")
    _reject_unknown(model, "model")

    if n_qubits < 1:
        raise ConfigError(f"model.n_qubits must be >= 1, got {n_qubits}")
    if g <= 0:
        raise ConfigError(f"model.g must be positive, got {g}")
    if omega < 0:
        raise ConfigError(f"model.omega must be >= 0, got {omega}")
    if alpha == 0:
        raise ConfigError("model.alpha must be nonzero (nbar = |alpha|^2 > 0)")
    try:
        parity = CatParity(parity_s)
    except ValueError:
        raise ConfigError(f"model.parity must be 'plus' or 'minus', got {parity_s!r}")
    if initial_spin not in INITIAL_SPIN_CHOICES:
        raise ConfigError(
            f"model.initial_spin must be 'cat' or 'coherent', got {initial_spin!r}"
        )

    nbar = abs(alpha) ** 2
    ts = timescales(ModelParams(omega=omega, g=g, n_qubits=n_qubits), nbar)

    space = _section(raw, "space")
    n_max_default = int(math.ceil(nbar + 10.0 * math.sqrt(nbar)))
    n_max = _take(space, "space", "n_max", int, n_max_default)
    rep_s = _take(space, "space", "representation", str, Representation.SYMMETRIC.value)
    _reject_unknown(space, "space")
    if n_max < 1:
        raise ConfigError(f"space.n_max must be >= 1, got {n_max}")
    try:
        representation = Representation(rep_s)
    except ValueError:
        raise ConfigError(
            f"space.representation must be 'full' or 'symmetric', got {rep_s!r}"
        )

    meas = _section(raw, "measurement")
    gamma = _take(meas, "measurement", "gamma", float, 0.0)
    if gamma < 0:
        raise ConfigError(f"measurement.gamma must be >= 0, got {gamma}")
    mode_default = RecordMode.NOISY.value if gamma > 0 else RecordMode.IDEAL.value
    mode_s = _take(meas, "measurement", "record_mode", str, mode_default)
    _reject_unknown(meas, "measurement")
    try:
        record_mode = RecordMode(mode_s)
    except ValueError:
        raise ConfigError(
            f"measurement.record_mode must be 'ideal' or 'noisy', got {mode_s!r}"
        )
    if gamma == 0.0:
        record_mode = RecordMode.IDEAL

    integ = _section(raw, "integration")
    dt_default = ts.rabi / 500.0
    if gamma > 0:
        dt_default = min(
            dt_default,
            DRIFT_BUDGET / (gamma * (nbar + 3.0 * math.sqrt(nbar) + 4.0)),
        )
    dt = _take(integ, "integration", "dt", float, dt_default)
    t_final = _take(integ, "integration", "t_final", float, 1.2 * ts.first_revival)
    n_steps = max(1, int(math.floor(t_final / dt))) if dt > 0 else 1
    stride_default = max(1, round(n_steps / TARGET_SAMPLES))
    output_stride = _take(integ, "integration", "output_stride", int, stride_default)
    seed = _take(integ, "integration", "seed", int, 1)
    n_trajectories = _take(integ, "integration", "n_trajectories", int, 1)
    method_s = _take(integ, "integration", "method", str, StepMethod.SPLIT.value)
    _reject_unknown(integ, "integration")

    if dt <= 0:
        raise ConfigError(f"integration.dt must be positive, got {dt}")
    if 2.0 * gamma * dt >= 0.01:
        raise ConfigError(
            f"integration.dt violates 2*gamma*dt < 0.01 "
            f"(2*{gamma}*{dt} = {2 * gamma * dt:.3g})"
        )
    if dt > ts.rabi / 200.0:
        raise ConfigError(
            f"integration.dt = {dt:.4g} does not resolve the Rabi cycle "
            f"(needs dt <= t_R/200 = {ts.rabi / 200.0:.4g})"
        )
    if t_final <= 0:
        raise ConfigError(f"integration.t_final must be positive, got {t_final}")
    if output_stride < 1:
        raise ConfigError(
            f"integration.output_stride must be >= 1, got {output_stride}"
        )
    if not 0 <= seed < 2**64:
        raise ConfigError(f"integration.seed must be a 64-bit unsigned integer")
    if n_trajectories < 1:
        raise ConfigError(
            f"integration.n_trajectories must be >= 1, got {n_trajectories}"
        )
    try:
        method = StepMethod(method_s)
    except ValueError:
        raise ConfigError(
            f"integration.method must be 'split' or 'euler', got {method_s!r}"
        )

    wav = _section(raw, "wavelet")
    omega0 = _take(wav, "wavelet", "omega0", float, 6.0)
    n_scales = _take(wav, "wavelet", "n_scales", int, 64)
    scale_min = _take(wav, "wavelet", "scale_min", float, 2.0)
    scale_max = wav.pop("scale_max", None)
    if scale_max is not None:
        if isinstance(scale_max, bool) or not isinstance(scale_max, (int, float)):
            raise ConfigError(f"wavelet.scale_max must be a number or null")
        scale_max = float(scale_max)
    detrend = _take(wav, "wavelet", "detrend", bool, True)
    node_threshold = _take(wav, "wavelet", "node_threshold", float, 0.15)
    _reject_unknown(wav, "wavelet")
    try:
        wavelet = WaveletParams(
            omega0=omega0,
            n_scales=n_scales,
            scale_min=scale_min,
            scale_max=scale_max,
            detrend=detrend,
        )
    except ValueError as exc:
        raise ConfigError(f"wavelet: {exc}")
    if not 0.0 < node_threshold < 1.0:
        raise ConfigError(
            f"wavelet.node_threshold must be in (0, 1), got {node_threshold}"
        )

    out = _section(raw, "output")
    output_dir = _take(out, "output", "directory", str, "out")
    _reject_unknown(out, "output")

    config = SimConfig(
        n_qubits=n_qubits,
        alpha=alpha,
        z=z,
        parity=parity,
        g=g,
        omega=omega,
        initial_spin=initial_spin,
        n_max=n_max,
        representation=representation,
        gamma=gamma,
        record_mode=record_mode,
        dt=dt,
        t_final=t_final,
        output_stride=output_stride,
        seed=seed,
        n_trajectories=n_trajectories,
        method=method,
        wavelet=wavelet,
        node_threshold=node_threshold,
        output_dir=output_dir,
    )
    # Constructing these eagerly surfaces capacity and consistency errors
    # with the config, not deep inside a run.
    config.space_spec()
    config.model_params()
    return config


def parse_config(text: str) -> SimConfig:
    """Parse a JSON config document; errors carry line/section context."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno} "
            f"column {exc.colno}"
        )
    return config_from_dict(raw)


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
