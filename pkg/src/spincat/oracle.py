"""Independent dense references for validating the trajectory machinery.

Everything here is deliberately small and slow: classical RK4 on dense
matrices with its own error budget, plus the closed-form single-qubit
revival series.  Dimension caps guard against accidental use on spaces
where dense propagation is unaffordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, NumericalGuardError
from .hilbert import (
    Representation,
    SpaceSpec,
    StateVector,
    all_ground_spin_index,
    build_field_ops,
    build_spin_ops,
)

ORACLE_DIM_CAP = 2048
SCHRODINGER_DRIFT_TOL = 1e-10
TRACE_TOL = 1e-8


@dataclass
class DensityMatrix:
    """Dense density operator; Hermiticity and unit trace are verified."""

    space: SpaceSpec
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        dim = self.space.dim
        if self.entries.shape != (dim, dim):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match space "
                f"dimension {dim}"
            )
        if np.abs(self.entries - self.entries.conj().T).max() > 1e-10:
            raise ValueError("density matrix is not Hermitian to 1e-10")
        tr = complex(np.trace(self.entries)).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} deviates from 1")

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(state.space, np.outer(psi, psi.conj()))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


def _check_dim(dim: int):
    if dim > ORACLE_DIM_CAP:
        raise CapacityError(
            f"oracle routines are dense; dimension {dim} exceeds cap "
            f"{ORACLE_DIM_CAP}"
        )


def schrodinger_evolve(
    state: StateVector,
    h,
    dt: float,
    t_final: float,
    output_stride: int = 1,
):
    """Dense RK4 propagation of -iH|psi> with per-step renormalization.

    Returns (times, list of StateVector) sampled every ``output_stride``
    steps, initial state included.
    """
    _check_dim(state.space.dim)
    h_dense = h.to_dense() if hasattr(h, "to_dense") else np.asarray(h, dtype=complex)
    psi = state.amplitudes.copy()
    n_samples = int(math.floor(t_final / (dt * output_stride))) + 1
    times = np.arange(n_samples) * (dt * output_stride)
    states = [StateVector(state.space, psi.copy())]

    def rhs(v):
        return -1j * (h_dense @ v)

    for _ in range(n_samples - 1):
        for _ in range(output_stride):
            k1 = rhs(psi)
            k2 = rhs(psi + 0.5 * dt * k1)
            k3 = rhs(psi + 0.5 * dt * k2)
            k4 = rhs(psi + dt * k3)
            psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            norm = np.linalg.norm(psi)
            if abs(norm - 1.0) > SCHRODINGER_DRIFT_TOL:
                raise NumericalGuardError(
                    f"RK4 norm drift {abs(norm - 1.0):.3e} per step; reduce dt"
                )
            psi = psi / norm
        states.append(StateVector(state.space, psi.copy()))
    return times, states


def lindblad_evolve(
    rho: DensityMatrix,
    h,
    lindblad,
    dt: float,
    t_final: float,
    output_stride: int = 1,
):
    """Dense RK4 integration of the master equation.

    drho/dt = -i[H, rho] + L rho L† - {L†L, rho}/2.  Trace preservation is
    checked to 1e-8 at every sample.  Returns (times, list of
    DensityMatrix).
    """
    _check_dim(rho.space.dim)
    h_d = h.to_dense() if hasattr(h, "to_dense") else np.asarray(h, dtype=complex)
    l_d = (
        lindblad.to_dense()
        if hasattr(lindblad, "to_dense")
        else np.asarray(lindblad, dtype=complex)
    )
    ldag = l_d.conj().T
    ldl = ldag @ l_d
    r = rho.entries.copy()
    n_samples = int(math.floor(t_final / (dt * output_stride))) + 1
    times = np.arange(n_samples) * (dt * output_stride)
    out = [DensityMatrix(rho.space, r.copy())]

    def rhs(m):
        return (
            -1j * (h_d @ m - m @ h_d)
            + l_d @ m @ ldag
            - 0.5 * (ldl @ m + m @ ldl)
        )

    for _ in range(n_samples - 1):
        for _ in range(output_stride):
            k1 = rhs(r)
            k2 = rhs(r + 0.5 * dt * k1)
            k3 = rhs(r + 0.5 * dt * k2)
            k4 = rhs(r + dt * k3)
            r = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = complex(np.trace(r)).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NumericalGuardError(
                f"master-equation trace drifted to {tr!r}; reduce dt"
            )
        out.append(DensityMatrix(rho.space, 0.5 * (r + r.conj().T)))
    return times, out


def jc_analytic_pe(nbar: float, g: float, times) -> np.ndarray:
    """Closed-form excited-state probability of the single-qubit model.

    For one qubit starting in |e> with a coherent field of mean photon
    number nbar:  P_e(t) = (1 + sum_n p_n cos(2 g sqrt(n+1) t)) / 2 with
    Poisson weights p_n, truncated at nbar + 10 sqrt(nbar).
    """
    if nbar <= 0:
        raise ValueError(f"nbar must be positive, got {nbar}")
    times = np.asarray(times, dtype=float)
    n_top = int(math.ceil(nbar + 10.0 * math.sqrt(nbar)))
    n = np.arange(n_top + 1)
    log_p = n * math.log(nbar) - nbar - np.array(
        [math.lgamma(k + 1.0) for k in n]
    )
    weights = np.exp(log_p)
    freqs = 2.0 * g * np.sqrt(n + 1.0)
    osc = weights[None, :] * np.cos(np.outer(times, freqs))
    return 0.5 * (1.0 + osc.sum(axis=1))


@dataclass
class CrossRepReport:
    max_dev_p_all_ground: float
    max_dev_jz: float
    max_dev_n: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            max(self.max_dev_p_all_ground, self.max_dev_jz, self.max_dev_n)
            < self.tolerance
        )


def cross_representation_check(config, tolerance: float = 1e-8) -> CrossRepReport:
    """Evolve the unmeasured model in both spin layouts and compare.

    Requires N <= 4 and n_max <= 15 so the full tensor-product layout
    stays affordable, and reports the maximum deviation of p_all_ground,
    <Jz>, and <a†a> along the trajectory.
    """
    base = config.space_spec()
    if base.n_qubits > 4 or base.n_max > 15:
        raise CapacityError(
            "cross-representation check requires N <= 4 and n_max <= 15"
        )
    integ = config.integration_params()
    params = config.model_params()
    devs = {}
    series = {}
    from .model import build_hamiltonian

    for rep in (Representation.FULL, Representation.SYMMETRIC):
        space = SpaceSpec(base.n_max, base.n_qubits, rep)
        h = build_hamiltonian(params, space)
        psi0 = config.initial_state(space)
        # RK4 needs a much smaller step than the split integrator: keep
        # |H| dt below 0.02 so the per-step norm drift stays within 1e-10.
        dt_sample = integ.dt * integ.output_stride
        h_scale = float(np.abs(h.to_dense()).sum(axis=1).max())
        per_sample = max(1, int(math.ceil(dt_sample * h_scale / 0.02)))
        _, states = schrodinger_evolve(
            psi0, h, dt_sample / per_sample, integ.t_final, per_sample
        )
        jz = build_spin_ops(space)[0]
        num = build_field_ops(space)[2]
        g_idx = all_ground_spin_index(space)
        p = np.array(
            [
                np.sum(np.abs(s.amplitudes[g_idx :: space.spin_dim]) ** 2)
                for s in states
            ]
        )
        jz_t = np.array(
            [np.vdot(s.amplitudes, jz.apply(s.amplitudes)).real for s in states]
        )
        n_t = np.array(
            [np.vdot(s.amplitudes, num.apply(s.amplitudes)).real for s in states]
        )
        series[rep] = (p, jz_t, n_t)
    for i, name in enumerate(("p", "jz", "n")):
        devs[name] = float(
            np.abs(series[Representation.FULL][i] - series[Representation.SYMMETRIC][i]).max()
        )
    return CrossRepReport(
        max_dev_p_all_ground=devs["p"],
        max_dev_jz=devs["jz"],
        max_dev_n=devs["n"],
        tolerance=tolerance,
    )
