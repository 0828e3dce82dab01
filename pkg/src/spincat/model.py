"""Resonant N-qubit/single-mode model: Hamiltonian, states, timescales.

Natural units throughout: hbar = 1, and the field mass scale is absorbed
so the position quadrature is q = (a + a†)/sqrt(2).  The coupling g sets
the time unit (default g = 1); omega defaults to 10 g so the record's
carrier sits well above the collapse/revival envelope frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import DegenerateCatError, TruncationError
from .hilbert import (
    LinearOperator,
    Representation,
    SpaceSpec,
    build_field_ops,
    build_spin_ops,
    identity_op,
)

COHERENT_LEAKAGE_TOL = 1e-6
CAT_NORM_TOL = 1e-8


class CatParity(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class ModelParams:
    """Resonant model parameters (field and qubit share omega)."""

    omega: float
    g: float
    n_qubits: int

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")


@dataclass(frozen=True)
class Timescales:
    """Characteristic times of the collapse/revival dynamics."""

    rabi: float
    collapse: float
    revival: float
    first_revival: float


def timescales(params: ModelParams, nbar: float) -> Timescales:
    """Rabi, collapse, revival, and first-revival times.

    t_R = pi/(g sqrt(nbar)), t_c = sqrt(2)/g, t_r = 2 pi sqrt(nbar)/g,
    and the N-qubit first revival t_r1 = t_r/N.
    """
    if nbar <= 0:
        raise ValueError(f"nbar must be positive, got {nbar}")
    g = params.g
    t_r = 2.0 * math.pi * math.sqrt(nbar) / g
    return Timescales(
        rabi=math.pi / (g * math.sqrt(nbar)),
        collapse=math.sqrt(2.0) / g,
        revival=t_r,
        first_revival=t_r / params.n_qubits,
    )


@lru_cache(maxsize=None)
def _hamiltonian_cached(params: ModelParams, space: SpaceSpec) -> LinearOperator:
    a, adag, number = build_field_ops(space)
    jz, jplus, jminus = build_spin_ops(space)
    h = (
        params.omega * (number.entries + jz.entries)
        + params.g * (jplus.entries @ a.entries + jminus.entries @ adag.entries)
    )
    return LinearOperator(space, h, hermitian=True)


def build_hamiltonian(params: ModelParams, space: SpaceSpec) -> LinearOperator:
    """H = omega a†a + omega Jz + g (J+ a + J- a†), hbar = 1."""
    if space.n_qubits != params.n_qubits:
        raise ValueError(
            f"space has {space.n_qubits} qubits but params specify "
            f"{params.n_qubits}"
        )
    return _hamiltonian_cached(params, space)


@lru_cache(maxsize=None)
def excitation_number_op(space: SpaceSpec) -> LinearOperator:
    """Conserved total excitation number a†a + Jz + N/2."""
    _, _, number = build_field_ops(space)
    jz, _, _ = build_spin_ops(space)
    shift = 0.5 * space.n_qubits
    return LinearOperator(
        space,
        number.entries + jz.entries + shift * identity_op(space).entries,
        hermitian=True,
    )


def coherent_state(alpha: complex, n_max: int) -> np.ndarray:
    """Truncated coherent field state, renormalized after truncation.

    Amplitudes c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!) computed by the
    stable recurrence c_{n+1} = c_n alpha / sqrt(n+1).  Raises
    TruncationError when the pre-normalization leakage 1 - sum |c_n|^2
    exceeds 1e-6.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    alpha = complex(alpha)
    amps = np.empty(n_max + 1, dtype=complex)
    amps[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(n_max):
        amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1)
    captured = float(np.sum(np.abs(amps) ** 2))
    leakage = 1.0 - captured
    if leakage > COHERENT_LEAKAGE_TOL:
        raise TruncationError(
            f"coherent state |alpha|={abs(alpha):.4g} leaks {leakage:.3e} "
            f"past n_max={n_max}; raise n_max"
        )
    return amps / math.sqrt(captured)


def spin_coherent_state(
    z: complex, n_qubits: int, representation=Representation.SYMMETRIC
) -> np.ndarray:
    """Product state of N qubits all pointing the same way.

    (1+|z|^2)^{-N/2} ⊗_k (|e>_k + z |g>_k); in the Dicke basis the
    amplitude on k ground qubits is sqrt(C(N,k)) z^k (1+|z|^2)^{-N/2}.
    """
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    z = complex(z)
    representation = Representation(representation)
    if representation is Representation.FULL:
        one = np.array([1.0, z], dtype=complex) / math.sqrt(1.0 + abs(z) ** 2)
        vec = one
        for _ in range(n_qubits - 1):
            vec = np.kron(vec, one)
        return vec
    k = np.arange(n_qubits + 1)
    binom = np.array([math.comb(n_qubits, int(kk)) for kk in k], dtype=float)
    vec = np.sqrt(binom) * z**k / (1.0 + abs(z) ** 2) ** (n_qubits / 2.0)
    return vec.astype(complex)


def spin_cat_state(
    z: complex,
    n_qubits: int,
    parity: CatParity = CatParity.MINUS,
    representation=Representation.SYMMETRIC,
) -> np.ndarray:
    """Normalized superposition |z,N> ± |-z,N>.

    The two branches overlap as ((1-|z|^2)/(1+|z|^2))^N, so the state is
    renormalized explicitly rather than carrying a fixed 1/sqrt(2).
    Raises DegenerateCatError when the superposition norm collapses
    (e.g. z = 0 with MINUS parity).
    """
    parity = CatParity(parity)
    sign = 1.0 if parity is CatParity.PLUS else -1.0
    plus = spin_coherent_state(z, n_qubits, representation)
    minus = spin_coherent_state(-z, n_qubits, representation)
    vec = plus + sign * minus
    norm = np.linalg.norm(vec)
    if norm < CAT_NORM_TOL:
        raise DegenerateCatError(
            f"cat superposition norm {norm:.3e} below {CAT_NORM_TOL}; "
            f"branches z={z} and -z coincide for parity {parity.value}"
        )
    return vec / norm
