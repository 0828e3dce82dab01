"""Truncated field ⊗ multi-qubit Hilbert space and operator algebra.

Two layouts for the spin factor are supported:

* ``FULL`` — plain tensor product of N qubits, dimension 2^N.  Per-qubit
  basis order is (|e>, |g>), qubit 0 being the leftmost (most significant)
  factor.
* ``SYMMETRIC`` — permutation-symmetric (Dicke) subspace with collective
  spin j = N/2, dimension N+1.  Basis index k counts ground-state qubits,
  so k=0 is |e...e> and k=N is |g...g>; the Jz eigenvalue is m = N/2 - k.

Composite indices are field-major: index = fock_index * spin_dim + spin_index.
This ordering is fixed so serialized states stay portable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import sparse

from .errors import (
    CapacityError,
    NumericalGuardError,
    RepresentationError,
    SpaceMismatchError,
)

HERMITICITY_TOL = 1e-12
SYMMETRY_RESIDUAL_TOL = 1e-10
NORM_TOL = 1e-12


class Representation(str, Enum):
    FULL = "full"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class SpaceSpec:
    """Immutable description of the composite field ⊗ spin space.

    Parameters
    ----------
    n_max : highest retained Fock level (field dimension is n_max + 1).
    n_qubits : number of two-level systems N.
    representation : spin-factor layout, FULL or SYMMETRIC.
    max_dim : memory cap on the composite dimension; exceeding it raises
        CapacityError at construction time.
    """

    n_max: int
    n_qubits: int
    representation: Representation = Representation.SYMMETRIC
    max_dim: int = field(default=65536, compare=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        object.__setattr__(
            self, "representation", Representation(self.representation)
        )
        if self.dim > self.max_dim:
            raise CapacityError(
                f"composite dimension {self.dim} exceeds cap {self.max_dim} "
                f"(n_max={self.n_max}, N={self.n_qubits}, "
                f"{self.representation.value} representation)"
            )

    @property
    def field_dim(self) -> int:
        return self.n_max + 1

    @property
    def spin_dim(self) -> int:
        if self.representation is Representation.FULL:
            return 2**self.n_qubits
        return self.n_qubits + 1

    @property
    def dim(self) -> int:
        return self.field_dim * self.spin_dim


@dataclass
class StateVector:
    """Complex amplitude vector over a composite space."""

    space: SpaceSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.space.dim,):
            raise SpaceMismatchError(
                f"amplitude vector of length {self.amplitudes.shape} does not "
                f"match space dimension {self.space.dim}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)


def assert_normalized(state: StateVector, tol: float = NORM_TOL):
    if abs(state.norm - 1.0) > tol:
        raise NumericalGuardError(
            f"state norm {state.norm!r} deviates from 1 by more than {tol}"
        )


class LinearOperator:
    """Sparse complex matrix tied to a SpaceSpec.

    When ``hermitian=True`` the matrix is verified against its adjoint at
    construction (max entry deviation below 1e-12).
    """

    def __init__(self, space: SpaceSpec, entries, hermitian: bool = False):
        self.space = space
        self.entries = sparse.csr_matrix(entries, dtype=complex)
        if self.entries.shape != (space.dim, space.dim):
            raise SpaceMismatchError(
                f"operator shape {self.entries.shape} does not match "
                f"space dimension {space.dim}"
            )
        self.hermitian = bool(hermitian)
        if self.hermitian:
            dev = self.entries - self.entries.getH()
            if dev.nnz and abs(dev.data).max() > HERMITICITY_TOL:
                raise ValueError(
                    "operator flagged Hermitian deviates from its adjoint by "
                    f"{abs(dev.data).max():.3e}"
                )
        self._adjoint = None

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.entries @ vec

    def adjoint(self) -> "LinearOperator":
        if self.hermitian:
            return self
        if self._adjoint is None:
            self._adjoint = LinearOperator(self.space, self.entries.getH())
        return self._adjoint

    def scaled(self, c: complex) -> "LinearOperator":
        herm = self.hermitian and complex(c).imag == 0.0
        return LinearOperator(self.space, self.entries * c, hermitian=herm)

    def to_dense(self) -> np.ndarray:
        return self.entries.toarray()

    def __matmul__(self, other: "LinearOperator") -> "LinearOperator":
        if self.space != other.space:
            raise SpaceMismatchError("operator product across different spaces")
        return LinearOperator(self.space, self.entries @ other.entries)


def _field_annihilation(n_max: int) -> sparse.csr_matrix:
    # <n|a|n+1> = sqrt(n+1)
    vals = np.sqrt(np.arange(1, n_max + 1))
    return sparse.diags(vals, offsets=1, format="csr").astype(complex)


def _qubit_site_op(op2: np.ndarray, site: int, n_qubits: int) -> sparse.csr_matrix:
    left = sparse.identity(2**site, dtype=complex, format="csr")
    right = sparse.identity(2 ** (n_qubits - site - 1), dtype=complex, format="csr")
    return sparse.kron(sparse.kron(left, sparse.csr_matrix(op2)), right, format="csr")


@lru_cache(maxsize=None)
def _spin_factor_ops(n_qubits: int, representation: Representation):
    """(jz, jplus) on the bare spin factor, without the field identity."""
    if representation is Representation.FULL:
        sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
        sp = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |e><g|
        dim = 2**n_qubits
        jz = sparse.csr_matrix((dim, dim), dtype=complex)
        jplus = sparse.csr_matrix((dim, dim), dtype=complex)
        for k in range(n_qubits):
            jz = jz + 0.5 * _qubit_site_op(sz, k, n_qubits)
            jplus = jplus + _qubit_site_op(sp, k, n_qubits)
        return jz.tocsr(), jplus.tocsr()
    # Dicke basis, j = N/2, index k = number of ground qubits, m = j - k.
    j = n_qubits / 2.0
    m = j - np.arange(n_qubits + 1)
    jz = sparse.diags(m.astype(complex), format="csr")
    # J+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>, i.e. k -> k-1.
    raise_elem = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jplus = sparse.diags(raise_elem.astype(complex), offsets=1, format="csr")
    return jz, jplus


@lru_cache(maxsize=None)
def build_field_ops(space: SpaceSpec):
    """Ladder and number operators of the field mode on the composite space.

    Returns (annihilation, creation, number), each identity-extended over
    the spin factor.
    """
    a1 = _field_annihilation(space.n_max)
    eye_s = sparse.identity(space.spin_dim, dtype=complex, format="csr")
    a = sparse.kron(a1, eye_s, format="csr")
    annihilation = LinearOperator(space, a)
    creation = LinearOperator(space, a.getH())
    number = LinearOperator(space, a.getH() @ a, hermitian=True)
    return annihilation, creation, number


@lru_cache(maxsize=None)
def build_spin_ops(space: SpaceSpec):
    """Collective spin operators (jz, jplus, jminus) on the composite space.

    jz = (1/2) sum_k sigma_z^k, jplus = sum_k sigma_+^k, jminus = jplus†,
    identity-extended over the field factor.
    """
    jz_s, jp_s = _spin_factor_ops(space.n_qubits, space.representation)
    eye_f = sparse.identity(space.field_dim, dtype=complex, format="csr")
    jz = LinearOperator(space, sparse.kron(eye_f, jz_s, format="csr"), hermitian=True)
    jplus = LinearOperator(space, sparse.kron(eye_f, jp_s, format="csr"))
    jminus = jplus.adjoint()
    return jz, jplus, jminus


@lru_cache(maxsize=None)
def identity_op(space: SpaceSpec) -> LinearOperator:
    return LinearOperator(
        space, sparse.identity(space.dim, dtype=complex, format="csr"), hermitian=True
    )


@lru_cache(maxsize=None)
def position_op(space: SpaceSpec) -> LinearOperator:
    """Field position quadrature (a + a†)/sqrt(2) in natural units."""
    a, adag, _ = build_field_ops(space)
    return LinearOperator(
        space, (a.entries + adag.entries) / math.sqrt(2.0), hermitian=True
    )


@lru_cache(maxsize=None)
def collective_spin_flip(space: SpaceSpec) -> LinearOperator:
    """Product of per-qubit diag(1, -1) phase flips, extended over the field.

    Maps the spin coherent parameter z to -z, so cat superpositions
    |z,N> ± |-z,N> are its ±1 eigenstates for every z and N.  In the Dicke
    basis it is diagonal with entries (-1)^k.
    """
    if space.representation is Representation.FULL:
        signs = np.array(
            [(-1.0) ** bin(s).count("1") for s in range(space.spin_dim)],
            dtype=complex,
        )
    else:
        signs = (-1.0) ** np.arange(space.spin_dim)
    eye_f = sparse.identity(space.field_dim, dtype=complex, format="csr")
    flip = sparse.kron(eye_f, sparse.diags(signs.astype(complex)), format="csr")
    return LinearOperator(space, flip, hermitian=True)


def expectation(state: StateVector, op: LinearOperator) -> complex:
    """<psi|O|psi> for a normalized state.

    For Hermitian-flagged operators the imaginary residual is checked
    against 1e-10.
    """
    if state.space != op.space:
        raise SpaceMismatchError("state and operator live on different spaces")
    assert_normalized(state)
    val = complex(np.vdot(state.amplitudes, op.apply(state.amplitudes)))
    if op.hermitian and abs(val.imag) > 1e-10:
        raise NumericalGuardError(
            f"Hermitian expectation has imaginary residual {val.imag:.3e}"
        )
    return val


@lru_cache(maxsize=None)
def dicke_projection(n_qubits: int) -> sparse.csr_matrix:
    """(N+1) x 2^N map from the full spin basis onto Dicke coefficients.

    Row k collects the 2^N basis states with k ground qubits, weighted
    1/sqrt(C(N,k)); its transpose expands Dicke coefficients back into the
    full basis.
    """
    rows, cols, vals = [], [], []
    for s in range(2**n_qubits):
        k = bin(s).count("1")
        rows.append(k)
        cols.append(s)
        vals.append(1.0 / math.sqrt(math.comb(n_qubits, k)))
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n_qubits + 1, 2**n_qubits), dtype=complex
    )


def spin_to_symmetric(vec: np.ndarray, n_qubits: int) -> np.ndarray:
    """Project a full-basis spin vector onto Dicke coefficients.

    Raises RepresentationError when the projection residual exceeds 1e-10
    relative to the input norm (the input was not permutation-symmetric).
    """
    vec = np.asarray(vec, dtype=complex)
    proj = dicke_projection(n_qubits)
    coeff = proj @ vec
    residual = np.linalg.norm(vec - proj.getH() @ coeff)
    scale = max(np.linalg.norm(vec), 1e-300)
    if residual / scale > SYMMETRY_RESIDUAL_TOL:
        raise RepresentationError(
            f"spin state is not permutation-symmetric "
            f"(projection residual {residual / scale:.3e})"
        )
    return coeff


def spin_to_full(vec: np.ndarray, n_qubits: int) -> np.ndarray:
    """Expand Dicke coefficients into the full 2^N spin basis."""
    vec = np.asarray(vec, dtype=complex)
    return dicke_projection(n_qubits).getH() @ vec


def embed_product(
    field_state: np.ndarray, spin_state: np.ndarray, space: SpaceSpec
) -> StateVector:
    """Field-major tensor product |field> ⊗ |spin>, renormalized.

    The spin factor may be given in either layout: a full-basis vector
    handed to a SYMMETRIC space is projected (raising RepresentationError
    when it is not symmetric), and a Dicke vector handed to a FULL space is
    expanded.
    """
    field_state = np.asarray(field_state, dtype=complex)
    spin_state = np.asarray(spin_state, dtype=complex)
    if field_state.shape != (space.field_dim,):
        raise SpaceMismatchError(
            f"field factor has length {field_state.shape}, expected {space.field_dim}"
        )
    n = space.n_qubits
    if spin_state.shape == (space.spin_dim,):
        pass
    elif (
        space.representation is Representation.SYMMETRIC
        and spin_state.shape == (2**n,)
    ):
        spin_state = spin_to_symmetric(spin_state, n)
    elif space.representation is Representation.FULL and spin_state.shape == (n + 1,):
        spin_state = spin_to_full(spin_state, n)
    else:
        raise SpaceMismatchError(
            f"spin factor has length {spin_state.shape}, expected {space.spin_dim}"
        )
    return StateVector(space, np.kron(field_state, spin_state)).normalized()


def convert_state(state: StateVector, representation: Representation) -> StateVector:
    """Re-express a state in the other spin-factor layout (same physics)."""
    representation = Representation(representation)
    if representation is state.space.representation:
        return state
    n = state.space.n_qubits
    target = SpaceSpec(state.space.n_max, n, representation,
                       max_dim=state.space.max_dim)
    block = state.amplitudes.reshape(state.space.field_dim, state.space.spin_dim)
    if representation is Representation.SYMMETRIC:
        proj = dicke_projection(n)
        converted = block @ proj.toarray().T
        residual = np.linalg.norm(block - converted @ proj.toarray().conj())
        if residual > SYMMETRY_RESIDUAL_TOL:
            raise RepresentationError(
                f"state has weight {residual:.3e} outside the symmetric subspace"
            )
    else:
        converted = block @ dicke_projection(n).toarray().conj()
    return StateVector(target, converted.reshape(-1))


def all_ground_spin_index(space: SpaceSpec) -> int:
    """Spin-factor index of |g...g> in the given layout."""
    if space.representation is Representation.FULL:
        return space.spin_dim - 1
    return space.n_qubits
