"""Truncated multi-mode Fock space: states, ladder operators, expectation values.

The Hilbert space is a tensor product of four bosonic modes in the fixed order
(a, b, A, B).  Lower-case modes are the fundamental beams, upper-case modes
their second-harmonic partners.  Mode m with cutoff n_m keeps the number
states |0>..|n_m - 1>, and the basis index is row-major over occupation
tuples::

    index = ((k_a * n_b + k_b) * n_A + k_A) * n_B + k_B

so indices appearing in reports are reproducible.

Truncation policy: the creation operator silently annihilates the top Fock
level.  Any check that is sensitive to that edge must go through
:func:`interior_projector` instead of assuming exact canonical algebra.

States and operators are immutable after construction and all operations are
pure, so they are safe for concurrent read-only use by sweep workers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

MODES = ("a", "b", "A", "B")

NORM_TOL = 1e-12


@dataclass(frozen=True)
class FockDims:
    """Per-mode Fock cutoffs; mode m keeps occupations 0..cutoff-1."""

    n_a: int
    n_b: int
    n_A: int
    n_B: int

    def __post_init__(self):
        for mode, n in zip(MODES, self.shape):
            if int(n) != n or n < 2:
                raise ValueError(f"cutoff for mode {mode!r} must be an integer >= 2, got {n}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n_a, self.n_b, self.n_A, self.n_B)

    @property
    def total(self) -> int:
        return self.n_a * self.n_b * self.n_A * self.n_B

    def axis(self, mode: str) -> int:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
        return MODES.index(mode)

    def cutoff(self, mode: str) -> int:
        return self.shape[self.axis(mode)]

    def index_of(self, occupation: Iterable[int]) -> int:
        return int(np.ravel_multi_index(tuple(occupation), self.shape))

    def occupation_of(self, index: int) -> tuple[int, int, int, int]:
        return tuple(int(k) for k in np.unravel_index(index, self.shape))

    def grown(self, extra: int) -> "FockDims":
        """Same space with every cutoff increased by `extra` (for convergence sweeps)."""
        return FockDims(*(n + extra for n in self.shape))


def _require_same_dims(x, y) -> None:
    if x.dims != y.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")


@dataclass(frozen=True)
class QState:
    """Normalized complex amplitude vector over the truncated Fock basis."""

    amplitudes: np.ndarray
    dims: FockDims

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.dims.total,):
            raise ValueError(f"amplitude vector has shape {amp.shape}, expected ({self.dims.total},)")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOL}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @staticmethod
    def normalized(vector: np.ndarray, dims: FockDims) -> "QState":
        vec = np.asarray(vector, dtype=complex)
        norm = np.linalg.norm(vec)
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return QState(vec / norm, dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class QOperator:
    """Sparse complex matrix acting on a QState's space.

    Closed under add, scale, multiply and adjoint.  Instances are treated as
    immutable; none of the methods mutate `matrix`.
    """

    matrix: sp.csr_matrix
    dims: FockDims

    def __post_init__(self):
        m = self.matrix.tocsr() if not sp.isspmatrix_csr(self.matrix) else self.matrix
        if m.dtype != np.complex128:
            m = m.astype(np.complex128)
        if m.shape != (self.dims.total, self.dims.total):
            raise ValueError(f"matrix shape {m.shape} does not match dims total {self.dims.total}")
        object.__setattr__(self, "matrix", m)

    def __add__(self, other: "QOperator") -> "QOperator":
        _require_same_dims(self, other)
        return QOperator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: "QOperator") -> "QOperator":
        _require_same_dims(self, other)
        return QOperator(self.matrix - other.matrix, self.dims)

    def __neg__(self) -> "QOperator":
        return QOperator(-self.matrix, self.dims)

    def __mul__(self, scalar) -> "QOperator":
        return QOperator(self.matrix * complex(scalar), self.dims)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "QOperator":
        return QOperator(self.matrix / complex(scalar), self.dims)

    def __matmul__(self, other: "QOperator") -> "QOperator":
        _require_same_dims(self, other)
        return QOperator(self.matrix @ other.matrix, self.dims)

    def adjoint(self) -> "QOperator":
        return QOperator(self.matrix.conjugate().transpose().tocsr(), self.dims)

    def apply(self, state: QState) -> np.ndarray:
        _require_same_dims(self, state)
        return self.matrix @ state.amplitudes

    def max_abs(self) -> float:
        if self.matrix.nnz == 0:
            return 0.0
        return float(np.abs(self.matrix.data).max())

    def spectral_norm(self) -> float:
        """Largest singular value.

        Dense SVD below ~500 dimensions; above that a Lanczos solve with a
        fixed start vector, so repeated runs stay bit-identical.
        """
        m = self.matrix
        if m.nnz == 0 or self.max_abs() == 0.0:
            return 0.0
        n = m.shape[0]
        if n <= 512:
            return float(np.linalg.norm(m.toarray(), 2))
        v0 = np.ones(n, dtype=float)
        try:
            s = svds(m, k=1, v0=v0, return_singular_vectors=False, maxiter=5000)
            return float(s[0])
        except Exception:
            return float(np.linalg.norm(m.toarray(), 2))


# ---------------------------------------------------------------------------
# constructors


def vacuum(dims: FockDims) -> QState:
    """All modes in |0>."""
    amp = np.zeros(dims.total, dtype=complex)
    amp[dims.index_of((0, 0, 0, 0))] = 1.0
    return QState(amp, dims)


def fock_state(dims: FockDims, occupation: Iterable[int]) -> QState:
    """Number state |k_a, k_b, k_A, k_B>."""
    occ = tuple(int(k) for k in occupation)
    for mode, k, n in zip(MODES, occ, dims.shape):
        if not 0 <= k < n:
            raise ValueError(f"occupation {k} out of range for mode {mode!r} with cutoff {n}")
    amp = np.zeros(dims.total, dtype=complex)
    amp[dims.index_of(occ)] = 1.0
    return QState(amp, dims)


def poisson_tail(cutoff: int, mean: float) -> float:
    """Tail mass sum_{k >= cutoff} exp(-mean) mean^k / k!, summed directly."""
    if mean < 0:
        raise ValueError("mean must be nonnegative")
    if mean == 0.0:
        return 0.0
    log_term = -mean + cutoff * math.log(mean) - math.lgamma(cutoff + 1)
    term = math.exp(log_term)
    total = 0.0
    k = cutoff
    # terms eventually decay geometrically once k > mean
    while term > 1e-30 * max(total, 1e-300) or k <= mean + 1:
        total += term
        k += 1
        term *= mean / k
        if k > cutoff + 10000:
            break
    return total


def _coherent_weights(n: int, alpha: complex) -> np.ndarray:
    w = np.zeros(n, dtype=complex)
    w[0] = 1.0
    for k in range(1, n):
        w[k] = w[k - 1] * alpha / math.sqrt(k)
    return w


def coherent(dims: FockDims, mode: str, alpha: complex) -> tuple[QState, float]:
    """Truncated coherent state on one mode, vacuum on the others.

    The amplitudes alpha^k / sqrt(k!) are renormalized after truncation; the
    discarded Poisson tail mass is returned as `leakage` so callers can judge
    whether the cutoff was adequate.
    """
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError(f"coherent amplitude must be finite, got {alpha!r}")
    axis = dims.axis(mode)
    vecs = []
    for ax, n in enumerate(dims.shape):
        if ax == axis:
            vecs.append(_coherent_weights(n, alpha))
        else:
            e0 = np.zeros(n, dtype=complex)
            e0[0] = 1.0
            vecs.append(e0)
    amp = reduce(np.multiply.outer, vecs).ravel(order="C")
    leakage = poisson_tail(dims.cutoff(mode), abs(alpha) ** 2)
    return QState.normalized(amp, dims), leakage


def multimode_coherent(dims: FockDims, alphas: Mapping[str, complex]) -> tuple[QState, dict[str, float]]:
    """Product of truncated coherent states; modes absent from `alphas` stay in vacuum."""
    vecs = []
    leakages: dict[str, float] = {}
    for mode, n in zip(MODES, dims.shape):
        alpha = complex(alphas.get(mode, 0.0))
        if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
            raise ValueError(f"coherent amplitude must be finite, got {alpha!r} for mode {mode!r}")
        vecs.append(_coherent_weights(n, alpha))
        leakages[mode] = poisson_tail(n, abs(alpha) ** 2)
    amp = reduce(np.multiply.outer, vecs).ravel(order="C")
    return QState.normalized(amp, dims), leakages


# ---------------------------------------------------------------------------
# operators


@lru_cache(maxsize=None)
def _single_mode_annihilation(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, format="csr").astype(np.complex128)


@lru_cache(maxsize=None)
def _ladder_matrix(dims: FockDims, mode: str, kind: str) -> sp.csr_matrix:
    axis = dims.axis(mode)
    factors = []
    for ax, n in enumerate(dims.shape):
        if ax == axis:
            single = _single_mode_annihilation(n)
            factors.append(single.conjugate().transpose().tocsr() if kind == "create" else single)
        else:
            factors.append(sp.identity(n, dtype=np.complex128, format="csr"))
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)


def ladder(dims: FockDims, mode: str, kind: str = "annihilate") -> QOperator:
    """Annihilation (|k> -> sqrt(k)|k-1>) or creation operator on one mode.

    Creation acting on the top level |cutoff-1> gives zero by truncation.
    """
    if kind not in ("annihilate", "create"):
        raise ValueError(f"kind must be 'annihilate' or 'create', got {kind!r}")
    return QOperator(_ladder_matrix(dims, mode, kind), dims)


def identity(dims: FockDims) -> QOperator:
    return QOperator(sp.identity(dims.total, dtype=np.complex128, format="csr"), dims)


def number_op(dims: FockDims, mode: str) -> QOperator:
    return ladder(dims, mode, "create") @ ladder(dims, mode, "annihilate")


@lru_cache(maxsize=None)
def interior_indices(dims: FockDims, margin: int) -> tuple[int, ...]:
    """Basis indices whose every mode occupation is <= cutoff - 1 - margin."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    grids = np.indices(dims.shape).reshape(4, -1)
    keep = np.ones(dims.total, dtype=bool)
    for ax, n in enumerate(dims.shape):
        keep &= grids[ax] <= n - 1 - margin
    return tuple(int(i) for i in np.nonzero(keep)[0])


def interior_projector(dims: FockDims, margin: int) -> QOperator:
    """Projector onto states with every occupation at least `margin` below the cutoff."""
    diag = np.zeros(dims.total, dtype=np.complex128)
    idx = interior_indices(dims, margin)
    diag[list(idx)] = 1.0
    return QOperator(sp.diags(diag, format="csr"), dims)


def projected(op: QOperator, margin: int) -> QOperator:
    p = interior_projector(op.dims, margin)
    return p @ op @ p


# ---------------------------------------------------------------------------
# expectation values


def overlap(bra: QState, ket: QState) -> complex:
    _require_same_dims(bra, ket)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def expect(state: QState, op: QOperator) -> complex:
    """<psi|M|psi>."""
    _require_same_dims(state, op)
    return complex(np.vdot(state.amplitudes, op.apply(state)))


def variance(state: QState, op: QOperator) -> float:
    """<M^2> - <M>^2 for a (self-adjoint) operator; the real part is returned.

    For self-adjoint M the imaginary part is rounding noise at the 1e-10
    level or below; callers needing complex second moments should use
    :func:`expect` directly.
    """
    _require_same_dims(state, op)
    v = op.apply(state)
    mean = complex(np.vdot(state.amplitudes, v))
    second = complex(np.vdot(state.amplitudes, op.matrix @ v))
    return float((second - mean * mean).real)


def is_finite_complex(value: complex) -> bool:
    return cmath.isfinite(complex(value))
