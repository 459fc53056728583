"""Wigner function on a rectangular phase-space grid.

The Wigner function is evaluated through displaced parity,

    W(x, p) = (1/pi) * Tr[ D(alpha)^dag rho D(alpha) Pi ],   alpha = (x + i p)/sqrt(2),

normalized so that the Riemann sum over dx dp is 1, the vacuum peaks at
1/pi, and pi * W(0, 0) equals the parity expectation <Pi>.

Displacements are applied exactly in the truncated space through the polar
factorization D(alpha) = R exp(-i sqrt(2) |alpha| P) R^dag with
R = exp(i arg(alpha) n): one eigendecomposition of the momentum quadrature
serves every grid point, and whole grid chunks reduce to two matrix-matrix
products.  Mixed states are expanded over their significant eigenvectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .fock import QuantumState

__all__ = [
    "DEFAULT_GRID",
    "GridCoverageWarning",
    "PhaseGrid",
    "parity_expectation",
    "position_distribution",
    "wigner",
]

# Boundary |W| above this suggests the grid clips the state's support.
BOUNDARY_TOL = 1e-4

# Mixed-state eigenvalues below this total weight are dropped; each
# eigenvector contributes at most weight/pi to W pointwise.
EIGENVALUE_CUTOFF = 1e-12

_CHUNK = 2048


def _support_level(populations: np.ndarray, cutoff: float) -> int:
    # highest Fock level still holding more than `cutoff` of the population
    tail = np.cumsum(populations[::-1])[::-1]
    above = np.nonzero(tail > cutoff)[0]
    return int(above[-1]) if above.size else 0


def _working_dim(dim: int, alpha_max: float, support: int) -> int:
    # Displacing a state whose support ends near level n_s by alpha moves its
    # radius to sqrt(n_s) + |alpha| in phase space; (that + 4)^2 Fock levels
    # keep the displaced parity unbiased.  States are zero-padded up to this,
    # which leaves them unchanged.
    need = int(math.ceil((math.sqrt(support + 1.0) + alpha_max + 4.0) ** 2))
    return max(dim, 16 * math.ceil(need / 16))


class GridCoverageWarning(UserWarning):
    """The phase-space grid does not appear to cover the state's support."""


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular (x, p) grid; values are row-major in x."""

    x_range: tuple[float, float] = (-5.0, 5.0)
    p_range: tuple[float, float] = (-5.0, 5.0)
    nx: int = 201
    np: int = 201

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("x_range", self.x_range), ("p_range", self.p_range)):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a finite (min, max) pair with min < max")
        if self.nx < 8 or self.np < 8:
            raise ValueError(f"grid must have at least 8 points per axis, got {self.nx}x{self.np}")

    @property
    def x_values(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.nx)

    @property
    def p_values(self) -> np.ndarray:
        return np.linspace(self.p_range[0], self.p_range[1], self.np)

    @property
    def x_step(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / (self.nx - 1)

    @property
    def p_step(self) -> float:
        return (self.p_range[1] - self.p_range[0]) / (self.np - 1)


DEFAULT_GRID = PhaseGrid()


@lru_cache(maxsize=8)
def _displacement_basis(dim: int):
    """Eigenbasis of P plus the parity operator expressed in it."""
    lam, vp = np.linalg.eigh(fock.momentum(dim).matrix)
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    t = (vp.conj().T * signs) @ vp
    for arr in (lam, vp, t):
        arr.setflags(write=False)
    return lam, vp, t


def _wigner_components(
    vectors: np.ndarray,
    weights: np.ndarray,
    dim: int,
    abs_alpha: np.ndarray,
    phase_alpha: np.ndarray,
) -> np.ndarray:
    """Weighted sum of <v_j| D Pi D^dag |v_j> over flattened grid points."""
    lam, vp, t = _displacement_basis(dim)
    vph = vp.conj().T
    n_vec = np.arange(dim)
    out = np.zeros(abs_alpha.size)
    for start in range(0, abs_alpha.size, _CHUNK):
        sl = slice(start, min(start + _CHUNK, abs_alpha.size))
        # R^dag per point, shared across eigenvectors of rho.
        rot = np.exp(-1j * np.outer(n_vec, phase_alpha[sl]))
        kick = np.exp(1j * np.sqrt(2.0) * np.outer(lam, abs_alpha[sl]))
        acc = np.zeros(rot.shape[1])
        for w, vec in zip(weights, vectors):
            c = vph @ (vec[:, None] * rot)
            c *= kick
            acc += w * np.einsum("ij,ij->j", c.conj(), t @ c).real
        out[sl] = acc
    return out


def wigner(state: QuantumState, grid: PhaseGrid = DEFAULT_GRID) -> np.ndarray:
    """Wigner function as an (nx, np) array with W[i, j] = W(x_i, p_j).

    Warns with GridCoverageWarning when |W| on the boundary exceeds
    BOUNDARY_TOL, since a clipped grid breaks normalization checks.
    """
    x = grid.x_values
    p = grid.p_values
    alpha = (x[:, None] + 1j * p[None, :]) / np.sqrt(2.0)
    abs_alpha = np.abs(alpha).ravel()
    phase_alpha = np.angle(alpha).ravel()
    support = _support_level(state.populations(), EIGENVALUE_CUTOFF)
    dim = _working_dim(state.dim, float(abs_alpha.max()), support)

    if state.kind == "pure":
        vectors = state.ket[None, :]
        weights = np.ones(1)
    else:
        evals, evecs = np.linalg.eigh(state.density_matrix())
        keep = evals > EIGENVALUE_CUTOFF
        vectors = evecs.T[keep]
        weights = evals[keep]
    if dim > state.dim:
        vectors = np.pad(vectors, ((0, 0), (0, dim - state.dim)))

    values = _wigner_components(vectors, weights, dim, abs_alpha, phase_alpha) / np.pi
    w = values.reshape(grid.nx, grid.np)

    edge = max(
        np.abs(w[0, :]).max(),
        np.abs(w[-1, :]).max(),
        np.abs(w[:, 0]).max(),
        np.abs(w[:, -1]).max(),
    )
    if edge > BOUNDARY_TOL:
        warnings.warn(
            f"Wigner boundary magnitude {edge:.2e} exceeds {BOUNDARY_TOL:.0e}; "
            "enlarge the grid to cover the state",
            GridCoverageWarning,
            stacklevel=2,
        )
    return w


def parity_expectation(state: QuantumState) -> float:
    """<Pi>; equals pi * W(0, 0)."""
    return fock.expectation(state, fock.parity(state.dim)).real


def position_distribution(state: QuantumState, x: np.ndarray) -> np.ndarray:
    """Probability density of the X quadrature at the given points.

    Uses the normalized Hermite-function recurrence, which is stable in the
    classically allowed region; matches the p-integrated Wigner marginal.
    """
    x = np.asarray(x, dtype=float)
    dim = state.dim
    phi = np.empty((dim, x.size))
    phi[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if dim > 1:
        phi[1] = np.sqrt(2.0) * x * phi[0]
    for n in range(2, dim):
        phi[n] = x * np.sqrt(2.0 / n) * phi[n - 1] - np.sqrt((n - 1) / n) * phi[n - 2]
    if state.kind == "pure":
        amp = phi.T @ state.ket
        return np.abs(amp) ** 2
    return np.einsum("ik,ij,jk->k", phi, state.density_matrix(), phi).real
