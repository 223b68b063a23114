"""Kronecker-sum operators and full system construction.

The Galerkin matrix of both test problems is a sum of Kronecker products
A = sum_i G_i (x) K_i with small sparse parametric factors G and FE
stiffness factors K.  The operator is kept matrix-free: a matvec costs
one sparse K-product per term plus one sparse G-product, never forming
the ny*nx matrix.  Dense materialization exists only as a small-scale
test and spectral-study oracle behind a size guard.

Vectors use the block layout v = [v_1; ...; v_ny] with block j holding
the nx spatial coefficients of parametric basis function j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem2d, gram, multiindex
from .fem2d import CoefficientField, UniformMesh
from .multiindex import MultiIndexSet
from .orthopoly import LEGENDRE

DENSE_GUARD = 20000


def as_blocks(v: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """View the flat block vector as an (nx, ny) matrix, block j = column j."""
    if v.shape != (nx * ny,):
        raise ValueError(f"expected flat vector of length {nx * ny}, got {v.shape}")
    return v.reshape(ny, nx).T


def from_blocks(V: np.ndarray) -> np.ndarray:
    """Inverse of :func:`as_blocks`."""
    return V.T.ravel()


@dataclass(frozen=True)
class KroneckerSumOperator:
    terms: tuple[tuple[sp.csr_matrix, sp.csr_matrix], ...]
    ny: int
    nx: int

    @property
    def dim(self) -> int:
        return self.ny * self.nx

    def matvec(self, v: np.ndarray) -> np.ndarray:
        V = as_blocks(v, self.nx, self.ny)
        out = np.zeros((self.ny, self.nx))
        for G, K in self.terms:
            W = K @ V  # (nx, ny)
            out += G @ W.T  # G symmetric
        return out.ravel()


def matvec(op: KroneckerSumOperator, v: np.ndarray) -> np.ndarray:
    return op.matvec(v)


def assemble_dense(op: KroneckerSumOperator) -> np.ndarray:
    """Explicit sum of Kronecker products; guarded against memory blowup."""
    if op.dim > DENSE_GUARD:
        raise ValueError(f"dense assembly refused for dimension {op.dim} > {DENSE_GUARD}")
    A = np.zeros((op.dim, op.dim))
    for G, K in op.terms:
        A += np.kron(G.toarray(), K.toarray())
    return A


def assemble_sparse(op: KroneckerSumOperator) -> sp.csc_matrix:
    """Explicit sparse sum of Kronecker products (direct-factorization support)."""
    A = sp.csc_matrix((op.dim, op.dim))
    for G, K in op.terms:
        A = A + sp.kron(G, K, format="csc")
    A.sort_indices()
    return A


# ---------------------------------------------------------------------------
# affine-parametric system


@dataclass(frozen=True)
class AffineContext:
    index_set: MultiIndexSet
    mesh: UniformMesh
    fields: tuple[CoefficientField, ...]  # a_0 .. a_M
    norm_table: tuple[float, ...]  # ||a_m||_inf for m = 1..M
    tau_table: tuple[float, ...]  # tau_0 .. tau_M
    a0_min: float
    a0_max: float
    sigma_tilde: float
    alpha_bar: float

    @property
    def tau(self) -> float:
        """tau of the assembled (M-term) coefficient."""
        return self.tau_table[-1]

    def sum_norms(self, r: int) -> float:
        return float(sum(self.norm_table[:r]))


def build_affine_system(
    mesh: UniformMesh,
    M: int,
    k: int,
    sigma_tilde: float,
    alpha_bar_mode: float | str = "auto",
) -> tuple[KroneckerSumOperator, np.ndarray, AffineContext]:
    """Assemble A = G_0 (x) K_0 + sum_{m<=M} G_m (x) K_m and the load vector.

    The right-hand side is nonzero only in the block of the zero
    multi-index (mean block), where it equals the FE load vector.
    """
    if alpha_bar_mode == "auto":
        alpha_bar = fem2d.auto_alpha_bar(sigma_tilde)
    else:
        alpha_bar = float(alpha_bar_mode)

    S = multiindex.build_index_set(M, k)
    fields = [fem2d.fourier_coefficient(m, sigma_tilde, alpha_bar) for m in range(M + 1)]

    terms: list[tuple[sp.csr_matrix, sp.csr_matrix]] = []
    terms.append((gram.gram_identity(len(S)), fem2d.assemble_stiffness(mesh, fields[0])))
    for m in range(1, M + 1):
        G_m = gram.gram_linear(m, S, LEGENDRE)
        K_m = fem2d.assemble_stiffness(mesh, fields[m])
        terms.append((G_m, K_m))

    op = KroneckerSumOperator(terms=tuple(terms), ny=len(S), nx=mesh.n_interior)

    f = np.zeros(op.dim)
    f[: mesh.n_interior] = fem2d.assemble_load(mesh)

    a0_min, a0_max = fem2d.field_extrema(fields[0])
    norm_table = tuple(fem2d.sup_norm(fields[m]) for m in range(1, M + 1))
    tau_table = tuple(fem2d.tau_r(fields[1 : r + 1], a0_min) for r in range(M + 1))
    ctx = AffineContext(
        index_set=S,
        mesh=mesh,
        fields=tuple(fields),
        norm_table=norm_table,
        tau_table=tau_table,
        a0_min=a0_min,
        a0_max=a0_max,
        sigma_tilde=sigma_tilde,
        alpha_bar=alpha_bar,
    )
    return op, f, ctx


# ---------------------------------------------------------------------------
# lognormal system


@dataclass(frozen=True)
class LognormalTerm:
    alpha: tuple[int, ...]
    magnitude: float  # ||a_alpha||_inf
    G: sp.csr_matrix | None  # None when G_alpha is identically zero
    K: sp.csr_matrix | None
    even: bool


@dataclass(frozen=True)
class LognormalContext:
    index_set: MultiIndexSet  # parametric basis I_k^M
    mesh: UniformMesh
    ordered_terms: tuple[LognormalTerm, ...]  # descending magnitude over I_{2k}^M
    b_fields: tuple[CoefficientField, ...]
    b0: CoefficientField
    sigma_tilde: float
    alpha_bar: float
    N: int

    def leading_terms(self, r: int) -> list[LognormalTerm]:
        """The first r+1 expansion terms (truncation index counts all terms,
        including any whose Gram factor vanishes identically)."""
        if r < 0:
            raise ValueError("truncation index r must be >= 0")
        return [t for t in self.ordered_terms[: r + 1]]


def build_lognormal_system(
    mesh: UniformMesh,
    M: int,
    k: int,
    N: int,
    sigma_tilde: float,
    alpha_bar: float,
) -> tuple[KroneckerSumOperator, np.ndarray, LognormalContext]:
    """Assemble the Hermite-Galerkin system of the lognormal problem.

    The coefficient is exp(b) with b = b_0 + sum_{m=1}^N b_m y_m, the b_m
    taken from the decaying cosine family.  The Galerkin matrix is the sum
    of G_alpha (x) K_alpha over alpha in I_{2k}^M; identically zero Gram
    factors are dropped from the operator but kept in the ordered context
    so truncation indices count expansion terms.
    """
    if M >= N:
        raise ValueError(f"lognormal truncation requires M < N, got M={M}, N={N}")

    S = multiindex.build_index_set(M, k)
    full = multiindex.build_index_set(M, 2 * k)
    b0 = fem2d.fourier_coefficient(0, sigma_tilde, alpha_bar)
    b_fields = [
        fem2d.fourier_coefficient(m, sigma_tilde, alpha_bar) for m in range(1, N + 1)
    ]

    ordered = fem2d.order_by_magnitude(full, b_fields, b0)

    # Shared quadrature-point data: evaluate every b_m once, then form each
    # a_alpha by pointwise products.
    xq1, xq2 = fem2d.quadrature_points(mesh)
    Bq = [b(xq1, xq2) for b in b_fields]
    Eq = np.exp(b0(xq1, xq2) + 0.5 * sum(b * b for b in Bq))

    terms: list[LognormalTerm] = []
    op_terms: list[tuple[sp.csr_matrix, sp.csr_matrix]] = []
    for alpha, magnitude in ordered:
        G_a = gram.gram_general(alpha, S)
        even = all(a % 2 == 0 for a in alpha)
        if G_a.nnz == 0:
            terms.append(
                LognormalTerm(alpha=alpha, magnitude=magnitude, G=None, K=None, even=even)
            )
            continue
        vals = Eq
        for m, a in enumerate(alpha):
            if a:
                vals = vals * Bq[m] ** a / math.sqrt(math.factorial(a))
        K_a = fem2d.assemble_from_quad_values(mesh, vals)
        terms.append(
            LognormalTerm(alpha=alpha, magnitude=magnitude, G=G_a, K=K_a, even=even)
        )
        op_terms.append((G_a, K_a))

    op = KroneckerSumOperator(terms=tuple(op_terms), ny=len(S), nx=mesh.n_interior)
    f = np.zeros(op.dim)
    f[: mesh.n_interior] = fem2d.assemble_load(mesh)

    ctx = LognormalContext(
        index_set=S,
        mesh=mesh,
        ordered_terms=tuple(terms),
        b_fields=tuple(b_fields),
        b0=b0,
        sigma_tilde=sigma_tilde,
        alpha_bar=alpha_bar,
        N=N,
    )
    return op, f, ctx
