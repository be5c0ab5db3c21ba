"""Assembly of the real symmetric eigenproblem and the parity machinery.

Working basis: |k>_n (x) |j, n>, sector-major flat layout (see SectorIndex).
Two assemblies share one block structure over the sector index:

- displaced basis ("dcs"): each sector carries its own displaced oscillator;
  diagonal omega*(l - g_n^2), off-diagonal blocks -delta * j_n^(+-) times the
  sign-dressed overlap kernel.  Blocks between sectors n and n+1 all share one
  (n_tr+1)^2 kernel matrix, so a block is stored as coefficient * kernel.
- bare Fock basis ("dfs"): diagonal omega*l, spin blocks -delta * j_n^(+-)
  times the identity, plus a boson hopping term omega*g_n*sqrt(l+1) inside
  each sector (tridiagonal in l).

Both matrices commute with the parity operator, which acts on the working
basis as (n, k) -> (-n, k) with amplitude (-1)^k.  The spin part of the
rotation contributes no phase: exp(i*pi*j) * exp(-i*pi*J_x) |j,n> = |j,-n>
exactly, for integer and half-integer j alike.  The construction is
self-certified by the involution and commutation tests rather than trusted
from the derivation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dcs_basis import overlap_kernel
from .errors import DimensionCapError
from .model import ModelParams, ladder_coeff

__all__ = [
    "BlockHamiltonian",
    "ParityOperator",
    "ProjectedHamiltonian",
    "assemble_dcs",
    "assemble_dfs",
    "parity_operator",
    "project_parity",
    "dump_coo",
    "DEFAULT_DIM_CAP",
]

DEFAULT_DIM_CAP = 400_000


@dataclass
class BlockHamiltonian:
    """Block-tridiagonal real symmetric matrix over the sector index.

    ``spin_coup[i]`` scales the block coupling sectors i and i+1 (both
    directions; the two dressings are transposes of each other).  For the
    displaced basis the block matrix is ``kernel_up`` and its transpose; for
    the bare basis it is the identity and the boson hopping lives inside the
    diagonal blocks (``boson_amp``).
    """

    params: ModelParams
    n_tr: int
    basis: str
    diag: np.ndarray = field(repr=False)
    spin_coup: np.ndarray = field(repr=False)
    kernel_up: np.ndarray | None = field(default=None, repr=False)
    boson_amp: np.ndarray | None = field(default=None, repr=False)
    sector: str = "full"

    @property
    def s_dim(self) -> int:
        return self.params.n_atoms + 1

    @property
    def k_dim(self) -> int:
        return self.n_tr + 1

    @property
    def dim(self) -> int:
        return self.s_dim * self.k_dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        X = x.reshape(self.s_dim, self.k_dim)
        Y = self.diag * X
        c = self.spin_coup[:, np.newaxis]
        if self.basis == "dcs":
            K = self.kernel_up
            Y[:-1] += c * (X[1:] @ K.T)
            Y[1:] += c * (X[:-1] @ K)
        else:
            Y[:-1] += c * X[1:]
            Y[1:] += c * X[:-1]
            amp = self.boson_amp[:, np.newaxis]
            lad = np.sqrt(np.arange(1, self.k_dim))
            Y[:, :-1] += amp * lad * X[:, 1:]
            Y[:, 1:] += amp * lad * X[:, :-1]
        return Y.reshape(-1)

    def diag_block(self, i: int) -> np.ndarray:
        """Dense diagonal block of sector i."""
        block = np.diag(self.diag[i])
        if self.basis == "dfs":
            lad = self.boson_amp[i] * np.sqrt(np.arange(1, self.k_dim))
            block += np.diag(lad, 1) + np.diag(lad, -1)
        return block

    def offdiag_block(self, i: int) -> np.ndarray:
        """Dense block coupling sector i to sector i+1 (row i, column i+1)."""
        if self.basis == "dcs":
            return self.spin_coup[i] * self.kernel_up
        return self.spin_coup[i] * np.eye(self.k_dim)

    def to_dense(self) -> np.ndarray:
        S, K = self.s_dim, self.k_dim
        H = np.zeros((self.dim, self.dim))
        for i in range(S):
            sl = slice(i * K, (i + 1) * K)
            H[sl, sl] = self.diag_block(i)
            if i + 1 < S:
                up = slice((i + 1) * K, (i + 2) * K)
                B = self.offdiag_block(i)
                H[sl, up] = B
                H[up, sl] = B.T
        return H

    def norm_estimate(self) -> float:
        """Gershgorin-style upper bound on the spectral radius."""
        bound = np.abs(self.diag).max()
        if self.basis == "dcs":
            row_sum = np.abs(self.kernel_up).sum(axis=1).max()
            col_sum = np.abs(self.kernel_up).sum(axis=0).max()
            bound += np.abs(self.spin_coup).max() * (row_sum + col_sum)
        else:
            bound += 2.0 * np.abs(self.spin_coup).max()
            if self.k_dim > 1:
                bound += 2.0 * np.abs(self.boson_amp).max() * math.sqrt(self.n_tr)
        return float(bound)


def _check_dim(params: ModelParams, n_tr: int, max_dim: int | None):
    if n_tr < 0:
        raise ValueError(f"n_tr must be >= 0, got {n_tr}")
    cap = DEFAULT_DIM_CAP if max_dim is None else max_dim
    dim = (params.n_atoms + 1) * (n_tr + 1)
    if dim > cap:
        raise DimensionCapError(
            f"dimension {dim} = ({params.n_atoms}+1)*({n_tr}+1) exceeds cap {cap}"
        )


def _spin_couplings(params: ModelParams) -> np.ndarray:
    j = params.j
    n_vals = params.sector_values()
    return np.array(
        [-params.delta * ladder_coeff(j, n, +1) for n in n_vals[:-1]]
    )


def assemble_dcs(params: ModelParams, n_tr: int, max_dim: int | None = None) -> BlockHamiltonian:
    """Eigenproblem in the displaced basis.

    Row (n, l): omega*(l - g_n^2) on the diagonal, coupling to sector n+1
    with weight -delta*j_n^+ and kernel (-1)^k B_{l,k}(G), to sector n-1 with
    weight -delta*j_n^- and kernel (-1)^l B_{l,k}(G).  The full basis is
    orthonormal (Dicke states are orthogonal across sectors even though the
    displaced oscillators overlap), so this is a standard eigenproblem.
    """
    _check_dim(params, n_tr, max_dim)
    k_arr = np.arange(n_tr + 1, dtype=float)
    n_vals = params.sector_values()
    g2 = (params.big_g * n_vals) ** 2
    diag = params.omega * (k_arr[np.newaxis, :] - g2[:, np.newaxis])
    kernel = overlap_kernel(params.big_g, n_tr).signed("up")
    return BlockHamiltonian(
        params=params,
        n_tr=n_tr,
        basis="dcs",
        diag=diag,
        spin_coup=_spin_couplings(params),
        kernel_up=kernel,
    )


def assemble_dfs(params: ModelParams, n_tr: int, max_dim: int | None = None) -> BlockHamiltonian:
    """Eigenproblem in the bare Fock basis truncated at boson number n_tr."""
    _check_dim(params, n_tr, max_dim)
    k_arr = np.arange(n_tr + 1, dtype=float)
    n_vals = params.sector_values()
    diag = np.broadcast_to(params.omega * k_arr, (params.n_atoms + 1, n_tr + 1)).copy()
    boson_amp = params.omega * params.big_g * n_vals
    return BlockHamiltonian(
        params=params,
        n_tr=n_tr,
        basis="dfs",
        diag=diag,
        spin_coup=_spin_couplings(params),
        boson_amp=boson_amp,
    )


@dataclass(frozen=True)
class ParityOperator:
    """Signed sector-reversal: (n, k) -> (-n, k) with amplitude (-1)^k."""

    n_atoms: int
    n_tr: int

    @property
    def dim(self) -> int:
        return (self.n_atoms + 1) * (self.n_tr + 1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        X = x.reshape(self.n_atoms + 1, self.n_tr + 1)
        signs = np.where(np.arange(self.n_tr + 1) % 2, -1.0, 1.0)
        return (X[::-1] * signs).reshape(-1)

    def to_dense(self) -> np.ndarray:
        return np.column_stack(
            [self.apply(col) for col in np.eye(self.dim)]
        ).T


def parity_operator(n_atoms: int, n_tr: int) -> ParityOperator:
    return ParityOperator(n_atoms=n_atoms, n_tr=n_tr)


class ProjectedHamiltonian:
    """Restriction of a BlockHamiltonian to one parity sector.

    The sector basis keeps, for every sector pair (n, -n) with n > 0, the
    combinations (|n,k> +- (-1)^k |-n,k>)/sqrt(2), and for the self-paired
    n = 0 sector (even atom number only) the bare states whose (-1)^k matches
    the sector sign.  Matvec round-trips through the full operator, which is
    exact because the full matrix commutes with the parity.
    """

    def __init__(self, full: BlockHamiltonian, sector: str):
        if sector not in ("even", "odd"):
            raise ValueError(f"sector must be 'even' or 'odd', got {sector!r}")
        self.full = full
        self.sector = sector
        self.sign = 1.0 if sector == "even" else -1.0
        S, K = full.s_dim, full.k_dim
        self._has_center = S % 2 == 1
        self._center = (S - 1) // 2 if self._has_center else None
        self._upper = list(range(S // 2 + (1 if self._has_center else 0), S))
        if self._has_center:
            k_parity = np.arange(K) % 2
            want = 0 if sector == "even" else 1
            self._center_keep = np.nonzero(k_parity == want)[0]
        else:
            self._center_keep = np.empty(0, dtype=int)
        self.dim = len(self._upper) * K + len(self._center_keep)
        self._ksigns = np.where(np.arange(K) % 2, -1.0, 1.0)

    @property
    def params(self):
        return self.full.params

    @property
    def basis(self):
        return self.full.basis

    @property
    def n_tr(self):
        return self.full.n_tr

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Isometry from sector coordinates to the full flat basis."""
        S, K = self.full.s_dim, self.full.k_dim
        i0 = self._upper[0]
        X = np.empty((S, K))
        nc = len(self._center_keep)
        if self._has_center:
            X[self._center] = 0.0
            X[self._center, self._center_keep] = u[:nc]
        U = u[nc:].reshape(S - i0, K) / math.sqrt(2.0)
        X[i0:] = U
        X[: S - i0] = self.sign * self._ksigns * U[::-1]
        return X.reshape(-1)

    def restrict(self, x: np.ndarray) -> np.ndarray:
        """Adjoint of expand."""
        S, K = self.full.s_dim, self.full.k_dim
        i0 = self._upper[0]
        X = x.reshape(S, K)
        upper = (X[i0:] + self.sign * self._ksigns * X[: S - i0][::-1]) / math.sqrt(2.0)
        if self._has_center:
            return np.concatenate([X[self._center, self._center_keep], upper.ravel()])
        return upper.ravel()

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.restrict(self.full.matvec(self.expand(u)))

    def to_dense(self) -> np.ndarray:
        cols = [self.matvec(e) for e in np.eye(self.dim)]
        return np.column_stack(cols)

    def norm_estimate(self) -> float:
        return self.full.norm_estimate()


def project_parity(h: BlockHamiltonian, sector: str) -> ProjectedHamiltonian:
    """Restrict an assembled matrix to the even or odd parity sector."""
    return ProjectedHamiltonian(h, sector)


def dump_coo(h: BlockHamiltonian, fileobj) -> int:
    """Write the matrix as `row col value` lines (flat SectorIndex order).

    Returns the number of lines written.  Debug aid; both triangles emitted.
    """
    S, K = h.s_dim, h.k_dim
    count = 0
    for i in range(S):
        base = i * K
        blocks = [(base, h.diag_block(i))]
        if i + 1 < S:
            B = h.offdiag_block(i)
            blocks.append(((i + 1) * K, B))
        for col_base, block in blocks:
            rows, cols = np.nonzero(block)
            for r, c in zip(rows, cols):
                fileobj.write(f"{base + r} {col_base + c} {block[r, c]:.17g}\n")
                count += 1
                if col_base != base:
                    fileobj.write(f"{col_base + c} {base + r} {block[r, c]:.17g}\n")
                    count += 1
    return count
