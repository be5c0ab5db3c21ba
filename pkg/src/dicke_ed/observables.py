"""Physics quantities from a solved ground state, and the truncation driver.

Frame bookkeeping, fixed once here: matrices are assembled in the rotated
frame, where the qubit term is -delta*J_x and the boson couples to J_z.
Rotating back to the lab frame maps lab J_x -> rotated J_z, lab J_z ->
-(rotated J_x), and leaves J_y untouched.  Consequences used below:

- The polarization observable B_N := 1 - <J_x>_rot / j equals
  1 + <J_z>_lab / j.  It vanishes in the decoupled limit, tends to 1 at
  strong coupling, and at the critical coupling decays with system size --
  the quantity whose finite-size scaling is extracted in :mod:`.scaling`.
- The cyclic-evolution phase accumulated by the ground state under a slow
  2*pi twist of the spins about the polarization axis reduces to
  gamma = 2*pi*<J_x>_rot for the static ground state.
- The pairwise-entanglement measure (scaled concurrence) is
  C_N = 1 - 4<J_y^2>/N with <J_y^2> evaluated in the rotated frame via
  J_y^2 = [2(J^2 - J_z^2) - J_+^2 - J_-^2]/4, which needs only sector
  distances 0 and 2: no transformation of the eigenvector back to the bare
  Fock basis is ever required.

Expectation values across sectors n and n+-1 (n+-2) contract the coefficient
table with the sign-dressed overlap kernels at displacement step G (2G); in
the bare basis those kernels are the identity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dcs_basis import displaced_overlap, overlap_kernel
from .eigen import GroundState, ground_state
from .errors import ConvergenceError
from .hamiltonian import assemble_dcs, assemble_dfs, project_parity
from .model import ModelParams, ladder_coeff

__all__ = [
    "ConvergedResult",
    "DEFAULT_SCHEDULE",
    "converge",
    "magnetization_x",
    "berry_phase",
    "concurrence",
    "spin_expectations",
    "to_bare_table",
    "result_row",
    "CSV_COLUMNS",
]

DEFAULT_SCHEDULE = (4, 6, 8, 12, 16, 24, 32, 48, 64, 96)


def _jplus(params: ModelParams) -> np.ndarray:
    j = params.j
    return np.array([ladder_coeff(j, n, +1) for n in params.sector_values()[:-1]])


def _step_kernels(gs: GroundState, params: ModelParams, step: int):
    """Dressed (up, down) kernel matrices for sector distance ``step``."""
    if gs.basis == "dfs":
        eye = np.eye(gs.n_tr + 1)
        return eye, eye
    kern = overlap_kernel(step * params.big_g, gs.n_tr)
    return kern.signed("up"), kern.signed("down")


def spin_expectations(gs: GroundState, params: ModelParams) -> dict:
    """Collective-spin moments of a ground state (rotated frame).

    Returns jx, jz2, jp2, jm2, jpm, jy2, jx2 keyed by name; jx2+jy2+jz2
    should reproduce j(j+1) -- kept as a free consistency check.
    """
    C = gs.table
    n_vals = params.sector_values()
    j = params.j
    jp = _jplus(params)
    weights = np.sum(C * C, axis=1)

    jz2 = float(np.sum(n_vals**2 * weights))
    jpm = float(np.sum(2.0 * (j * (j + 1) - n_vals**2) * weights))

    k_up, _ = _step_kernels(gs, params, 1)
    jx = 2.0 * float(np.sum(jp * np.einsum("ik,kl,il->i", C[:-1], k_up, C[1:])))

    if C.shape[0] >= 3:
        k2_up, k2_down = _step_kernels(gs, params, 2)
        w2 = 4.0 * jp[:-1] * jp[1:]
        jp2 = float(np.sum(w2 * np.einsum("ik,kl,il->i", C[2:], k2_down, C[:-2])))
        jm2 = float(np.sum(w2 * np.einsum("ik,kl,il->i", C[:-2], k2_up, C[2:])))
    else:
        jp2 = jm2 = 0.0

    jy2 = (2.0 * (j * (j + 1) - jz2) - jp2 - jm2) / 4.0
    jx2 = (jp2 + jm2 + jpm) / 4.0
    return {
        "jx": jx,
        "jz2": jz2,
        "jp2": jp2,
        "jm2": jm2,
        "jpm": jpm,
        "jy2": jy2,
        "jx2": jx2,
    }


def magnetization_x(gs: GroundState, params: ModelParams) -> float:
    """Scaled polarization deficit B_N = 1 - <J_x>_rot / j.

    Pinned by the decoupled limit (B_N = 0 at lam = 0) and the strong-coupling
    limit (B_N -> 1); at the critical coupling B_N ~ N^(-2/3).
    """
    return 1.0 - spin_expectations(gs, params)["jx"] / params.j


def berry_phase(gs: GroundState, params: ModelParams) -> float:
    """Geometric phase of the ground state under a 2*pi spin twist: 2*pi*<J_x>_rot.

    Identity with magnetization_x: gamma = 2*pi*j*(1 - B_N) = -pi*N*(B_N - 1).
    """
    return 2.0 * math.pi * spin_expectations(gs, params)["jx"]


def concurrence(gs: GroundState, params: ModelParams) -> float:
    """Scaled pairwise concurrence C_N = 1 - 4<J_y^2>/N."""
    return 1.0 - 4.0 * spin_expectations(gs, params)["jy2"] / params.n_atoms


def to_bare_table(gs: GroundState, params: ModelParams, cutoff: int) -> np.ndarray:
    """Coefficients of a displaced-basis state in the bare Fock basis.

    Returns an (N+1, cutoff+1) table b[n, l].  The assembled eigenvectors
    carry the alternating-sign gauge of the dressed kernels, so the physical
    amplitude on |l>_bare (x) |j,n> is sum_k (-1)^k c[n,k] <l|D(-g_n)|k>.
    Validation aid; observables never need this transformation.
    """
    if gs.basis != "dcs":
        raise ValueError("to_bare_table applies to displaced-basis states")
    C = gs.table
    n_vals = params.sector_values()
    K = gs.n_tr + 1
    ksigns = np.where(np.arange(K) % 2, -1.0, 1.0)
    out = np.empty((C.shape[0], cutoff + 1))
    for i, n in enumerate(n_vals):
        g = params.g(n)
        T = np.array(
            [[displaced_overlap(l, k, -g) for k in range(K)] for l in range(cutoff + 1)]
        )
        out[i] = T @ (ksigns * C[i])
    return out


@dataclass
class ConvergedResult:
    """Observables accepted by the truncation driver, with the full history."""

    params: ModelParams
    values: dict
    n_tr_used: int
    history: list = field(repr=False)
    rel_change: dict
    sector: str
    ground: GroundState = field(repr=False)
    threshold: float

    @property
    def energy(self) -> float:
        return self.values["e0"]


def _observable_set(gs: GroundState, params: ModelParams) -> dict:
    ex = spin_expectations(gs, params)
    b_n = 1.0 - ex["jx"] / params.j
    return {
        "e0": gs.energy,
        "b_n": b_n,
        "gamma": 2.0 * math.pi * ex["jx"],
        "jy2": ex["jy2"],
        "c_n": 1.0 - 4.0 * ex["jy2"] / params.n_atoms,
    }


def _rel(new: float, old: float) -> float:
    return abs(new - old) / max(abs(new), 1e-12)


def converge(
    params: ModelParams,
    threshold: float = 1e-6,
    schedule: tuple = DEFAULT_SCHEDULE,
    track: tuple = ("e0",),
    sector: str = "even",
    basis: str = "dcs",
    solver_tol: float = 1e-10,
    seed: int = 0,
    dense_cutoff: int | None = None,
    max_dim: int | None = None,
) -> ConvergedResult:
    """Solve at successive truncations until the tracked observables settle.

    Accepts once every tracked observable changes relatively by less than
    ``threshold`` between consecutive schedule entries; raises
    ConvergenceError (history attached) if the schedule runs out.  ``sector``
    picks the parity block the solve happens in ("full" to skip projection);
    ``basis`` selects the displaced ("dcs") or bare ("dfs") assembly.

    ``track`` defaults to the energy, the usual acceptance criterion for
    truncated diagonalization; pass the observable you are about to fit when
    its own tail matters (relative changes of scaled concurrence are
    ill-conditioned wherever it crosses zero, so track "jy2" there instead).
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    assemble = assemble_dcs if basis == "dcs" else assemble_dfs
    kwargs = {} if dense_cutoff is None else {"dense_cutoff": dense_cutoff}
    history = []
    prev = None
    prev_gs = None
    for n_tr in schedule:
        h = assemble(params, n_tr, max_dim=max_dim)
        if sector != "full":
            h = project_parity(h, sector)
        v0 = None
        if prev_gs is not None:
            # warm start: previous solution zero-padded to the new truncation
            old = prev_gs.table
            padded = np.zeros((params.n_atoms + 1, n_tr + 1))
            padded[:, : old.shape[1]] = old[:, : n_tr + 1]
            flat = padded.reshape(-1)
            v0 = h.restrict(flat) if sector != "full" else flat
        gs = ground_state(h, tol=solver_tol, seed=seed, v0=v0, **kwargs)
        vals = _observable_set(gs, params)
        prev_gs = gs
        history.append((n_tr, vals))
        if prev is not None:
            rel = {key: _rel(vals[key], prev[key]) for key in track}
            if all(r < threshold for r in rel.values()):
                return ConvergedResult(
                    params=params,
                    values=vals,
                    n_tr_used=n_tr,
                    history=history,
                    rel_change=rel,
                    sector=sector,
                    ground=gs,
                    threshold=threshold,
                )
        prev = vals
    raise ConvergenceError(
        f"schedule exhausted at n_tr={schedule[-1]} without reaching {threshold:g} "
        f"(params: N={params.n_atoms}, lam={params.lam:g})",
        history=history,
    )


CSV_COLUMNS = (
    "N", "omega", "delta", "lambda", "alpha", "Ntr_used",
    "E0", "E0_scaled", "B_N", "berry_gamma", "Jy2", "C_N", "parity", "residual",
)


def result_row(res: ConvergedResult) -> dict:
    """Flatten a converged result into the CSV schema."""
    p = res.params
    return {
        "N": p.n_atoms,
        "omega": p.omega,
        "delta": p.delta,
        "lambda": p.lam,
        "alpha": p.alpha,
        "Ntr_used": res.n_tr_used,
        "E0": res.values["e0"],
        "E0_scaled": res.values["e0"] / (p.j * p.delta),
        "B_N": res.values["b_n"],
        "berry_gamma": res.values["gamma"],
        "Jy2": res.values["jy2"],
        "C_N": res.values["c_n"],
        "parity": res.sector,
        "residual": res.ground.residual,
    }
