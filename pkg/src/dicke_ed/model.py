"""Model parameters and angular-momentum bookkeeping for the Dicke model.

Conventions (used throughout the package, hbar = 1):

- N two-level atoms, collective spin j = N/2, one bosonic mode of
  frequency ``omega``, qubit splitting ``delta``, coupling ``lam``.
- All matrices live in the frame obtained by a pi/2 rotation of the spin
  about the y axis, where the boson couples to J_z and the qubit term is
  -delta * J_x.  The mapping back to lab-frame operators is fixed once in
  :mod:`dicke_ed.observables`.
- Per-sector boson displacement g_m = 2*lam*m / (omega*sqrt(N)) for
  m = -j..j, and the inter-sector step G = 2*lam / (omega*sqrt(N)).
- Dimensionless combinations D = delta/omega and alpha = 4*lam^2/(delta*omega);
  alpha = 1 marks the critical coupling.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "ModelParams",
    "SectorIndex",
    "ladder_coeff",
    "critical_coupling",
    "params_from_mapping",
]


def ladder_coeff(j: float, m: float, sign: int) -> float:
    """Half the matrix element of J+/J- in the |j, m> basis.

    Returns (1/2) * sqrt(j(j+1) - m(m+sign)), i.e. the coefficient
    j_m^(+-) multiplying |j, m+-1> when (J+ + J-)/2 acts on |j, m>.
    Returns 0 when the target state falls outside the multiplet.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if abs(m) > j + 1e-12:
        raise ValueError(f"|m| = {abs(m)} exceeds j = {j}")
    val = j * (j + 1.0) - m * (m + sign)
    if val <= 0.0:
        return 0.0
    return 0.5 * math.sqrt(val)


def critical_coupling(omega: float, delta: float) -> float:
    """Coupling at which the superradiant instability sets in: sqrt(omega*delta)/2."""
    if omega <= 0.0 or delta <= 0.0:
        raise ValueError(f"omega and delta must be positive, got {omega}, {delta}")
    return 0.5 * math.sqrt(omega * delta)


@dataclass(frozen=True)
class ModelParams:
    """Physics configuration: atom number and the three energies.

    Derived quantities (j, D, alpha, g_m, G) are computed on access so they
    can never go stale.
    """

    n_atoms: int
    omega: float = 1.0
    delta: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        if self.omega <= 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    @property
    def j(self) -> float:
        """Collective spin N/2 (half-integer when N is odd)."""
        return 0.5 * self.n_atoms

    @property
    def big_d(self) -> float:
        """D = delta/omega."""
        return self.delta / self.omega

    @property
    def alpha(self) -> float:
        """alpha = 4*lam^2 / (delta*omega); equals 1 at the critical coupling."""
        return 4.0 * self.lam**2 / (self.delta * self.omega)

    @property
    def big_g(self) -> float:
        """Inter-sector displacement step G = 2*lam / (omega*sqrt(N))."""
        return 2.0 * self.lam / (self.omega * math.sqrt(self.n_atoms))

    def g(self, m: float) -> float:
        """Per-sector displacement g_m = 2*lam*m / (omega*sqrt(N))."""
        return self.big_g * m

    def sector_values(self) -> np.ndarray:
        """J_z eigenvalues n = -j..j as a length N+1 array."""
        return np.arange(self.n_atoms + 1, dtype=float) - self.j

    @property
    def lambda_c(self) -> float:
        return critical_coupling(self.omega, self.delta)

    def at_critical(self) -> "ModelParams":
        """Same parameters with the coupling set to the critical value."""
        return ModelParams(self.n_atoms, self.omega, self.delta, self.lambda_c)

    def with_coupling(self, lam: float) -> "ModelParams":
        return ModelParams(self.n_atoms, self.omega, self.delta, lam)

    def with_atoms(self, n_atoms: int) -> "ModelParams":
        return ModelParams(n_atoms, self.omega, self.delta, self.lam)


@dataclass(frozen=True)
class SectorIndex:
    """Position in the working basis: J_z eigenvalue n and boson occupation k.

    The flat index is sector-major: flat = (n + j)*(n_tr + 1) + k, a bijection
    onto 0..(N+1)(n_tr+1)-1.
    """

    n: float
    k: int

    def flat(self, j: float, n_tr: int) -> int:
        i = self.n + j
        i_int = int(round(i))
        if abs(i - i_int) > 1e-9 or not (0 <= i_int <= int(round(2 * j))):
            raise ValueError(f"n = {self.n} is not a valid J_z eigenvalue for j = {j}")
        if not (0 <= self.k <= n_tr):
            raise ValueError(f"k = {self.k} outside 0..{n_tr}")
        return i_int * (n_tr + 1) + self.k

    @classmethod
    def from_flat(cls, flat: int, j: float, n_tr: int) -> "SectorIndex":
        width = n_tr + 1
        i, k = divmod(flat, width)
        if not (0 <= i <= int(round(2 * j))):
            raise ValueError(f"flat index {flat} out of range")
        return cls(n=i - j, k=k)


_CONFIG_KEYS = {"n_atoms", "omega", "delta", "lambda", "alpha"}


def params_from_mapping(mapping: dict) -> ModelParams:
    """Build ModelParams from a flat key/value mapping.

    Accepted keys: n_atoms, omega, delta, and exactly one of lambda | alpha
    (alpha is converted via lam = sqrt(alpha*delta*omega)/2).  Raises
    ConfigError naming the offending key on any problem.
    """
    unknown = set(mapping) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "n_atoms" not in mapping:
        raise ConfigError("missing config key: n_atoms")

    def _num(key, cast=float):
        try:
            return cast(mapping[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: not a number ({mapping[key]!r})") from exc

    n_atoms = _num("n_atoms", int)
    omega = _num("omega") if "omega" in mapping else 1.0
    delta = _num("delta") if "delta" in mapping else 1.0

    if "lambda" in mapping and "alpha" in mapping:
        raise ConfigError("give either 'lambda' or 'alpha', not both")
    if "alpha" in mapping:
        alpha = _num("alpha")
        if alpha < 0:
            raise ConfigError(f"config key 'alpha': must be >= 0, got {alpha}")
        lam = 0.5 * math.sqrt(alpha * delta * omega)
    else:
        lam = _num("lambda") if "lambda" in mapping else 0.0

    try:
        return ModelParams(n_atoms=n_atoms, omega=omega, delta=delta, lam=lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
