"""Rotating-frame Hamiltonian assembly, Liouville-equation vectorization,
and steady-state / time-domain solvers.

The density matrix is vectorized over an index set that keeps every
population slot but only coherences between non-lumped levels; coherences
involving lumped reservoirs are never driven and are excluded exactly.
Two representations are supported: the homogeneous one (d vec/dt = M vec,
s = 0, trace imposed at solve time) and a trace-eliminated one where the
last population is substituted out and s is a genuine source term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomic import LevelScheme, TransitionTable
from .errors import ModelError, SolverError


@dataclass(frozen=True)
class FieldSpec:
    """One driving beam in gamma_a units.

    polarization is the (sigma+, sigma-) amplitude pair; k converts a
    velocity in m/s to a Doppler shift in gamma_a.
    """

    role: str                      # "pump" or "signal"
    rabi: float                    # Rabi frequency of the weakest (a=1) transition
    detuning: float                # relative to the reference transition
    polarization: tuple[complex, complex] = (1.0 + 0j, 0.0 + 0j)
    k: float = 0.0

    def __post_init__(self):
        a, b = self.polarization
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ModelError(
                f"{self.role} polarization not normalized: |a|^2+|b|^2 = {norm!r}")
        if self.rabi < 0:
            raise ModelError(f"{self.role} Rabi frequency must be >= 0")

    def component(self, q: int) -> complex:
        """Field amplitude driving a transition of polarization q."""
        if q == 1:
            return complex(self.polarization[0])
        if q == -1:
            return complex(self.polarization[1])
        return 0.0 + 0j   # transverse beams carry no pi component


@dataclass(frozen=True)
class DecayNetwork:
    """Incoherent population channels: source slot -> ((target, rate), ...).

    A level's total loss rate is the sum of its channel rates, so population
    is conserved by construction; validation rejects unknown slots and
    negative rates.
    """

    channels: tuple[tuple[int, tuple[tuple[int, float], ...]], ...]
    n_levels: int

    def __post_init__(self):
        for src, chans in self.channels:
            if not 0 <= src < self.n_levels:
                raise ModelError(f"decay source slot {src} out of range")
            for tgt, rate in chans:
                if not 0 <= tgt < self.n_levels:
                    raise ModelError(f"decay target slot {tgt} out of range")
                if rate < 0:
                    raise ModelError(f"negative decay rate {rate} from slot {src}")

    @classmethod
    def from_dict(cls, chans: dict[int, list[tuple[int, float]]],
                  n_levels: int) -> "DecayNetwork":
        return cls(tuple((src, tuple(lst)) for src, lst in sorted(chans.items())),
                   n_levels)

    def loss_rates(self) -> np.ndarray:
        g = np.zeros(self.n_levels)
        for src, chans in self.channels:
            g[src] = sum(rate for _, rate in chans)
        return g


def build_hamiltonian(scheme: LevelScheme, transitions: TransitionTable,
                      fields: dict[str, FieldSpec],
                      velocity_shifts: tuple[float, float] = (0.0, 0.0)
                      ) -> np.ndarray:
    """Rotating-frame Hamiltonian (gamma_a units).

    Diagonal: energy offset minus the accumulated laser detunings for the
    level's tier (pump shifts tiers >= 1, signal additionally shifts tier 2),
    each corrected by the per-beam Doppler shift.  Off-diagonal: half the
    transition Rabi frequency projected on the field polarization.  Lumped
    levels stay uncoupled.
    """
    n = scheme.n_levels
    dc = fields["pump"].detuning + velocity_shifts[0] if "pump" in fields else 0.0
    ds = fields["signal"].detuning + velocity_shifts[1] if "signal" in fields else 0.0

    h = np.zeros((n, n), dtype=complex)
    for k, (lev, tier) in enumerate(zip(scheme.levels, scheme.tiers)):
        d = scheme.energy_offsets[k]
        if not lev.lumped:
            if tier >= 1:
                d -= dc
            if tier >= 2:
                d -= ds
        h[k, k] = d

    for entry in transitions.entries:
        if entry.field not in fields:
            continue
        fld = fields[entry.field]
        try:
            iu = scheme.index[entry.upper]
            il = scheme.index[entry.lower]
        except KeyError as exc:
            raise ModelError(f"transition references unknown level {exc}") from exc
        if entry.upper.lumped or entry.lower.lumped:
            raise ModelError(f"transition couples a lumped level: "
                             f"{entry.upper} <- {entry.lower}")
        coupling = 0.5 * entry.strength * fld.rabi * fld.component(entry.q)
        h[iu, il] += coupling
        h[il, iu] += np.conjugate(coupling)
    return h


@dataclass(frozen=True)
class Liouvillian:
    """Linear generator d vec(rho)/dt = m @ vec(rho) + s over the retained
    coordinate set."""

    m: np.ndarray
    s: np.ndarray
    coords: tuple[tuple[int, int], ...]
    n_levels: int
    eliminated: tuple[int, int] | None = None   # population removed by trace

    @property
    def pos(self) -> dict[tuple[int, int], int]:
        return {c: k for k, c in enumerate(self.coords)}

    def population_positions(self) -> list[int]:
        return [k for k, (i, j) in enumerate(self.coords) if i == j]

    def to_vector(self, rho: np.ndarray) -> np.ndarray:
        return np.array([rho[i, j] for i, j in self.coords], dtype=complex)

    def to_matrix(self, x: np.ndarray) -> np.ndarray:
        rho = np.zeros((self.n_levels, self.n_levels), dtype=complex)
        for k, (i, j) in enumerate(self.coords):
            rho[i, j] = x[k]
        if self.eliminated is not None:
            i, _ = self.eliminated
            rho[i, i] = 1.0 - sum(rho[j, j] for j in range(self.n_levels)
                                  if j != i)
        return rho

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Time derivative of rho under this generator."""
        if self.eliminated is not None:
            raise SolverError("apply requires the homogeneous representation")
        return self.to_matrix(self.m @ self.to_vector(rho) + self.s)


def _coordinate_set(scheme: LevelScheme) -> list[tuple[int, int]]:
    n = scheme.n_levels
    coords = []
    for i in range(n):
        for j in range(n):
            if i == j or (not scheme.is_lumped(i) and not scheme.is_lumped(j)):
                coords.append((i, j))
    return coords


def vectorize(h: np.ndarray, scheme: LevelScheme, network: DecayNetwork,
              eliminate_trace: bool = False) -> Liouvillian:
    """Vectorize -i[H, rho] plus the decay network into a linear system.

    With eliminate_trace the last population slot is substituted out using
    trace(rho) = 1, which moves the repopulation flow into a constant source
    vector; otherwise s = 0 and the trace is imposed when solving.
    """
    n = scheme.n_levels
    if h.shape != (n, n):
        raise ModelError("Hamiltonian size does not match the scheme")
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise ModelError("Hamiltonian must be Hermitian")

    eye = np.eye(n)
    m_full = -1j * (np.kron(h, eye) - np.kron(eye, h.T))

    loss = network.loss_rates()
    for i in range(n):
        for j in range(n):
            m_full[i * n + j, i * n + j] -= 0.5 * (loss[i] + loss[j])
    for src, chans in network.channels:
        for tgt, rate in chans:
            m_full[tgt * n + tgt, src * n + src] += rate

    coords = _coordinate_set(scheme)
    sel = [i * n + j for i, j in coords]
    excl = sorted(set(range(n * n)) - set(sel))
    if excl and np.max(np.abs(m_full[np.ix_(sel, excl)])) > 0.0:
        raise ModelError("excluded lumped coherences feed retained "
                         "coordinates; lumped levels must stay uncoupled")

    m = m_full[np.ix_(sel, sel)]
    s = np.zeros(len(sel), dtype=complex)
    liou = Liouvillian(m, s, tuple(coords), n)
    _check_trace_preservation(liou)
    if eliminate_trace:
        liou = _eliminate_trace(liou)
    return liou


def _check_trace_preservation(liou: Liouvillian) -> None:
    pop = liou.population_positions()
    col_sums = liou.m[pop, :].sum(axis=0)
    if np.max(np.abs(col_sums[pop])) > 1e-10:
        raise SolverError("decay network orphans population "
                          "(population column deficit)")


def _eliminate_trace(liou: Liouvillian) -> Liouvillian:
    n = liou.n_levels
    drop = (n - 1, n - 1)
    k_drop = liou.pos[drop]
    pop = [k for k in liou.population_positions() if k != k_drop]

    keep = [k for k in range(len(liou.coords)) if k != k_drop]
    m = liou.m[np.ix_(keep, keep)].copy()
    col = liou.m[keep, k_drop]
    s = col.copy()                       # rho_tt -> 1 contributes a source
    for knew, kold in enumerate(keep):
        if kold in pop:
            m[:, knew] -= col            # and -sum(other populations)
    coords = tuple(c for k, c in enumerate(liou.coords) if k != k_drop)
    return Liouvillian(m, s, coords, n, eliminated=drop)


def steady_state(liou: Liouvillian) -> np.ndarray:
    """Solve M vec(rho) + s = 0 with trace(rho) = 1.

    In the homogeneous representation one redundant population row (the last
    diagonal slot) is replaced by the trace constraint.  The result is
    validated for residual, Hermiticity, and positivity.
    """
    if liou.eliminated is not None:
        try:
            x = np.linalg.solve(liou.m, -liou.s)
        except np.linalg.LinAlgError:
            _raise_nonunique(liou.m)
        rho = liou.to_matrix(x)
        resid = np.max(np.abs(liou.m @ x + liou.s))
    else:
        a = liou.m.copy()
        b = np.zeros(len(liou.coords), dtype=complex)
        row = liou.pos[(liou.n_levels - 1, liou.n_levels - 1)]
        a[row, :] = 0.0
        for k in liou.population_positions():
            a[row, k] = 1.0
        b[row] = 1.0
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            _raise_nonunique(a)
        resid = np.max(np.abs(liou.m @ x + liou.s))
        rho = liou.to_matrix(x)

    scale = max(1.0, np.max(np.abs(liou.m)))
    if resid > 1e-9 * scale:
        _raise_nonunique(liou.m, resid)
    _validate_density(rho)
    return rho


def _raise_nonunique(m: np.ndarray, resid: float | None = None):
    sv = np.linalg.svd(m, compute_uv=False)
    tol = max(m.shape) * np.finfo(float).eps * (sv[0] if sv.size else 1.0)
    null_dim = int(np.sum(sv < tol))
    detail = f", residual {resid:.2e}" if resid is not None else ""
    raise SolverError(
        f"non-unique steady state (null-space dimension {max(null_dim, 1)}"
        f"{detail})")


def _validate_density(rho: np.ndarray) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise SolverError("steady state is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise SolverError("steady state trace deviates from 1")
    if np.min(np.diag(rho).real) < -1e-8:
        raise SolverError("steady state has negative population beyond tolerance")


def evolve(rho0: np.ndarray, liou: Liouvillian, t_final: float,
           dt: float) -> np.ndarray:
    """Integrate d vec(rho)/dt = M vec(rho) + s with fixed-step RK4.

    Serves as an independent oracle for steady_state.  Aborts if the trace
    drifts by more than 1e-3, which indicates an unstable step size.
    """
    if liou.eliminated is not None:
        raise SolverError("evolve requires the homogeneous representation")
    if dt <= 0 or t_final < 0:
        raise SolverError("dt must be > 0 and t_final >= 0")

    m, s = liou.m, liou.s
    x = liou.to_vector(rho0)
    pop = liou.population_positions()
    steps = int(np.ceil(t_final / dt))
    dt = t_final / steps if steps else dt

    for step in range(steps):
        k1 = m @ x + s
        k2 = m @ (x + 0.5 * dt * k1) + s
        k3 = m @ (x + 0.5 * dt * k2) + s
        k4 = m @ (x + dt * k3) + s
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % 50 == 0 or step == steps - 1:
            drift = abs(np.sum(x[pop]).real - 1.0)
            if drift > 1e-3:
                raise SolverError(
                    f"trace drifted by {drift:.2e} during evolution; "
                    f"reduce dt (currently {dt:.3g})")
    return liou.to_matrix(x)


def suggest_dt(liou: Liouvillian, fields: dict[str, FieldSpec] | None = None
               ) -> float:
    """Step size heuristic: resolve the fastest frequency in the generator."""
    scale = np.max(np.abs(liou.m))
    if fields:
        scale = max(scale, *(f.rabi for f in fields.values()),
                    *(abs(f.detuning) for f in fields.values()))
    return 0.05 / max(scale, 1e-12)
