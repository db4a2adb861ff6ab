"""Thermal velocity averaging and the (detuning x velocity) sweep.

Each grid cell is an independent steady-state solve; parallelism is a plain
process pool over detunings with a fixed, velocity-ordered reduction per
detuning, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .atomic import LevelScheme, TransitionTable
from .errors import ModelError, SolverError
from .liouville import DecayNetwork, FieldSpec, build_hamiltonian, vectorize
from .polarimetry import MediumParams, OpticalResponse, response_from_density

KB = 1.380649e-23          # J/K
AMU = 1.66053906660e-27    # kg

COUNTER = "counter_propagating"
CO = "co_propagating"

CSV_HEADER = "delta_s,phi_plus,phi_minus,alpha_plus,alpha_minus,phi_d_deg,alpha_d"
CSV_MAGIC = "# vaporplate sweep CSV v1"


def thermal_rms_velocity(temperature: float, mass_amu: float) -> float:
    """1-D RMS velocity (m/s) of the Maxwell distribution."""
    return math.sqrt(KB * temperature / (mass_amu * AMU))


@dataclass(frozen=True)
class VelocityGrid:
    """Quadrature points and weights over the 1-D thermal distribution."""

    velocities: tuple[float, ...]
    weights: tuple[float, ...]
    temperature: float
    mass_amu: float
    span: float
    kind: str

    def __post_init__(self):
        if len(self.velocities) != len(self.weights):
            raise ModelError("velocity grid arrays differ in length")
        if abs(sum(self.weights) - 1.0) > 1e-6:
            raise ModelError("velocity weights must sum to 1")

    @classmethod
    def gauss_hermite(cls, n: int, temperature: float = 403.0,
                      mass_amu: float = 86.909) -> "VelocityGrid":
        x, w = np.polynomial.hermite.hermgauss(n)
        vr = thermal_rms_velocity(temperature, mass_amu)
        v = x * math.sqrt(2.0) * vr
        w = w / math.sqrt(math.pi)
        return cls(tuple(v), tuple(w / w.sum()), temperature, mass_amu,
                   span=float(abs(x).max() * math.sqrt(2.0)),
                   kind="gauss_hermite")

    @classmethod
    def uniform(cls, n: int, temperature: float = 403.0,
                mass_amu: float = 86.909, span: float = 4.0) -> "VelocityGrid":
        vr = thermal_rms_velocity(temperature, mass_amu)
        v = np.linspace(-span * vr, span * vr, n)
        w = np.exp(-0.5 * (v / vr) ** 2)
        return cls(tuple(v), tuple(w / w.sum()), temperature, mass_amu,
                   span=span, kind="uniform")

    @classmethod
    def delta(cls, temperature: float = 403.0, mass_amu: float = 86.909
              ) -> "VelocityGrid":
        """Single stationary atom; degenerate grid for tests and quick looks."""
        return cls((0.0,), (1.0,), temperature, mass_amu, span=0.0,
                   kind="delta")


def doppler_shifts(v: float, geometry: str, k_pump: float, k_signal: float
                   ) -> tuple[float, float]:
    """Detuning shifts (pump, signal) for an atom at velocity v.

    Counter-propagating beams shift with opposite signs, co-propagating with
    the same sign; the overall sign convention is fixed here."""
    if geometry == COUNTER:
        return (-k_pump * v, +k_signal * v)
    if geometry == CO:
        return (-k_pump * v, -k_signal * v)
    raise ModelError(f"unknown geometry {geometry!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Everything one Doppler-averaged sweep needs."""

    detunings: np.ndarray
    geometry: str
    grid: VelocityGrid
    scheme: LevelScheme
    transitions: TransitionTable
    network: DecayNetwork
    fields: dict[str, FieldSpec]
    medium: MediumParams

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        if d.size > 1 and not (np.all(np.diff(d) > 0) or np.all(np.diff(d) < 0)):
            raise ModelError("detuning list must be strictly monotone")
        object.__setattr__(self, "detunings", d)
        if self.geometry not in (COUNTER, CO):
            raise ModelError(f"unknown geometry {self.geometry!r}")


class CellSolver:
    """Solves single (detuning, velocity) cells.

    The Liouvillian is assembled once; a detuning or Doppler shift only moves
    Hamiltonian diagonals, which maps to a diagonal update of the coefficient
    matrix.  The incremental path is exact (verified against full rebuilds in
    the test suite)."""

    def __init__(self, spec: SweepSpec):
        self.spec = spec
        scheme = spec.scheme
        self._ds0 = spec.fields["signal"].detuning
        h0 = build_hamiltonian(scheme, spec.transitions, spec.fields)
        liou = vectorize(h0, scheme, spec.network)
        self._liou = liou
        self._m0 = liou.m
        n_vec = len(liou.coords)
        self._diag = np.arange(n_vec)

        cc = np.zeros(n_vec, dtype=complex)
        cs = np.zeros(n_vec, dtype=complex)
        for k, (i, j) in enumerate(liou.coords):
            ti, tj = scheme.tiers[i], scheme.tiers[j]
            li, lj = scheme.is_lumped(i), scheme.is_lumped(j)
            ci = (ti >= 1 and not li) - (tj >= 1 and not lj)
            si = (ti >= 2 and not li) - (tj >= 2 and not lj)
            cc[k] = 1j * ci
            cs[k] = 1j * si
        self._cc, self._cs = cc, cs

        pos = liou.pos
        self._trace_row = pos[(scheme.n_levels - 1, scheme.n_levels - 1)]
        trace_vec = np.zeros(n_vec, dtype=complex)
        for k in liou.population_positions():
            trace_vec[k] = 1.0
        self._trace_vec = trace_vec
        self._b = np.zeros(n_vec, dtype=complex)
        self._b[self._trace_row] = 1.0
        self._k_pump = spec.fields["pump"].k
        self._k_signal = spec.fields["signal"].k

        sig = spec.transitions.for_field("signal")
        self._sig_terms = {
            q: [(pos[(scheme.index[e.lower], scheme.index[e.upper])],
                 e.strength) for e in sig if e.q == q]
            for q in (1, -1)}

    def solve_cell(self, delta_s: float, v: float) -> OpticalResponse:
        spec = self.spec
        shift_c, shift_s = doppler_shifts(v, spec.geometry,
                                          self._k_pump, self._k_signal)
        dlt_c = shift_c
        dlt_s = (delta_s - self._ds0) + shift_s

        m = self._m0.copy()
        m[self._diag, self._diag] += self._cc * dlt_c + self._cs * dlt_s
        saved_row = m[self._trace_row].copy()
        m[self._trace_row] = self._trace_vec
        try:
            x = np.linalg.solve(m, self._b)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"steady-state solve failed at delta_s={delta_s:g}, "
                f"v={v:g}: {exc}") from exc
        resid = m @ x - self._b
        resid[self._trace_row] = saved_row @ x
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(resid)) > 1e-9 * scale:
            raise SolverError(
                f"steady-state residual too large at delta_s={delta_s:g}, "
                f"v={v:g}")
        return self._response(x)

    def _response(self, x: np.ndarray) -> OpticalResponse:
        med = self.spec.medium
        sig = self.spec.fields["signal"]
        kl = med.k_cm * med.length
        out = {}
        for q in (1, -1):
            eps = sig.component(q)
            if abs(eps) < 1e-15:
                out[q] = (0.0, 0.0)
                continue
            if not self._sig_terms[q]:
                raise ModelError(
                    f"signal drives sigma{'+' if q == 1 else '-'} but no "
                    "transition of that polarization exists")
            total = sum(a * x[k] for k, a in self._sig_terms[q])
            ref = total / np.conjugate(eps)
            out[q] = (kl * med.beta / 2.0 * ref.real,
                      kl * med.beta * ref.imag / 2.0)
        (pp, ap), (pm, am) = out[1], out[-1]
        return OpticalResponse(pp, pm, ap, am)

    def averaged_response(self, delta_s: float) -> OpticalResponse:
        """Weight-average over the velocity grid, in fixed grid order."""
        acc = np.zeros(4)
        for v, w in zip(self.spec.grid.velocities, self.spec.grid.weights):
            acc += w * np.asarray(self.solve_cell(delta_s, v).as_tuple())
        return OpticalResponse(*acc)


_WORKER_SOLVER: CellSolver | None = None


def _worker_init(spec: SweepSpec) -> None:
    global _WORKER_SOLVER
    _WORKER_SOLVER = CellSolver(spec)


def _worker_run(job: tuple[int, float]) -> tuple[int, tuple[float, ...]]:
    idx, delta_s = job
    assert _WORKER_SOLVER is not None
    return idx, _WORKER_SOLVER.averaged_response(delta_s).as_tuple()


def sweep(spec: SweepSpec, workers: int = 1, progress=None,
          checkpoint: str | None = None) -> list[OpticalResponse]:
    """Doppler-averaged responses, one per signal detuning.

    Output order follows the detuning list and is independent of the worker
    count.  With a checkpoint path, completed detunings are saved every 16
    results and skipped on resume."""
    n = len(spec.detunings)
    results: dict[int, tuple[float, ...]] = {}

    if checkpoint and os.path.exists(checkpoint):
        data = np.load(checkpoint)
        if data["detunings"].shape == spec.detunings.shape and \
                np.allclose(data["detunings"], spec.detunings):
            for idx in np.flatnonzero(data["done"]):
                results[int(idx)] = tuple(data["responses"][idx])

    todo = [(i, float(d)) for i, d in enumerate(spec.detunings)
            if i not in results]
    since_save = 0

    def handle(idx, resp):
        nonlocal since_save
        results[idx] = resp
        since_save += 1
        if progress:
            progress(len(results), n)
        if checkpoint and (since_save >= 16 or len(results) == n):
            _save_checkpoint(checkpoint, spec.detunings, results)
            since_save = 0

    if workers <= 1 or len(todo) <= 1:
        solver = CellSolver(spec)
        for idx, d in todo:
            handle(idx, solver.averaged_response(d).as_tuple())
    else:
        chunk = max(1, len(todo) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(spec,)) as pool:
            for idx, resp in pool.map(_worker_run, todo, chunksize=chunk):
                handle(idx, resp)

    return [OpticalResponse(*results[i]) for i in range(n)]


def _save_checkpoint(path: str, detunings: np.ndarray,
                     results: dict[int, tuple[float, ...]]) -> None:
    n = len(detunings)
    responses = np.zeros((n, 4))
    done = np.zeros(n, dtype=bool)
    for idx, resp in results.items():
        responses[idx] = resp
        done[idx] = True
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, detunings=detunings, responses=responses, done=done)
    os.replace(tmp, path)


def write_sweep_csv(path: str, detunings: np.ndarray,
                    responses: list[OpticalResponse]) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_MAGIC + "\n")
        fh.write(CSV_HEADER + "\n")
        for d, r in zip(detunings, responses):
            fh.write("%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n" % (
                d, r.phi_plus, r.phi_minus, r.alpha_plus, r.alpha_minus,
                math.degrees(r.phi_d), r.alpha_d))


def read_sweep_csv(path: str) -> tuple[np.ndarray, list[OpticalResponse]]:
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != CSV_MAGIC:
            raise ModelError(f"not a vaporplate sweep CSV: {path}")
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ModelError(f"unexpected sweep CSV columns in {path}")
        rows = np.array([[float(tok) for tok in line.split(",")]
                         for line in fh if line.strip()])
    detunings = rows[:, 0]
    responses = [OpticalResponse(*row[1:5]) for row in rows]
    return detunings, responses
