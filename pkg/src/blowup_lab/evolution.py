"""Radial evolution of the co-rotational wave map equation

    u_tt = u_rr + u_r / r - f(u) / r^2.

Space is discretized on nodes ``r_j = j h`` (``j = 1..N``; ``u = 0`` on the
axis, ``u_N`` pinned) through the discrete energy

    E_h = sum_j h r_j [ut_j^2 + (g(u_j)/r_j)^2] / 2 + sum_j h r_{j-1/2} ((u_j - u_{j-1})/h)^2 / 2,

whose Hamiltonian equations are the usual centered second-order stencil.
Time stepping is velocity Verlet (leapfrog), which is symplectic and exactly
reversible, so ``E_h`` shows no secular drift and a step with ``-dt`` undoes
a step with ``dt``.  The singular terms are evaluated as
``g(u)/r = (u/r) G(u^2)`` and ``f(u)/r^2 = (u/r) F(u^2) / r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowupSuspected, ResolutionError, StabilityError
from .harmonic_map import HarmonicMap
from .profile import BlowupFrame, Corrector, U0Evaluator, U1Evaluator
from .surface import SurfaceProfile

CORE_POINTS = 32


@dataclass
class RadialField:
    """``(u, u_t)`` on ``r_j = j h``, ``j = 1..N``; the last node is the outer boundary."""

    surface: SurfaceProfile
    h: float
    u: np.ndarray
    ut: np.ndarray
    t: float = 0.0
    boundary: str = "dirichlet"
    sponge_width: float = 0.1
    sponge_strength: float = 0.0

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float)
        self.ut = np.array(self.ut, dtype=float)
        if self.u.shape != self.ut.shape or self.u.ndim != 1 or self.u.size < 3:
            raise ValueError("u and ut must be 1-d arrays of equal length >= 3")
        if self.boundary not in ("dirichlet", "sponge"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        n = self.u.size
        self.r = self.h * np.arange(1, n + 1)
        self.r_half = self.h * (np.arange(n) + 0.5)      # r_{j-1/2}, j = 1..N
        self._u_boundary = float(self.u[-1])
        self._ut_boundary = float(self.ut[-1])
        self.ut[-1] = 0.0
        if self.boundary == "sponge":
            start = self.r_max * (1.0 - self.sponge_width)
            s = np.clip((self.r - start) / (self.r_max - start), 0.0, 1.0)
            self._sigma = self.sponge_strength * s * s
        else:
            self._sigma = None

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def copy(self) -> "RadialField":
        c = RadialField(self.surface, self.h, self.u.copy(), self.ut.copy(), self.t, self.boundary,
                        self.sponge_width, self.sponge_strength)
        return c

    # discrete operator

    def acceleration(self, u=None):
        """``u_rr + u_r/r - f(u)/r^2`` by the Hamiltonian stencil (zero on the pinned node)."""
        u = self.u if u is None else u
        h = self.h
        up = np.concatenate(([0.0], u))                  # axis value u_0 = 0
        flux = self.r_half * np.diff(up) / h             # r_{j-1/2} (u_j - u_{j-1}) / h
        lap = np.empty_like(u)
        lap[:-1] = (flux[1:] - flux[:-1]) / (h * self.r[:-1])
        q = u / self.r
        acc = lap - q * self.surface.F(u * u) / self.r
        acc[-1] = 0.0
        return acc

    def energy_density(self):
        """Energy per node: kinetic and potential at ``r_j`` plus the gradient on ``[r_{j-1}, r_j]``."""
        h = self.h
        ut = self.ut.copy()
        ut[-1] = 0.0
        q = self.u / self.r
        pot = (q * self.surface.G(self.u * self.u)) ** 2
        grad = np.diff(np.concatenate(([0.0], self.u))) / h
        cell = 0.5 * h * self.r * (ut * ut + pot) + 0.5 * h * self.r_half * grad * grad
        cell[-1] -= 0.25 * h * self.r[-1] * pot[-1]      # trapezoid weight at the outer end
        return cell

    def axis_ratio(self, k: int = 3):
        """``u/r`` at the innermost ``k`` nodes."""
        return self.u[:k] / self.r[:k]


def energy(field: RadialField) -> float:
    return float(np.sum(field.energy_density()))


def local_energy(field: RadialField, radius: float) -> float:
    """Energy of nodes with ``r_j <= radius`` (a partial sum of ``energy``)."""
    m = int(np.searchsorted(field.r, radius * (1 + 1e-12), side="right"))
    return float(np.sum(field.energy_density()[:m]))


@dataclass
class EnergyReport:
    t: float
    E_total: float
    E_loc: dict = field(default_factory=dict)
    flux: float = 0.0
    sup_u: float = 0.0
    dt: float = float("nan")


def report(field: RadialField, radii=(), dt: float = float("nan")) -> EnergyReport:
    dens = field.energy_density()
    csum = np.cumsum(dens)
    loc = {}
    for rad in radii:
        m = int(np.searchsorted(field.r, rad * (1 + 1e-12), side="right"))
        loc[float(rad)] = float(csum[m - 1]) if m else 0.0
    # energy flux through the outer boundary, -r u_t u_r (zero when pinned)
    ur = (field.u[-1] - field.u[-2]) / field.h
    flux = -field.r[-1] * field.ut[-1] * ur
    return EnergyReport(field.t, float(csum[-1]), loc, float(flux),
                        float(np.max(np.abs(field.u))), dt)


def max_stable_cfl() -> float:
    return 1.0


def step(field: RadialField, dt: float, cfl: float = 1.0) -> RadialField:
    """One velocity-Verlet step in place (``dt`` may be negative); returns ``field``."""
    if cfl > max_stable_cfl():
        raise StabilityError(f"cfl {cfl:g} exceeds {max_stable_cfl():g}")
    if abs(dt) > cfl * field.h * (1 + 1e-12):
        raise StabilityError(f"|dt| = {abs(dt):.3e} violates |dt| <= cfl h = {cfl * field.h:.3e}")
    sig = field._sigma
    if sig is not None:
        field.ut *= np.exp(-0.5 * sig * abs(dt))
    acc = field.acceleration()
    field.ut += 0.5 * dt * acc
    field.u += dt * field.ut
    field.u[-1] = field._u_boundary
    field.ut[-1] = 0.0
    acc = field.acceleration()
    field.ut += 0.5 * dt * acc
    field.ut[-1] = 0.0
    if sig is not None:
        field.ut *= np.exp(-0.5 * sig * abs(dt))
    field.t += dt
    return field


def evolve(field: RadialField, t_end: float, cfl: float = 0.5, report_times=None,
           radii_fn=None, guard=None):
    """Advance to ``t_end`` (either direction), logging an ``EnergyReport`` at each requested time.

    ``radii_fn(t)`` gives the radii for local energies; ``guard(field)`` may
    raise to stop the run.  Non-finite values raise ``BlowupSuspected``
    carrying the last good report.
    """
    if cfl <= 0 or cfl > max_stable_cfl():
        raise StabilityError(f"cfl must lie in (0, {max_stable_cfl():g}]")
    direction = 1.0 if t_end >= field.t else -1.0
    times = sorted({float(t_end)} | set(report_times or []), reverse=direction < 0)
    times = [t for t in times if (t - field.t) * direction >= 0]
    radii_fn = radii_fn or (lambda t: ())
    dt_max = cfl * field.h
    trajectory = [report(field, radii_fn(field.t))]
    last = trajectory[0]
    for target in times:
        span = (target - field.t) * direction
        if span <= 0:
            continue
        n_steps = max(1, int(math.ceil(span / dt_max * (1 - 1e-12))))
        dt = direction * span / n_steps
        for _ in range(n_steps):
            step(field, dt, cfl)
            if not (np.all(np.isfinite(field.u)) and np.all(np.isfinite(field.ut))):
                raise BlowupSuspected(f"non-finite field at t = {field.t:g}; last report at "
                                      f"t = {last.t:g}", field.t, last)
            if guard is not None:
                guard(field)
        field.t = target
        last = report(field, radii_fn(field.t), abs(dt))
        trajectory.append(last)
    return trajectory


# initial data

def init_static(hm: HarmonicMap, r_max: float, n: int, **kwargs) -> RadialField:
    """``u = Q(r)``, ``u_t = 0``."""
    h = r_max / n
    r = h * np.arange(1, n + 1)
    return RadialField(hm.surface, h, hm.eval_Q(r), np.zeros(n), 0.0, **kwargs)


def check_core_resolution(frame: BlowupFrame, t: float, h: float, points: int = CORE_POINTS):
    """Raise ``ResolutionError`` when fewer than ``points`` nodes span ``r <= 1/lambda(t)``."""
    core = 1.0 / frame.lam(t)
    if core < points * h:
        raise ResolutionError(
            f"core radius {core:.3e} at t = {t:g} spans {core / h:.1f} < {points} grid points")


def init_from_profile(frame: BlowupFrame, hm: HarmonicMap, corrector: Corrector | None,
                      t_start: float, r_max: float, n: int, **kwargs) -> RadialField:
    """Sample ``u1 = u0 + v1`` (or ``u0`` without a corrector) and its exact time derivative.

    The corrector is only meaningful inside the cone ``r <= t`` (it grows
    like ``R log R``), so ``v1`` is switched off smoothly between ``r = t``
    and ``r = 2 t``.  Inside the cone the data are exactly ``u1``.
    """
    if not 0 < t_start <= frame.t0:
        raise ValueError("t_start must lie in (0, t0]")
    if r_max < t_start:
        raise ValueError("r_max must be at least t_start")
    h = r_max / n
    check_core_resolution(frame, t_start, h)
    r = h * np.arange(1, n + 1)
    u, ut = U0Evaluator(frame, hm).derivs(t_start, r)[:2]
    if corrector is not None:
        chi = smooth_cutoff(r / (2.0 * t_start))
        v, vt = U1Evaluator(frame, hm, corrector).corrector_derivs(t_start, r)[:2]
        # d/dt chi(r/2t) = -r/(2t^2) chi'(r/2t): only outside the cone
        x = r / (2.0 * t_start)
        dchi = smooth_cutoff_derivative(x)
        u = u + chi * v
        ut = ut + chi * vt - dchi * x / t_start * v
    return RadialField(hm.surface, h, u, ut, t_start, **kwargs)


def smooth_cutoff(x):
    """1 for ``x <= 1/2``, 0 for ``x >= 1``, C-infinity in between."""
    x = np.asarray(x, dtype=float)
    s = np.clip(2.0 * x - 1.0, 0.0, 1.0)
    a = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    b = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return a / (a + b)


def smooth_cutoff_derivative(x):
    x = np.asarray(x, dtype=float)
    s = 2.0 * x - 1.0
    inside = (s > 0) & (s < 1)
    out = np.zeros_like(x)
    si = s[inside]
    a = np.exp(-1.0 / (1.0 - si))
    b = np.exp(-1.0 / si)
    out[inside] = -2.0 * a * b * (1.0 / (1.0 - si) ** 2 + 1.0 / si ** 2) / (a + b) ** 2
    return out


def init_control(frame: BlowupFrame, hm: HarmonicMap, t_start: float, r_max: float, n: int,
                 amplitude: float = 0.1, **kwargs) -> RadialField:
    """``amplitude * Q(lambda r)`` truncated smoothly to zero at ``r = 2 t_start``, at rest."""
    h = r_max / n
    r = h * np.arange(1, n + 1)
    u = amplitude * hm.eval_Q(frame.R(t_start, r)) * smooth_cutoff(r / (2 * t_start))
    return RadialField(hm.surface, h, u, np.zeros(n), t_start, **kwargs)


# the concentration experiment

@dataclass
class ExperimentRow:
    t: float
    E_total: float
    Eloc_cone: float
    sup_u: float
    min_dt_used: float


@dataclass
class ExperimentResult:
    rows: list
    E_Q: float
    complete: bool = True
    note: str = ""
    params: dict = field(default_factory=dict)


def dyadic_times(t_start: float, t_end: float):
    out = []
    t = t_start
    while t > t_end * (1 + 1e-12):
        out.append(t)
        t *= 0.5
    out.append(t_end)
    return out


def run_blowup_experiment(hm: HarmonicMap, nu: float = 1.0, t_start: float = 0.2,
                          t_end: float = 0.05, n: int | None = None, cfl: float = 0.5,
                          r_max_factor: float = 2.0, corrector: Corrector | None = None,
                          control: bool = False, amplitude: float = 0.1) -> ExperimentResult:
    """Evolve from the improved profile at ``t_start`` toward ``t_end < t_start``.

    The outer boundary sits at ``r_max = r_max_factor * t_start >= t_start``;
    its influence travels inward at unit speed, so the cone ``r < t`` never
    sees it.  ``n`` defaults to the smallest grid with ``CORE_POINTS`` nodes
    across ``1/lambda(t_end)``.  With ``control`` the data are the truncated
    sub-threshold multiple of ``Q`` instead.
    """
    from .profile import solve_corrector

    if not 0 < t_end < t_start:
        raise ValueError("need 0 < t_end < t_start")
    frame = BlowupFrame(nu)
    r_max = r_max_factor * t_start
    if n is None:
        n = int(math.ceil(r_max * frame.lam(t_end) * CORE_POINTS * 1.25))
    h = r_max / n
    check_core_resolution(frame, t_end, h)
    if control:
        fld = init_control(frame, hm, t_start, r_max, n, amplitude)
    else:
        corrector = corrector or solve_corrector(frame, hm)
        fld = init_from_profile(frame, hm, corrector, t_start, r_max, n)
    times = dyadic_times(t_start, t_end)
    rows = []
    complete, note = True, ""

    def add(rep):
        rows.append(ExperimentRow(rep.t, rep.E_total, rep.E_loc.get(float(rep.t), 0.0),
                                  rep.sup_u, rep.dt))

    add(report(fld, (fld.t,)))
    for target in times[1:]:
        try:
            check_core_resolution(frame, target, h)
            traj = evolve(fld, target, cfl, radii_fn=lambda t: (t,))
        except (ResolutionError, BlowupSuspected) as exc:
            complete, note = False, str(exc)
            break
        add(traj[-1])
    params = dict(nu=nu, t_start=t_start, t_end=t_end, n=n, h=h, r_max=r_max, cfl=cfl,
                  control=control, amplitude=amplitude if control else None)
    return ExperimentResult(rows, hm.surface.energy_of_harmonic_map(), complete, note, params)
