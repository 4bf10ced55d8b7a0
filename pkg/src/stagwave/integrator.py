"""Three-step staggered (leap-frog) integrator with internal variables.

The integrator is discretisation agnostic.  A concrete spatial scheme
supplies the operator bundle (:class:`SystemOps`) and a material process
supplies the stored energy, its proto-stress gradient and the local flow
rule (:class:`InternalProcess`).  One step advances, in order,

1. the proto-stress (explicit in the current velocity),
2. the internal variable (local incremental minimisation),
3. the velocity through the lumped mass inverse, then the displacement.

Velocities live on integer time levels and the proto-stress on the
staggered half levels, so in the linear load-free case the scheme
conserves the twisted energy ``0.5*<M v^{k+1}, v^k> + Phi(Sigma, z)``
exactly.  ``energy_report`` evaluates that balance per step, including
the dissipation of the internal process, and ``estimate_tau_max`` bounds
the stable time step through power iteration on the generalized Rayleigh
quotient of the assembled operators.

All DOF vectors are flat, finite ``float64`` arrays.  Each carries an
implicit space tag: H (velocity/force), S (proto-stress/strain) or Z
(internal variable); lengths are fixed by the discretisation that
produced them and are validated where vectors cross module boundaries.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .errors import BlowUpError, ConfigError, EstimationError

logger = logging.getLogger(__name__)

# Any field entry beyond this magnitude aborts the run with a CFL
# violation diagnostic (non-finite values trip the same check).
BLOWUP_LIMIT = 1e12


class SystemOps(Protocol):
    """Operator bundle a spatial discretisation must supply.

    ``apply_E`` maps velocities to strain-like values, ``apply_E_adjoint``
    is its exact transpose under the weighted S-pairing (so adjoint
    consistency holds by construction), ``apply_C``/``apply_C_adjoint``
    apply the generalized elasticity and ``apply_mass_inverse`` the
    diagonal (lumped, entrywise positive) mass inverse.  ``load_F`` and
    ``load_Gdot`` evaluate the external loads.  ``s_pair`` and
    ``mass_pair`` expose the duality pairings the energy audit uses.
    """

    dim_h: int
    dim_s: int

    def apply_E(self, v: np.ndarray) -> np.ndarray: ...

    def apply_E_adjoint(self, s: np.ndarray) -> np.ndarray: ...

    def apply_C(self, e: np.ndarray) -> np.ndarray: ...

    def apply_C_adjoint(self, e: np.ndarray) -> np.ndarray: ...

    def apply_C_inverse(self, s: np.ndarray) -> np.ndarray: ...

    def apply_mass_inverse(self, f: np.ndarray) -> np.ndarray: ...

    def s_pair(self, a: np.ndarray, b: np.ndarray) -> float: ...

    def mass_pair(self, v: np.ndarray, w: np.ndarray) -> float: ...

    def load_F(self, t: float) -> Optional[np.ndarray]: ...

    def load_Gdot(self, t: float) -> Optional[np.ndarray]: ...


class InternalProcess(Protocol):
    """Stored energy and flow rule of one internal-variable model.

    ``phi_sigma_prime(sigma, z)`` must be linear in ``sigma`` when
    evaluated at ``stiffest_state()`` (all shipped processes are), since
    the stable-step estimator iterates on that linearisation.

    ``solve_flow_rule`` receives the fresh proto-stress and the previous
    internal state, so dissipation metrics depending on the current state
    (and stored energies handled through a difference quotient instead of
    the midpoint gradient) fit the same hook; ``dissipation_increment``
    must equal the stored-energy drop Phi(sigma, z_old) - Phi(sigma, z_new)
    for the ledger identity to close exactly.
    """

    dim_z: int

    def phi(self, sigma: np.ndarray, z: np.ndarray) -> float: ...

    def phi_sigma_prime(self, sigma: np.ndarray, z: np.ndarray) -> np.ndarray: ...

    def solve_flow_rule(
        self, sigma_new: np.ndarray, z_old: np.ndarray, tau: float
    ) -> np.ndarray: ...

    def dissipation_increment(
        self, sigma_new: np.ndarray, z_old: np.ndarray, z_new: np.ndarray, tau: float
    ) -> float: ...

    def stiffest_state(self) -> np.ndarray: ...

    def phi_prime_gap(
        self,
        sigma_new: np.ndarray,
        z_old: np.ndarray,
        z_new: np.ndarray,
        dsigma: np.ndarray,
    ) -> float: ...


@dataclass
class LoadProgram:
    """Time-dependent external loading ``F`` (bulk/surface force, H-space)
    and ``G`` (proto-stress offset, S-space).

    ``rule`` selects how interval averages of ``F`` are computed:
    ``"midpoint"`` evaluates at the interval midpoint (exact for loads
    affine in time), ``"quadrature"`` uses a composite midpoint rule with
    ``quad_panels`` panels for loads that are not smooth in time.
    Evaluation times beyond ``t_final`` clamp to ``t_final`` (logged once).
    """

    F: Optional[Callable[[float], np.ndarray]] = None
    G: Optional[Callable[[float], np.ndarray]] = None
    rule: str = "midpoint"
    quad_panels: int = 4096
    t_final: Optional[float] = None
    dim_h: int = 0
    dim_s: int = 0
    _clamp_warned: bool = field(default=False, repr=False)

    def _clamp(self, t: float) -> float:
        if self.t_final is not None and t > self.t_final:
            if not self._clamp_warned:
                logger.warning(
                    "load evaluated at t=%.6g beyond t_final=%.6g; clamping",
                    t,
                    self.t_final,
                )
                self._clamp_warned = True
            return self.t_final
        return t

    def eval_F(self, t: float) -> Optional[np.ndarray]:
        if self.F is None:
            return None
        return self.F(self._clamp(t))

    def eval_G(self, t: float) -> Optional[np.ndarray]:
        if self.G is None:
            return None
        return self.G(self._clamp(t))


ZERO_LOADS = LoadProgram()


def average_load_F(program: LoadProgram, k: int, tau: float) -> np.ndarray:
    """Average of F over the step interval, (1/tau) * int_{k tau}^{(k+1) tau} F dt.

    For loads affine in time the midpoint rule makes this exact.  A
    program without F yields the zero vector.
    """
    if k < 0 or tau <= 0.0:
        raise ConfigError(f"average_load_F needs k >= 0 and tau > 0, got {k}, {tau}")
    if program.F is None:
        return np.zeros(program.dim_h)
    if program.rule == "midpoint":
        return program.eval_F((k + 0.5) * tau)
    n = int(program.quad_panels)
    t0 = k * tau
    acc = program.eval_F(t0 + 0.5 * tau / n).astype(float, copy=True)
    for i in range(1, n):
        acc += program.eval_F(t0 + (i + 0.5) * tau / n)
    return acc / n


def difference_load_G(program: LoadProgram, k: int, tau: float) -> np.ndarray:
    """Central difference of G at the staggered instants.

    For k >= 1 this is (G((k+1/2) tau) - G((k-1/2) tau)) / tau.  The k = 0
    variant is one sided over the first half interval, 2 (G(tau/2) - G(0)) / tau,
    so that the half-length starting update reproduces G(tau/2) - G(0) exactly.
    A program without G yields the zero vector.
    """
    if program.G is None:
        return np.zeros(program.dim_s)
    if k == 0:
        return 2.0 * (program.eval_G(0.5 * tau) - program.eval_G(0.0)) / tau
    return (program.eval_G((k + 0.5) * tau) - program.eval_G((k - 0.5) * tau)) / tau


@dataclass
class StaggeredState:
    """Integrator state after ``k`` completed steps (t = k tau).

    ``sigma`` is the proto-stress at the staggered half level (the level
    that enters the next velocity update), ``v`` the velocity at the
    integer level, ``z`` the internal variable and ``u`` the accumulated
    displacement (tau-weighted prefix sum of velocities plus u0).
    """

    sigma: np.ndarray
    v: np.ndarray
    z: np.ndarray
    u: np.ndarray
    k: int = 0
    t: float = 0.0

    def validate(self, ops: SystemOps, process: InternalProcess) -> None:
        if self.sigma.shape != (ops.dim_s,) or self.v.shape != (ops.dim_h,):
            raise ConfigError(
                f"state dimensions {self.sigma.shape}/{self.v.shape} do not match "
                f"ops dims S={ops.dim_s}, H={ops.dim_h}"
            )
        if self.z.shape != (process.dim_z,):
            raise ConfigError(
                f"internal variable has length {self.z.shape}, process wants {process.dim_z}"
            )
        for name, arr in (("sigma", self.sigma), ("v", self.v), ("z", self.z), ("u", self.u)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"non-finite entries in initial {name}")


def zero_state(ops: SystemOps, process: InternalProcess, z0: Optional[np.ndarray] = None) -> StaggeredState:
    """Rest state with optional initial internal variable."""
    z = np.zeros(process.dim_z) if z0 is None else np.asarray(z0, dtype=float).copy()
    return StaggeredState(
        sigma=np.zeros(ops.dim_s),
        v=np.zeros(ops.dim_h),
        z=z,
        u=np.zeros(ops.dim_h),
    )


@dataclass
class EnergyLedger:
    """One audited step of the discrete energy balance.

    ``twisted_kinetic`` is 0.5*<M v^{k+1}, v^k>, ``stored`` the energy
    Phi(Sigma^{k+1}, z^{k+1}), ``dissipated_cum``/``work_cum`` running
    sums of the dissipation increments and external work, ``a_coeff``
    the stability coefficient 1 - (tau^2/8) <E*S, M^-1 E*S> / Phi of the
    current state (positive iff the step is inside the stable range), and
    ``imbalance`` the residual of the discrete balance identity (zero up
    to rounding for the shipped processes).
    """

    k: int
    t: float
    twisted_kinetic: float
    stored: float
    dissipated_cum: float
    work_cum: float
    a_coeff: float
    imbalance: float

    @property
    def total(self) -> float:
        return self.twisted_kinetic + self.stored


@dataclass
class StepAudit:
    """Intermediate quantities of one step, reused by the energy report."""

    v_old: np.ndarray
    sigma_old: np.ndarray
    phi_new: float
    phi_sigma_new_z_old: float
    diss_incr: float
    e_new: np.ndarray
    e_old: np.ndarray
    quad: float
    work_f: float
    work_g: float
    correction: float


def init_half_step(
    sigma0: np.ndarray, v0: np.ndarray, tau: float, ops: SystemOps
) -> np.ndarray:
    """Advance the initial proto-stress by half a step to the staggered level.

    Returns sigma0 + (tau/2) C E v0 + (tau/2) Gdot(0).
    """
    if sigma0.shape != (ops.dim_s,) or v0.shape != (ops.dim_h,):
        raise ConfigError(
            f"init_half_step dimension mismatch: sigma {sigma0.shape}, v {v0.shape} "
            f"vs ops S={ops.dim_s}, H={ops.dim_h}"
        )
    sigma = sigma0 + 0.5 * tau * ops.apply_C(ops.apply_E(v0))
    gdot = ops.load_Gdot(0.0)
    if gdot is not None:
        sigma = sigma + 0.5 * tau * gdot
    return sigma


def _advance(
    state: StaggeredState,
    ops: SystemOps,
    process: InternalProcess,
    program: LoadProgram,
    tau: float,
    e_old: Optional[np.ndarray] = None,
) -> tuple[StaggeredState, StepAudit]:
    """One step of the scheme plus its audit record.

    ``e_old`` may carry the previous step's phi_sigma_prime evaluation to
    avoid recomputing it inside a driver loop.
    """
    k = state.k
    # 1) proto-stress update; the very first update is the half step that
    #    moves Sigma onto the staggered levels.
    dt_sigma = tau if k > 0 else 0.5 * tau
    rate = ops.apply_C(ops.apply_E(state.v))
    dk = difference_load_G(program, k, tau) if program.G is not None else None
    if dk is not None:
        rate = rate + dk
    sigma_new = state.sigma + dt_sigma * rate

    # 2) internal variable via the local flow rule at the fresh proto-stress.
    z_new = process.solve_flow_rule(sigma_new, state.z, tau)

    # 3) generalized stress, velocity and displacement.
    e_new = process.phi_sigma_prime(sigma_new, z_new)
    f_int = ops.apply_E_adjoint(ops.apply_C_adjoint(e_new))
    f_ext = average_load_F(program, k, tau) if program.F is not None else None
    f_net = (f_ext - f_int) if f_ext is not None else -f_int
    v_new = state.v + tau * ops.apply_mass_inverse(f_net)
    u_new = state.u + tau * v_new

    peak = max(np.max(np.abs(v_new), initial=0.0), np.max(np.abs(sigma_new), initial=0.0))
    if not peak < BLOWUP_LIMIT:  # also catches NaN/Inf
        raise BlowUpError(k, detail=f"field magnitude {peak!r} (CFL violation?)")

    # Audit quantities for the discrete energy balance.
    phi_new = process.phi(sigma_new, z_new)
    phi_mid = process.phi(sigma_new, state.z)
    if e_old is None:
        e_old = process.phi_sigma_prime(state.sigma, state.z)
    m_inv_f = ops.apply_mass_inverse(f_int)
    quad = float(f_int @ m_inv_f)
    if f_ext is not None:
        f_prev = average_load_F(program, k - 1, tau) if k > 0 else f_ext
        work_f = tau * float((0.5 * (f_ext + f_prev)) @ state.v)
    else:
        work_f = 0.0
    work_g = dt_sigma * ops.s_pair(0.5 * (e_new + e_old), dk) if dk is not None else 0.0
    correction = process.phi_prime_gap(sigma_new, state.z, z_new, sigma_new - state.sigma)

    new_state = StaggeredState(
        sigma=sigma_new, v=v_new, z=z_new, u=u_new, k=k + 1, t=(k + 1) * tau
    )
    audit = StepAudit(
        v_old=state.v,
        sigma_old=state.sigma,
        phi_new=phi_new,
        phi_sigma_new_z_old=phi_mid,
        diss_incr=phi_mid - phi_new,
        e_new=e_new,
        e_old=e_old,
        quad=quad,
        work_f=work_f,
        work_g=work_g,
        correction=correction,
    )
    return new_state, audit


def step(
    state: StaggeredState,
    ops: SystemOps,
    process: InternalProcess,
    program: LoadProgram,
    tau: float,
) -> StaggeredState:
    """Advance the state by one step of the three-phase scheme."""
    return _advance(state, ops, process, program, tau)[0]


def _ledger_row(
    state: StaggeredState,
    ops: SystemOps,
    audit: StepAudit,
    tau: float,
    prev_row: Optional[EnergyLedger],
) -> EnergyLedger:
    twisted = 0.5 * ops.mass_pair(state.v, audit.v_old)
    stored = audit.phi_new
    if stored > 1e-300:
        # Energy-exact coefficient: the twisted energy equals
        # T((v^{k+1}+v^k)/2) + a * Phi (+ load cross terms) with this a.
        a_coeff = 1.0 - 0.125 * tau * tau * audit.quad / stored
    else:
        a_coeff = 1.0
    work_incr = audit.work_f + audit.work_g
    if prev_row is None:
        # The twisted energy is only defined from level 1 on, so the first
        # step has no predecessor to balance against.
        imbalance = 0.0
        diss_cum = audit.diss_incr
        work_cum = work_incr
    else:
        imbalance = (
            (twisted + stored)
            - prev_row.total
            + audit.diss_incr
            - work_incr
            + audit.correction
        )
        diss_cum = prev_row.dissipated_cum + audit.diss_incr
        work_cum = prev_row.work_cum + work_incr
    return EnergyLedger(
        k=state.k,
        t=state.t,
        twisted_kinetic=twisted,
        stored=stored,
        dissipated_cum=diss_cum,
        work_cum=work_cum,
        a_coeff=a_coeff,
        imbalance=imbalance,
    )


def energy_report(
    prev_state: StaggeredState,
    state: StaggeredState,
    ops: SystemOps,
    process: InternalProcess,
    program: LoadProgram,
    tau: float,
    prev_row: Optional[EnergyLedger] = None,
) -> EnergyLedger:
    """Audit the step that took ``prev_state`` to ``state``.

    Recomputes all balance terms from the two states; ``prev_row`` supplies
    the predecessor energy and the running sums.
    """
    if state.k != prev_state.k + 1:
        raise ConfigError(
            f"energy_report expects consecutive states, got k={prev_state.k} -> {state.k}"
        )
    k = prev_state.k
    dt_sigma = tau if k > 0 else 0.5 * tau
    e_new = process.phi_sigma_prime(state.sigma, state.z)
    e_old = process.phi_sigma_prime(prev_state.sigma, prev_state.z)
    f_int = ops.apply_E_adjoint(ops.apply_C_adjoint(e_new))
    quad = float(f_int @ ops.apply_mass_inverse(f_int))
    if program.F is not None:
        f_ext = average_load_F(program, k, tau)
        f_prev = average_load_F(program, k - 1, tau) if k > 0 else f_ext
        work_f = tau * float((0.5 * (f_ext + f_prev)) @ prev_state.v)
    else:
        work_f = 0.0
    if program.G is not None:
        dk = difference_load_G(program, k, tau)
        work_g = dt_sigma * ops.s_pair(0.5 * (e_new + e_old), dk)
    else:
        work_g = 0.0
    phi_new = process.phi(state.sigma, state.z)
    phi_mid = process.phi(state.sigma, prev_state.z)
    audit = StepAudit(
        v_old=prev_state.v,
        sigma_old=prev_state.sigma,
        phi_new=phi_new,
        phi_sigma_new_z_old=phi_mid,
        diss_incr=phi_mid - phi_new,
        e_new=e_new,
        e_old=e_old,
        quad=quad,
        work_f=work_f,
        work_g=work_g,
        correction=process.phi_prime_gap(
            state.sigma, prev_state.z, state.z, state.sigma - prev_state.sigma
        ),
    )
    return _ledger_row(state, ops, audit, tau, prev_row)


@dataclass
class RunResult:
    """Final state plus the per-step ledger and boundedness monitors."""

    state: StaggeredState
    ledger: list[EnergyLedger]
    sup_v: float = 0.0
    sup_sigma: float = 0.0
    sup_z: float = 0.0


Monitor = Callable[[StaggeredState, Optional[EnergyLedger]], None]


def run(
    state: StaggeredState,
    ops: SystemOps,
    process: InternalProcess,
    program: LoadProgram,
    tau: float,
    n_steps: int,
    monitors: Sequence[Monitor] = (),
    collect_ledger: bool = True,
) -> RunResult:
    """Apply ``n_steps`` steps, audit each one, and fire monitors.

    Raises :class:`BlowUpError` (with the partial ledger attached) when a
    field leaves the admissible range.
    """
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    state.validate(ops, process)
    ledger: list[EnergyLedger] = []
    prev_row: Optional[EnergyLedger] = None
    e_old: Optional[np.ndarray] = None
    sup_v = float(np.max(np.abs(state.v), initial=0.0))
    sup_sigma = float(np.max(np.abs(state.sigma), initial=0.0))
    sup_z = float(np.max(np.abs(state.z), initial=0.0))
    for _ in range(n_steps):
        try:
            state, audit = _advance(state, ops, process, program, tau, e_old=e_old)
        except BlowUpError as err:
            err.ledger = ledger
            err.state = state
            raise
        e_old = audit.e_new
        row = _ledger_row(state, ops, audit, tau, prev_row)
        prev_row = row
        if collect_ledger:
            ledger.append(row)
        sup_v = max(sup_v, float(np.max(np.abs(state.v), initial=0.0)))
        sup_sigma = max(sup_sigma, float(np.max(np.abs(state.sigma), initial=0.0)))
        if process.dim_z:
            sup_z = max(sup_z, float(np.max(np.abs(state.z), initial=0.0)))
        for monitor in monitors:
            monitor(state, row)
    return RunResult(state=state, ledger=ledger, sup_v=sup_v, sup_sigma=sup_sigma, sup_z=sup_z)


def central_difference_step(
    u_prev: np.ndarray,
    u_curr: np.ndarray,
    ops: SystemOps,
    program: LoadProgram,
    tau: float,
    t: float = 0.0,
) -> np.ndarray:
    """One step of the classical two-level displacement scheme.

    ``u_next = 2 u - u_prev + tau^2 M^-1 (F(t) - E* C E u)``; valid for the
    purely elastic problem (no internal variable) and used as a cross-check
    of the staggered scheme.
    """
    f_int = ops.apply_E_adjoint(ops.apply_C(ops.apply_E(u_curr)))
    f = program.eval_F(t)
    f_net = (f - f_int) if f is not None else -f_int
    u_next = 2.0 * u_curr - u_prev + tau * tau * ops.apply_mass_inverse(f_net)
    peak = np.max(np.abs(u_next), initial=0.0)
    if not peak < BLOWUP_LIMIT:
        raise BlowUpError(-1, detail=f"central-difference field magnitude {peak!r}")
    return u_next


@dataclass
class SpectralEstimate:
    """Result of the power iteration on the stability Rayleigh quotient."""

    quotient: float  # sup <E*S, M^-1 E*S> / (2 Phi)
    iterations: int
    converged: bool


def spectral_sup(
    ops: SystemOps,
    process: InternalProcess,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    seed: int = 0,
    block: int = 4,
) -> SpectralEstimate:
    """Block power iteration for sup over Sigma of <E*S, M^-1 E*S> / (2 Phi).

    S = C* phi_sigma_prime(Sigma, z_stiff) with the process's stiffest
    internal state; the quotient's supremum fixes the stable step.  A
    small iterated subspace with a Rayleigh-Ritz projection absorbs the
    near-degenerate top cluster these grids produce (single-vector power
    iteration false-plateaus on it).  The iteration stops once the top
    Ritz value, improved by one Aitken extrapolation, stagnates to
    ``tol`` (relative) over a short window.
    """
    z_stiff = process.stiffest_state()
    rng = np.random.default_rng(seed)
    m = max(1, min(block, ops.dim_s))
    xs = [v / np.linalg.norm(v) for v in rng.standard_normal((m, ops.dim_s))]
    lam_hist: list[float] = []
    ext_hist: list[float] = []
    window = 3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        es = [process.phi_sigma_prime(x, z_stiff) for x in xs]
        fs = [ops.apply_E_adjoint(ops.apply_C_adjoint(e)) for e in es]
        ws = [ops.apply_mass_inverse(f) for f in fs]
        a_small = np.array([[float(fi @ wj) for wj in ws] for fi in fs])
        b_small = np.array([[ops.s_pair(ei, xj) for xj in xs] for ei in es])
        a_small = 0.5 * (a_small + a_small.T)
        b_small = 0.5 * (b_small + b_small.T)
        try:
            chol = np.linalg.cholesky(b_small)
        except np.linalg.LinAlgError:
            # Subspace collapsed onto fewer directions; re-seed the block.
            xs = [v / np.linalg.norm(v) for v in rng.standard_normal((m, ops.dim_s))]
            continue
        inv = np.linalg.inv(chol)
        ritz, vecs = np.linalg.eigh(inv @ a_small @ inv.T)
        lam = float(ritz[-1])
        if lam <= 0.0:
            return SpectralEstimate(quotient=0.0, iterations=iterations, converged=True)
        lam_hist.append(lam)
        ext = lam
        if len(lam_hist) >= 3:
            d1 = lam_hist[-2] - lam_hist[-3]
            d2 = lam_hist[-1] - lam_hist[-2]
            if d1 > d2 > 0.0:
                ext = lam_hist[-1] + d2 * d2 / (d1 - d2)
        ext_hist.append(ext)
        if len(ext_hist) > window:
            deltas = [abs(ext_hist[-i] - ext_hist[-i - 1]) for i in range(1, window + 1)]
            if all(d <= tol * max(abs(ext), 1e-300) for d in deltas):
                converged = True
                break
        # Ritz rotation of the advanced block, then renormalisation.
        ys = [ops.apply_C(ops.apply_E(w)) for w in ws]
        coeffs = inv.T @ vecs
        new_xs = []
        for j in range(m):
            v = sum(coeffs[i, m - 1 - j] * ys[i] for i in range(m))
            nrm = np.linalg.norm(v)
            if nrm == 0.0:
                v = rng.standard_normal(ops.dim_s)
                nrm = np.linalg.norm(v)
            new_xs.append(v / nrm)
        xs = new_xs
    if not converged:
        raise EstimationError(
            f"power iteration did not converge in {max_iter} iterations; "
            f"last quotient bracket [{lam_hist[-1]:.9g}, {ext_hist[-1]:.9g}]",
            last_quotient=ext_hist[-1],
            last_delta=abs(ext_hist[-1] - ext_hist[-2]) if len(ext_hist) > 1 else None,
        )
    return SpectralEstimate(quotient=ext_hist[-1], iterations=iterations, converged=True)


def estimate_tau_max(
    ops: SystemOps,
    process: InternalProcess,
    eta: float = 0.1,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    seed: int = 0,
) -> float:
    """Largest tau satisfying the stability bound with margin ``eta``.

    The bound keeps the energy coefficient a = 1 - (tau^2/8) <E*S, M^-1 E*S> / Phi
    uniformly positive: tau <= sqrt((4 - eta) / R) with R the quotient
    supremum found by :func:`spectral_sup` (worst case over the internal
    state via the process's stiffest configuration).  eta -> 0 recovers
    the exact blow-up boundary 2/sqrt(R) of the explicit recurrence.
    """
    if not 0.0 < eta < 4.0:
        raise ConfigError(f"eta must lie in (0, 4), got {eta}")
    est = spectral_sup(ops, process, tol=tol, max_iter=max_iter, seed=seed)
    if est.quotient <= 0.0:
        return math.inf
    return math.sqrt((4.0 - eta) / est.quotient)
