"""Critical time step estimation and explicit time integration.

Two integrators operate on the assembled system: the central difference
method in displacement variables, and a second-order leap-frog scheme with
local time stepping in mass-transformed variables z = M^(1/2) u. The LTS
scheme advances a selected DOF subset (cut elements) with step dt/p_t while
the rest of the domain keeps dt; with an empty selection or p_t = 1 it
degenerates to the standard leap-frog update.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import Diverged, NoConvergence
from .momentfit import MomentFitConfig, lump_element

CFL_SAFETY = 0.95

_EIG_TOL = 1e-10
_EIG_MAXIT = 100_000
_RQI_WARMUP = 30
_RQI_INTERVAL = 20


def element_max_eigenvalue(k_e, m_e_diag):
    """Largest generalized eigenvalue omega^2 of (K_e, M_e), M_e diagonal.

    Power iteration on the symmetric similarity M^(-1/2) K M^(-1/2),
    accelerated by periodic Rayleigh-quotient (inverse) iterations so that
    clustered top eigenvalues still converge. A Rayleigh step is accepted
    only when it does not decrease the quotient, which keeps the iterate
    locked onto the top of the spectrum.
    """
    m_e_diag = np.asarray(m_e_diag, dtype=float)
    if np.any(m_e_diag <= 0):
        raise ValueError("element mass diagonal must be strictly positive")
    inv_sqrt = 1.0 / np.sqrt(m_e_diag)
    s = inv_sqrt[:, None] * k_e * inv_sqrt[None, :]
    n = s.shape[0]
    rng = np.random.default_rng(12345 + n)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    eye = np.eye(n)
    deflated = []  # converged (theta, y) pairs below the top of the spectrum
    best_deflated = -math.inf

    def _deflate(vec):
        for _, y in deflated:
            vec = vec - (y @ vec) * y
        nrm = np.linalg.norm(vec)
        return vec / nrm if nrm > 0.0 else vec

    def _is_top(theta):
        """Inertia certificate: no eigenvalue above theta (to 1e-8 relative)."""
        shift = theta + 1e-8 * abs(theta) + 1e-30
        d = scipy.linalg.ldl(s - shift * eye)[1]
        return not np.any(np.linalg.eigvalsh(0.5 * (d + d.T)) > 0.0)

    def _accept_or_deflate(theta, vec):
        cand = max(theta, best_deflated)
        if _is_top(cand):
            return cand
        if len(deflated) < 64:
            deflated.append((theta, vec))
        return None

    for it in range(_EIG_MAXIT):
        sv = s @ v
        lam_new = float(v @ sv)
        norm = np.linalg.norm(sv)
        if norm == 0.0:
            return max(0.0, best_deflated)
        v_new = _deflate(sv / norm)
        if abs(lam_new - lam) <= _EIG_TOL * max(abs(lam_new), 1e-300):
            resid = float(np.linalg.norm(s @ v_new - lam_new * v_new))
            if resid <= 1e-8 * max(abs(lam_new), 1e-300):
                out = _accept_or_deflate(lam_new, v_new)
                if out is not None:
                    return out
                best_deflated = max(best_deflated, lam_new)
                lam, v = 0.0, _deflate(v_new)
                continue
        lam = lam_new
        v = v_new
        if it >= _RQI_WARMUP and (it - _RQI_WARMUP) % _RQI_INTERVAL == 0 and lam > 0.0:
            yv, theta, resid = v, lam, math.inf
            for _ in range(8):
                try:
                    y = np.linalg.solve(s - theta * eye, yv)
                except np.linalg.LinAlgError:
                    break
                ynorm = np.linalg.norm(y)
                if ynorm == 0.0 or not np.all(np.isfinite(y)):
                    break
                yv = y / ynorm
                theta = float(yv @ (s @ yv))
                resid = float(np.linalg.norm(s @ yv - theta * yv))
                if resid <= 1e-12 * max(abs(theta), 1e-300):
                    break
            if resid <= 1e-8 * max(abs(theta), 1e-300):
                out = _accept_or_deflate(theta, yv)
                if out is not None:
                    return out
                # a converged pair that is not the top: remove it from the
                # iteration and keep hunting upward
                best_deflated = max(best_deflated, theta)
                lam, v = 0.0, _deflate(v)
            elif theta >= lam * (1.0 - 1e-12):
                lam, v = theta, _deflate(yv)
    resid = float(np.linalg.norm(s @ v - lam * v))
    raise NoConvergence(
        f"power iteration did not converge (estimate {lam:g}, residual {resid:g})",
        estimate=lam,
        residual=resid,
    )


@dataclass(frozen=True)
class CriticalTimeStep:
    per_element: dict  # (ex, ey) -> dt_e
    dt_c: float
    dt_uncut_min: float  # min over full elements (inf if none)
    dt_cut_min: float  # min over cut elements (inf if none)


def critical_timestep_table(mesh, mat, scheme="fitted", cfg=None, stiffness_rule="cut"):
    """Per-element dt_e = 2/omega_max and the global minimum."""
    from .assembly import (
        element_lumped_mass,
        element_stiffness,
        element_stiffness_quadrature,
    )

    cfg = cfg or MomentFitConfig()
    jac = (mesh.hx / 2.0, mesh.hy / 2.0)
    per_element = {}
    dt_uncut = math.inf
    dt_cut = math.inf
    full_dt = None
    for ex, ey in mesh.elements():
        cutq = mesh.cut_quadratures[(ex, ey)]
        if cutq.is_void:
            continue
        if cutq.classification == "full" and full_dt is not None:
            per_element[(ex, ey)] = full_dt
            continue
        lumped = lump_element(mesh.basis, cutq, scheme, cfg)
        pts, wts = element_stiffness_quadrature(mesh, ex, ey, stiffness_rule, lumped)
        k_e = element_stiffness(mesh.basis, mat, pts, wts, jac)
        m_e = element_lumped_mass(lumped, mat, jac)
        omega2 = element_max_eigenvalue(k_e, m_e)
        dt_e = 2.0 / math.sqrt(omega2)
        per_element[(ex, ey)] = dt_e
        if cutq.classification == "full":
            full_dt = dt_e
            dt_uncut = min(dt_uncut, dt_e)
        else:
            dt_cut = min(dt_cut, dt_e)
    if full_dt is not None:
        dt_uncut = full_dt
    dt_c = min(per_element.values())
    return CriticalTimeStep(
        per_element=per_element, dt_c=dt_c, dt_uncut_min=dt_uncut, dt_cut_min=dt_cut
    )


def choose_pt(dt_coarse, cut_dt_min):
    """Smallest refinement ratio with dt_coarse/p_t <= CFL_SAFETY * cut_dt_min."""
    if dt_coarse <= 0 or cut_dt_min <= 0:
        raise ValueError("time steps must be positive")
    return max(1, math.ceil(dt_coarse / (CFL_SAFETY * cut_dt_min) - 1e-12))


@dataclass
class TimeHistory:
    """Trailing states of a displacement-propagating scheme."""

    u_prev: np.ndarray
    u_curr: np.ndarray
    step: int
    dt: float

    def velocity(self, u_next):
        return (u_next - self.u_prev) / (2.0 * self.dt)


def _check_divergence(u, scale):
    if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e12 * scale:
        raise Diverged("solution magnitude exceeded 1e12 x initial scale")


def cdm_startup(system, u0, v0, dt):
    """u_{-1} from a second-order Taylor start."""
    minv = 1.0 / system.lumped_mass
    a0 = minv * (system.force(0.0) - system.k_matvec(u0))
    return u0 - dt * v0 + 0.5 * dt * dt * a0


def run_cdm(system, dt, n_steps, u0=None, v0=None, record=None):
    """Central difference time loop; returns the final TimeHistory.

    record(step, t, u) is invoked after every accepted step when given.
    """
    n = system.dof_count
    u_curr = np.zeros(n) if u0 is None else u0.copy()
    v0 = np.zeros(n) if v0 is None else v0
    u_prev = cdm_startup(system, u_curr, v0, dt)
    minv = 1.0 / system.lumped_mass
    scale = max(float(np.max(np.abs(u_curr))), 1.0)
    for step in range(n_steps):
        t = step * dt
        accel = minv * (system.force(t) - system.k_matvec(u_curr))
        u_next = 2.0 * u_curr - u_prev + dt * dt * accel
        u_prev, u_curr = u_curr, u_next
        if step % 25 == 0 or step == n_steps - 1:
            _check_divergence(u_curr, scale)
        if record is not None:
            record(step + 1, t + dt, u_curr)
    return TimeHistory(u_prev=u_prev, u_curr=u_curr, step=n_steps, dt=dt)


class LtsConfig:
    """Coarse step, refinement ratio, and the fine-DOF selection mask."""

    def __init__(self, dt, p_t, selection):
        if p_t < 1:
            raise ValueError("p_t must be >= 1")
        self.dt = float(dt)
        self.p_t = int(p_t)
        self.selection = np.asarray(selection, dtype=bool)


@dataclass
class LtsState:
    """Leap-frog history in transformed variables z = M^(1/2) u."""

    z_prev: np.ndarray
    z_curr: np.ndarray
    step: int
    t: float


class LtsSolver:
    """Leap-frog with local time stepping on the selected DOFs.

    A = M^(-1/2) K M^(-1/2) is never materialized; applications bracket the
    stiffness matvec with diagonal scalings. The selection P acts as a mask.
    """

    def __init__(self, system, cfg):
        self.system = system
        self.cfg = cfg
        if cfg.selection.shape != (system.dof_count,):
            raise ValueError("selection mask must cover all DOFs")
        self.m_sqrt = np.sqrt(system.lumped_mass)
        self.m_inv_sqrt = 1.0 / self.m_sqrt

    def a_apply(self, z):
        return self.m_inv_sqrt * self.system.k_matvec(self.m_inv_sqrt * z)

    def r_of(self, t):
        return self.m_inv_sqrt * self.system.force(t)

    def initial_state(self, u0=None, v0=None):
        n = self.system.dof_count
        u0 = np.zeros(n) if u0 is None else u0
        v0 = np.zeros(n) if v0 is None else v0
        z0 = self.m_sqrt * u0
        zdot0 = self.m_sqrt * v0
        dt = self.cfg.dt
        z_m1 = z0 - dt * zdot0 + 0.5 * dt * dt * (self.r_of(0.0) - self.a_apply(z0))
        return LtsState(z_prev=z_m1, z_curr=z0, step=0, t=0.0)

    def step(self, state):
        """One coarse step of the second-order leap-frog LTS update."""
        dt, p_t = self.cfg.dt, self.cfg.p_t
        sel = self.cfg.selection
        t_n = state.t
        z_n = state.z_curr
        r_n = self.r_of(t_n)
        h = dt / p_t

        coarse_z = np.where(sel, 0.0, z_n)
        w = np.where(sel, 0.0, r_n) - self.a_apply(coarse_z)
        q_prev = 2.0 * z_n
        q = q_prev + 0.5 * h * h * (
            2.0 * w + 2.0 * np.where(sel, r_n, 0.0) - self.a_apply(np.where(sel, q_prev, 0.0))
        )
        for m in range(1, p_t):
            src = self.r_of(t_n + m * h) + self.r_of(t_n - m * h)
            q_next = 2.0 * q - q_prev + h * h * (
                2.0 * w + np.where(sel, src, 0.0) - self.a_apply(np.where(sel, q, 0.0))
            )
            q_prev, q = q, q_next
        z_next = -state.z_prev + q
        return LtsState(z_prev=z_n, z_curr=z_next, step=state.step + 1, t=t_n + dt)

    def displacement(self, state):
        return self.m_inv_sqrt * state.z_curr

    def run(self, n_steps, u0=None, v0=None, record=None):
        state = self.initial_state(u0, v0)
        scale = max(float(np.max(np.abs(state.z_curr))), 1.0)
        for _ in range(n_steps):
            state = self.step(state)
            if state.step % 25 == 0 or state.step == n_steps:
                _check_divergence(state.z_curr, scale)
            if record is not None:
                record(state.step, state.t, self.displacement(state))
        return state


def leapfrog_lts_step(system, state, cfg):
    """Single-step functional form of the LTS update."""
    return LtsSolver(system, cfg).step(state)


def critical_dt_sweep(p, cut_fractions, schemes, epsilons, depth=4):
    """Critical time step ratios for a unit square element with a vertical cut.

    Returns rows (p, fraction, scheme, epsilon, dt_ratio); epsilon is only
    meaningful for the fitted scheme and reported as 0 otherwise.
    """
    from . import geometry
    from .assembly import Material, element_lumped_mass, element_stiffness
    from .gll import tensor_basis

    from .geometry import _gauss_square

    basis = tensor_basis(p)
    mat = Material(youngs_modulus=1.0, poisson_ratio=0.0, density=1.0)
    jac = (0.5, 0.5)
    box = ((0.0, 1.0), (0.0, 1.0))
    gll_wts = basis.node_weights()

    # the uncut baseline uses the same exactly-integrated stiffness the cut
    # rule converges to, so the ratio tends to 1 in the uncut limit
    full_pts, full_wts = _gauss_square(2 * p)
    k_full = element_stiffness(basis, mat, full_pts, full_wts, jac)
    m_full = np.repeat(mat.density * gll_wts * 0.25, 2)
    dt0 = 2.0 / math.sqrt(element_max_eigenvalue(k_full, m_full))

    rows = []
    for frac in cut_fractions:
        if not 0.0 < frac < 1.0:
            raise ValueError("cut fractions must lie in (0, 1)")
        ls = geometry.half_plane(1.0, 0.0, frac)
        cutq = geometry.build_cut_quadrature(
            ls, box, depth=depth, gauss_degree=2 * p
        )
        k_cut = element_stiffness(basis, mat, cutq.points, cutq.weights, jac)
        for scheme in schemes:
            eps_list = epsilons if scheme == "fitted" else [0.0]
            for eps in eps_list:
                cfg = MomentFitConfig(epsilon=eps) if scheme == "fitted" else None
                lumped = lump_element(basis, cutq, scheme, cfg)
                m_e = element_lumped_mass(lumped, mat, jac)
                dt_e = 2.0 / math.sqrt(element_max_eigenvalue(k_cut, m_e))
                rows.append((p, frac, scheme, eps, dt_e / dt0))
    return rows
