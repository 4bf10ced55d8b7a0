"""Internal-variable processes: null, viscoplastic creep, adhesive damage.

Each process bundles its stored energy written in terms of the
proto-stress, the strain-like gradient of that energy (which drives the
momentum balance), a closed-form solver for the local midpoint flow rule
and the dissipation increment the energy audit books per step.  All flow
rules act nodewise or segmentwise, so a step stays embarrassingly local.

Conventions: bulk tensors use the (xx, yy, xy) component order with the
tensor contraction a:b = a0 b0 + a1 b1 + 2 a2 b2; the 2D spherical /
deviatoric split is sph(e) = tr(e)/2 * I.  On deviators the isotropic
stiffness acts as 2G, on the spherical part as 2(lam + G).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elastic2d import PlaneStrainStaggeredOps
from .errors import ConfigError


@dataclass(frozen=True)
class ViscoplasticParams:
    """Yield stress, viscosity and isotropic hardening moduli."""

    sigma_y: float = 0.0
    d_visc: float = 0.0
    c2_hard: float = 0.0

    def __post_init__(self):
        if self.sigma_y < 0 or self.d_visc < 0 or self.c2_hard < 0:
            raise ConfigError("viscoplastic moduli must be nonnegative")
        if self.sigma_y > 0 and self.d_visc == 0:
            # Rate-independent perfect plasticity is outside the stable
            # range of the explicit scheme; a positive viscosity is required.
            raise ConfigError("a positive viscosity is required when sigma_y > 0")


@dataclass(frozen=True)
class AdhesiveParams:
    """Fracture toughness, optional viscosity/healing, segment stiffness."""

    g_frac: float
    eps1: float = 0.0
    healing: bool = False
    b_xx: float = 0.5
    b_yy: float = 0.5
    b_xy: float = 0.0

    def __post_init__(self):
        if self.g_frac <= 0:
            raise ConfigError("fracture toughness must be positive")
        if self.eps1 < 0:
            raise ConfigError("damage viscosity must be nonnegative")
        if self.healing and self.eps1 == 0:
            raise ConfigError("the healing variant needs eps1 > 0")

    @property
    def b_matrix(self) -> np.ndarray:
        return np.array([[self.b_xx, self.b_xy], [self.b_xy, self.b_yy]])


def _contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor contraction a:b per node for (3, ...) component stacks."""
    return a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]


class NullProcess:
    """No internal variable: plain linear elastodynamics."""

    dim_z = 0

    def __init__(self, ops: PlaneStrainStaggeredOps):
        self.ops = ops
        self._empty = np.zeros(0)

    def phi(self, sigma: np.ndarray, z: np.ndarray) -> float:
        return 0.5 * self.ops.s_pair(self.ops.apply_C_inverse(sigma), sigma)

    def phi_sigma_prime(self, sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.ops.apply_C_inverse(sigma)

    def solve_flow_rule(self, sigma_new, z_old, tau):
        return z_old

    def dissipation_increment(self, sigma_new, z_old, z_new, tau) -> float:
        return 0.0

    def stiffest_state(self) -> np.ndarray:
        return self._empty

    def phi_prime_gap(self, sigma_new, z_old, z_new, dsigma) -> float:
        return 0.0


def viscoplastic_increment(
    sigma: np.ndarray,
    pi_old: np.ndarray,
    tau: float,
    shear_modulus: float,
    lam: float,
    params: ViscoplasticParams,
) -> np.ndarray:
    """Closed-form midpoint update of the plastic strain at one or many nodes.

    ``sigma`` and ``pi_old`` are (3, ...) component stacks.  The deviatoric
    part follows the shrinkage rule: with q the deviatoric elastic driving
    stress and M = D + (tau/2)(2G + c2), the rate is
    max(|q| - sigma_y, 0)/M in the direction of q.  The spherical part
    relaxes without a yield threshold when hardening is present and stays
    frozen otherwise (isochoric flow).
    """
    m_dev = 2.0 * shear_modulus + params.c2_hard
    denom_dev = params.d_visc + 0.5 * tau * m_dev
    mean_s = 0.5 * (sigma[0] + sigma[1])
    mean_p = 0.5 * (pi_old[0] + pi_old[1])
    q = np.stack(
        [
            sigma[0] - mean_s - m_dev * (pi_old[0] - mean_p),
            sigma[1] - mean_s - m_dev * (pi_old[1] - mean_p),
            sigma[2] - m_dev * pi_old[2],
        ]
    )
    q_norm = np.sqrt(_contract(q, q))
    over = np.maximum(q_norm - params.sigma_y, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(q_norm > 0.0, over / (denom_dev * q_norm), 0.0)
    rate = scale * q
    if params.c2_hard > 0.0:
        m_sph = 2.0 * (lam + shear_modulus) + params.c2_hard
        rate_m = (mean_s - m_sph * mean_p) / (params.d_visc + 0.5 * tau * m_sph)
        rate = np.stack([rate[0] + rate_m, rate[1] + rate_m, rate[2]])
    return pi_old + tau * rate


class ViscoplasticProcess:
    """Nodal plastic strain with viscosity, yield stress and hardening.

    The internal variable is a symmetric tensor collocated at the stress
    nodes and integrated with the same lumped node quadrature as the
    stored energy, which keeps the flow rule fully local.
    """

    def __init__(self, ops: PlaneStrainStaggeredOps, params: ViscoplasticParams):
        self.ops = ops
        self.params = params
        self.dim_z = ops.dim_bulk
        self._node_shape = (3,) + ops.grid.node_shape

    def _pi(self, z: np.ndarray) -> np.ndarray:
        return z.reshape(self._node_shape)

    def _c_apply(self, pi: np.ndarray) -> np.ndarray:
        a, lam, g2 = self.ops._c
        return np.stack([a * pi[0] + lam * pi[1], lam * pi[0] + a * pi[1], g2 * pi[2]])

    def _phi_plastic(self, bulk_sigma: np.ndarray, pi: np.ndarray) -> float:
        w = self.ops.node_weights
        c2 = self.params.c2_hard
        quad = _contract(self._c_apply(pi), pi) + c2 * _contract(pi, pi)
        return float(np.sum(w * (0.5 * quad - _contract(bulk_sigma, pi))))

    def phi(self, sigma: np.ndarray, z: np.ndarray) -> float:
        elastic = 0.5 * self.ops.s_pair(self.ops.apply_C_inverse(sigma), sigma)
        bulk, _ = self.ops.split_s(sigma)
        return elastic + self._phi_plastic(bulk, self._pi(z))

    def phi_sigma_prime(self, sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
        out = self.ops.apply_C_inverse(sigma)
        bulk, _ = self.ops.split_s(out)
        bulk -= self._pi(z)
        return out

    def solve_flow_rule(self, sigma_new, z_old, tau):
        bulk, _ = self.ops.split_s(sigma_new)
        pi_new = viscoplastic_increment(
            bulk,
            self._pi(z_old),
            tau,
            self.ops.material.shear_modulus,
            self.ops.material.lam,
            self.params,
        )
        return pi_new.ravel()

    def dissipation_increment(self, sigma_new, z_old, z_new, tau) -> float:
        bulk, _ = self.ops.split_s(sigma_new)
        return self._phi_plastic(bulk, self._pi(z_old)) - self._phi_plastic(
            bulk, self._pi(z_new)
        )

    def stiffest_state(self) -> np.ndarray:
        return np.zeros(self.dim_z)

    def phi_prime_gap(self, sigma_new, z_old, z_new, dsigma) -> float:
        dpi = self._pi(z_new) - self._pi(z_old)
        dbulk, _ = self.ops.split_s(dsigma)
        return -0.5 * float(np.sum(self.ops.node_weights * _contract(dpi, dbulk)))


class AdhesiveProcess:
    """Per-segment damage of an adhesive boundary band.

    The damage variable scales the segment stiffness linearly and evolves
    once the segment's elastic energy density exceeds the fracture
    toughness (activation threshold).  With ``eps1 = 0`` the evolution is
    rate independent and a triggered segment fails completely within the
    step; a positive ``eps1`` gives a viscous damage rate, and ``healing``
    additionally allows slow recovery where the stored density falls
    below the threshold.

    ``literal_phi_sign`` flips the threshold to the always-active variant
    (damage energy added to, instead of subtracted from, the driving
    force); kept for sensitivity studies.
    """

    def __init__(
        self,
        ops: PlaneStrainStaggeredOps,
        params: AdhesiveParams,
        literal_phi_sign: bool = False,
    ):
        if ops.n_seg == 0:
            raise ConfigError("adhesive process needs a grid with adhesive segments")
        if not np.allclose(ops.b_matrix, params.b_matrix):
            raise ConfigError("ops and process disagree on the adhesive stiffness")
        self.ops = ops
        self.params = params
        self.literal_phi_sign = literal_phi_sign
        self.dim_z = ops.n_seg

    def _energy_density(self, sigma: np.ndarray) -> np.ndarray:
        """Segmentwise elastic energy density 0.5 B^-1 s . s."""
        _, adh = self.ops.split_s(sigma)
        return 0.5 * np.sum((self.ops.b_inverse @ adh) * adh, axis=0)

    def driving_force(self, sigma: np.ndarray) -> np.ndarray:
        dens = self._energy_density(sigma)
        if self.literal_phi_sign:
            return dens + self.params.g_frac
        return dens - self.params.g_frac

    def phi(self, sigma: np.ndarray, z: np.ndarray) -> float:
        bulk, adh = self.ops.split_s(sigma)
        ia, ib, ig = self.ops._c_inv
        e0 = ia * bulk[0] + ib * bulk[1]
        e1 = ib * bulk[0] + ia * bulk[1]
        elastic = 0.5 * float(
            np.sum(
                self.ops.node_weights
                * (e0 * bulk[0] + e1 * bulk[1] + 2.0 * ig * bulk[2] * bulk[2])
            )
        )
        dens = self._energy_density(sigma)
        surface = self.ops.grid.h * float(np.sum(z * dens + self.params.g_frac * z))
        return elastic + surface

    def phi_sigma_prime(self, sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
        out = self.ops.apply_C_inverse(sigma)
        _, adh = self.ops.split_s(out)
        adh *= z  # gamma(alpha) = alpha scales the segment compliance
        return out

    def solve_flow_rule(self, sigma_new, z_old, tau):
        d = self.driving_force(sigma_new)
        if self.params.eps1 == 0.0:
            return np.where(d > 0.0, 0.0, z_old)
        rate = np.where(d > 0.0, d / (2.0 * self.params.eps1), 0.0)
        if self.params.healing:
            rate = np.where(d < 0.0, 0.5 * self.params.eps1 * d, rate)
        alpha = np.clip(z_old - tau * rate, 0.0, 1.0)
        if not self.params.healing:
            alpha = np.minimum(alpha, z_old)
        return alpha

    def dissipation_increment(self, sigma_new, z_old, z_new, tau) -> float:
        dens = self._energy_density(sigma_new)
        return self.ops.grid.h * float(
            np.sum((dens + self.params.g_frac) * (z_old - z_new))
        )

    def stiffest_state(self) -> np.ndarray:
        return np.ones(self.dim_z)

    def phi_prime_gap(self, sigma_new, z_old, z_new, dsigma) -> float:
        _, adh = self.ops.split_s(sigma_new)
        _, dadh = self.ops.split_s(dsigma)
        brel = self.ops.b_inverse @ adh
        return 0.5 * self.ops.grid.h * float(
            np.sum((z_new - z_old) * np.sum(brel * dadh, axis=0))
        )
