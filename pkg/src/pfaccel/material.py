"""Pointwise constitutive law for the phase-field model.

Symmetric 2x2 tensors are stored as arrays whose last axis holds the tensor
components ``[xx, yy, xy]`` (tensor shear, not engineering shear). Every
function accepts a single tensor of shape ``(3,)`` or a stack ``(..., 3)``.

Voigt matrices returned by :func:`stress_tangent` map engineering strain
``[e_xx, e_yy, 2 e_xy]`` to stress ``[s_xx, s_yy, s_xy]``. Plane strain is
assumed throughout: the out-of-plane strain is zero and contributes nothing
to the split.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MaterialParams",
    "bracket_pm",
    "strain",
    "split_strain",
    "psi_pm",
    "psi_total",
    "elastic_stress",
    "stress_pm",
    "stress_tangent",
    "degradation",
    "update_history",
    "principal",
    "split_tangents",
]

# relative width of the eigenvalue-degeneracy band in the split tangent
_DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class MaterialParams:
    """Physical constants of the model, in kN and mm.

    Attributes
    ----------
    lam, mu : float
        Lame parameters (kN/mm^2).
    ell : float
        Regularisation width (mm).
    gc : float
        Griffith constant (kN/mm).
    kappa : float
        Residual stiffness in the degradation function.
    use_split : bool
        Degrade only the tensile energy when True, the full energy otherwise.
    body_force : tuple of float
        Constant body force density (kN/mm^3).
    """

    lam: float
    mu: float
    ell: float
    gc: float
    kappa: float = 1e-10
    use_split: bool = True
    body_force: tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.lam + self.mu > 0:
            raise ValueError("lambda + mu must be positive")
        if not self.ell > 0:
            raise ValueError("ell must be positive")
        if not self.gc > 0:
            raise ValueError("gc must be positive")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        object.__setattr__(self, "body_force", tuple(float(b) for b in self.body_force))

    def replace(self, **changes) -> "MaterialParams":
        return dataclasses.replace(self, **changes)

    def elasticity_matrix(self) -> np.ndarray:
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def bracket_pm(a):
    """Return the positive and negative parts ``(max(a, 0), min(a, 0))``."""
    a = np.asarray(a, dtype=float)
    return np.maximum(a, 0.0), np.minimum(a, 0.0)


def _heaviside(a, positive: bool):
    # derivative of the bracket; 1/2 at the kink
    a = np.asarray(a, dtype=float)
    if positive:
        return np.where(a > 0, 1.0, np.where(a < 0, 0.0, 0.5))
    return np.where(a < 0, 1.0, np.where(a > 0, 0.0, 0.5))


def strain(grad_u) -> np.ndarray:
    """Symmetric part of a displacement gradient ``[[du/dx, du/dy], [dv/dx, dv/dy]]``."""
    g = np.asarray(grad_u, dtype=float)
    return np.stack([g[..., 0, 0], g[..., 1, 1], 0.5 * (g[..., 0, 1] + g[..., 1, 0])], axis=-1)


def principal(eps):
    """Principal values and unit directions of symmetric tensors.

    Returns ``(e1, e2, n1, n2)`` with ``e1 >= e2``; ``n1`` and ``n2`` have
    shape ``(..., 2)``.
    """
    eps = np.asarray(eps, dtype=float)
    xx, yy, xy = eps[..., 0], eps[..., 1], eps[..., 2]
    mean = 0.5 * (xx + yy)
    rad = np.hypot(0.5 * (xx - yy), xy)
    theta = 0.5 * np.arctan2(2.0 * xy, xx - yy)
    c, s = np.cos(theta), np.sin(theta)
    n1 = np.stack([c, s], axis=-1)
    n2 = np.stack([-s, c], axis=-1)
    return mean + rad, mean - rad, n1, n2


def _dyad(n):
    # symmetric n (x) n in [xx, yy, xy] storage
    return np.stack([n[..., 0] ** 2, n[..., 1] ** 2, n[..., 0] * n[..., 1]], axis=-1)


def split_strain(eps):
    """Spectral split into tensile and compressive parts."""
    eps = np.asarray(eps, dtype=float)
    e1, e2, n1, n2 = principal(eps)
    p1, p2 = _dyad(n1), _dyad(n2)
    eps_plus = np.maximum(e1, 0.0)[..., None] * p1 + np.maximum(e2, 0.0)[..., None] * p2
    eps_minus = np.minimum(e1, 0.0)[..., None] * p1 + np.minimum(e2, 0.0)[..., None] * p2
    return eps_plus, eps_minus


def _double_dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + 2.0 * a[..., 2] * b[..., 2]


def psi_pm(eps, params: MaterialParams):
    """Tensile and compressive strain energy densities."""
    eps = np.asarray(eps, dtype=float)
    e1, e2, _, _ = principal(eps)
    tr = eps[..., 0] + eps[..., 1]
    tp, tm = bracket_pm(tr)
    e1p, e1m = bracket_pm(e1)
    e2p, e2m = bracket_pm(e2)
    psi_plus = params.mu * (e1p**2 + e2p**2) + 0.5 * params.lam * tp**2
    psi_minus = params.mu * (e1m**2 + e2m**2) + 0.5 * params.lam * tm**2
    return psi_plus, psi_minus


def psi_total(eps, params: MaterialParams):
    """Undecomposed isotropic strain energy density."""
    eps = np.asarray(eps, dtype=float)
    tr = eps[..., 0] + eps[..., 1]
    return params.mu * _double_dot(eps, eps) + 0.5 * params.lam * tr**2


def elastic_stress(eps, params: MaterialParams) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    tr = eps[..., 0] + eps[..., 1]
    sig = 2.0 * params.mu * eps
    sig[..., 0] += params.lam * tr
    sig[..., 1] += params.lam * tr
    return sig


def stress_pm(eps, params: MaterialParams):
    """Stresses conjugate to the tensile and compressive energies."""
    eps = np.asarray(eps, dtype=float)
    eps_p, eps_m = split_strain(eps)
    tp, tm = bracket_pm(eps[..., 0] + eps[..., 1])
    sig_p = 2.0 * params.mu * eps_p
    sig_m = 2.0 * params.mu * eps_m
    sig_p[..., :2] += (params.lam * tp)[..., None]
    sig_m[..., :2] += (params.lam * tm)[..., None]
    return sig_p, sig_m


def degradation(phi, params: MaterialParams):
    """Degradation ``g(phi) = (1 - kappa)(1 - phi)^2 + kappa`` and its derivative."""
    phi = np.asarray(phi, dtype=float)
    k = params.kappa
    return (1.0 - k) * (1.0 - phi) ** 2 + k, -2.0 * (1.0 - k) * (1.0 - phi)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def split_tangents(eps, params: MaterialParams):
    """Voigt tangents of the tensile and compressive stresses."""
    eps = np.asarray(eps, dtype=float)
    e1, e2, n1, n2 = principal(eps)
    p1, p2 = _dyad(n1), _dyad(n2)
    m12 = np.stack(
        [n1[..., 0] * n2[..., 0], n1[..., 1] * n2[..., 1], 0.5 * (n1[..., 0] * n2[..., 1] + n1[..., 1] * n2[..., 0])],
        axis=-1,
    )
    ones = np.zeros(eps.shape)
    ones[..., :2] = 1.0
    tr = eps[..., 0] + eps[..., 1]
    degenerate = np.abs(e1 - e2) < _DEGENERACY_TOL * np.maximum(1.0, np.abs(e1) + np.abs(e2))
    denom = np.where(degenerate, 1.0, e1 - e2)
    emid = 0.5 * (e1 + e2)

    out = []
    for positive in (True, False):
        f = np.maximum if positive else np.minimum
        f1, f2 = f(e1, 0.0), f(e2, 0.0)
        d1, d2 = _heaviside(e1, positive), _heaviside(e2, positive)
        quotient = np.where(degenerate, _heaviside(emid, positive), (f1 - f2) / denom)
        deps = (
            d1[..., None, None] * _outer(p1, p1)
            + d2[..., None, None] * _outer(p2, p2)
            + 2.0 * quotient[..., None, None] * _outer(m12, m12)
        )
        c = 2.0 * params.mu * deps + params.lam * _heaviside(tr, positive)[..., None, None] * _outer(ones, ones)
        out.append(c)
    return out[0], out[1]


def stress_tangent(eps, phi, params: MaterialParams) -> np.ndarray:
    """Voigt tangent of the degraded stress with respect to engineering strain.

    With the split on this is ``g(phi) C_plus + C_minus``; with the split off
    it is ``g(phi) C``. At ``g = 1`` and split off this is the isotropic
    elasticity matrix.
    """
    eps = np.asarray(eps, dtype=float)
    g, _ = degradation(phi, params)
    g = np.asarray(g)
    if not params.use_split:
        C = params.elasticity_matrix()
        return np.broadcast_to(g[..., None, None], eps.shape[:-1] + (1, 1)) * C
    c_plus, c_minus = split_tangents(eps, params)
    return np.asarray(g)[..., None, None] * c_plus + c_minus


def update_history(h_prev, eps, params: MaterialParams):
    """Running maximum of the crack-driving energy."""
    if params.use_split:
        drive, _ = psi_pm(eps, params)
    else:
        drive = psi_total(eps, params)
    return np.maximum(h_prev, drive)
