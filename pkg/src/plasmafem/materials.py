"""Material coefficients for the Maxwell / hydrodynamic Drude system.

The solver works in scaled units: lengths in nm, angular frequency in units
of the plasma frequency omega_p, and the hydrodynamic current rescaled by
omega_p * eps0. In these units the vacuum permittivity is the identity, the
inverse permeability is kappa0^2 with kappa0 = c0 / (omega_p * 1 nm), the
Drude coefficient is alpha = 1 - gamma' / (i omega') and the nonlocality
coefficient is zeta = (3/5) (v_f / (omega_p * 1 nm))^2. All coefficients are
piecewise constant per element; absorbing-layer elements never straddle the
stretching lines, so the complex stretch is constant on each of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh2D, METAL, PML

C0 = 299792458.0          # m/s
EPS0 = 8.8541878128e-12   # F/m
NM = 1e-9

PML_STRETCH = 1.0 - 0.75j  # coordinate stretch inside the absorbing frame


@dataclass(frozen=True)
class DrudeParams:
    """Bulk metal parameters in SI units."""

    name: str
    omega_p: float  # plasma frequency, rad/s
    gamma: float    # damping rate, rad/s
    v_f: float      # Fermi velocity, m/s

    @property
    def gamma_rel(self) -> float:
        return self.gamma / self.omega_p

    @property
    def kappa0(self) -> float:
        """Vacuum light speed in scaled units (nm * omega_p)."""
        return C0 / (self.omega_p * NM)

    @property
    def zeta_scaled(self) -> float:
        """Nonlocality coefficient (3/5) v_f^2 / (omega_p * 1 nm)^2."""
        return 0.6 * (self.v_f / (self.omega_p * NM)) ** 2

    def alpha_scaled(self, omega_rel: float) -> complex:
        """Drude coefficient 1 - gamma / (i omega) in scaled units."""
        return 1.0 - self.gamma_rel / (1j * omega_rel)

    # SI-unit originals, kept for reporting and unit tests
    def alpha_si(self, omega: float) -> complex:
        return (1.0 - self.gamma / (1j * omega)) / (self.omega_p**2 * EPS0)

    @property
    def zeta_si(self) -> float:
        return 0.6 * self.v_f**2 / (self.omega_p**2 * EPS0)


GOLD = DrudeParams("gold", omega_p=1.390e16, gamma=3.230e13, v_f=1.084e6)
SILVER = DrudeParams("silver", omega_p=1.339e16, gamma=1.143e14, v_f=1.465e6)

METALS = {"gold": GOLD, "silver": SILVER}


def spectral_norm_2x2(a: np.ndarray) -> np.ndarray:
    """Largest singular value of (batched) 2x2 complex matrices.

    Equals max over unit complex u, v of Re(A u . conj(v)), the coefficient
    bound used in the estimator weights. Closed form via the eigenvalues of
    A^H A.
    """
    a = np.asarray(a)
    t = np.sum(np.abs(a) ** 2, axis=(-2, -1))  # trace of A^H A
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    d = np.abs(det) ** 2                       # det of A^H A
    disc = np.sqrt(np.maximum(t * t - 4.0 * d, 0.0))
    return np.sqrt(0.5 * (t + disc))


@dataclass
class Coefficients:
    """Per-element PDE coefficients on a fixed mesh, scaled units.

    eps: (nt, 2, 2) complex permittivity (identity except in the frame).
    chi: (nt,) complex inverse permeability.
    alpha, zeta: scalar current coefficients (metal elements only).
    Star values are the coefficient bounds entering estimator weights and
    the local wavespeeds.
    """

    mesh: Mesh2D
    material: DrudeParams
    omega: float  # omega / omega_p
    eps: np.ndarray
    chi: np.ndarray
    alpha: complex
    zeta: float
    eps_star: np.ndarray
    chi_star: np.ndarray
    alpha_star: float
    zeta_star: float

    @property
    def speed_e(self) -> np.ndarray:
        """Local electric wavespeed sqrt(chi*/eps*), per element."""
        return np.sqrt(self.chi_star / self.eps_star)

    @property
    def speed_j(self) -> float:
        """Current wavespeed sqrt(zeta*/alpha*)."""
        return float(np.sqrt(self.zeta_star / self.alpha_star))

    @property
    def k_e(self) -> np.ndarray:
        return self.omega / self.speed_e

    @property
    def k_j(self) -> float:
        return self.omega / self.speed_j

    @property
    def k_p(self) -> np.ndarray:
        """Plasmonic wavenumber 1 / sqrt(zeta* eps*) in plasma-frequency
        units; the shortest scale the mesh has to resolve in the metal."""
        return 1.0 / np.sqrt(self.zeta_star * self.eps_star)

    @property
    def incident_wavenumber(self) -> float:
        """Free-space wavenumber omega / kappa0 of the illumination."""
        return self.omega / self.material.kappa0


def pml_stretches(points: np.ndarray, L: float) -> np.ndarray:
    """Complex stretches (d1, d2) at given points; 1 inside the inner box."""
    points = np.asarray(points, dtype=float)
    d = np.ones(points.shape, dtype=complex)
    d[np.abs(points) > L] = PML_STRETCH
    return d


def build_coefficients(mesh: Mesh2D, material: DrudeParams, omega: float,
                       L: float) -> Coefficients:
    """Evaluate all PDE coefficients per element.

    omega is relative to the metal's plasma frequency. L is the half-width
    of the inner (unstretched) box; elements beyond it get the absorbing
    complex stretch applied per direction.
    """
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    nt = mesh.n_triangles
    kappa0 = material.kappa0
    eps = np.broadcast_to(np.eye(2, dtype=complex), (nt, 2, 2)).copy()
    chi = np.full(nt, kappa0**2, dtype=complex)

    in_pml = mesh.region == PML
    if np.any(in_pml):
        d = pml_stretches(mesh.centroids[in_pml], L)
        d1, d2 = d[:, 0], d[:, 1]
        eps[in_pml, 0, 0] = d2 / d1
        eps[in_pml, 1, 1] = d1 / d2
        chi[in_pml] = kappa0**2 / (d1 * d2)

    alpha = material.alpha_scaled(omega)
    zeta = material.zeta_scaled
    return Coefficients(
        mesh=mesh,
        material=material,
        omega=float(omega),
        eps=eps,
        chi=chi,
        alpha=alpha,
        zeta=zeta,
        eps_star=spectral_norm_2x2(eps),
        chi_star=np.abs(chi),
        alpha_star=abs(alpha),
        zeta_star=float(zeta),
    )
