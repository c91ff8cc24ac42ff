"""Physical inputs and their map to the complex sine-Gordon couplings.

Units: the Fermi velocity sets the scale, so ``gamma`` always means the
ratio gamma/v_F and all couplings below are dimensionless.  With the two
real filling coefficients c~, s~ (c~^2 + s~^2 = 1) the effective
non-hermitian theory of the relative replica sector carries

    kappa   = c~ s~ gamma / pi
    lambda  = gamma / pi^2
    k_nu    = 1/g_nu^2 - 2i c~^2 gamma / pi - kappa^2

and the shifted stiffness k~_nu = k_nu + kappa^2 = 1/g_nu^2 - 2i c~^2
gamma/pi enters the mode dispersion.  Note that k~_nu is independent of
s~ and of kappa; this cancellation is checked by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Bare model inputs.

    g_s, g_c   : dimensionless Luttinger parameters (spin, charge)
    gamma      : monitoring strength in units of v_F
    v_F        : Fermi velocity (sets units; keep 1 unless you know better)
    c_tilde, s_tilde : filling coefficients, c~^2 + s~^2 = 1
    rho0       : mean density per site, used only by the mean spin current
    """

    g_s: float
    gamma: float
    g_c: float = 1.0
    v_F: float = 1.0
    c_tilde: float = 1.0 / math.sqrt(2.0)
    s_tilde: float = 1.0 / math.sqrt(2.0)
    rho0: float = 1.0

    def __post_init__(self):
        if not self.g_s >= 1.0:
            raise ValueError(f"g_s must be >= 1, got {self.g_s}")
        if not self.g_c > 0.0:
            raise ValueError(f"g_c must be > 0, got {self.g_c}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.v_F > 0.0:
            raise ValueError(f"v_F must be > 0, got {self.v_F}")
        if not self.rho0 >= 0.0:
            raise ValueError(f"rho0 must be >= 0, got {self.rho0}")
        norm = self.c_tilde**2 + self.s_tilde**2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(
                f"filling coefficients must satisfy c~^2 + s~^2 = 1, got {norm!r}"
            )


@dataclass(frozen=True)
class Couplings:
    """Complex couplings of the effective sine-Gordon theory.

    ``lam`` is the nonlinearity coefficient (real and >= 0 at the start of
    the flow); ``kappa`` is the parity-odd spin-charge coupling.  The
    ``k_tilde_*`` stiffnesses include the +kappa^2 shift and control the
    mode dispersion at the Gaussian fixed points.
    """

    k_c: complex
    k_s: complex
    kappa: float
    lam: float
    k_tilde_c: complex
    k_tilde_s: complex


def luttinger_from_exchange(J_z: float, v_F: float = 1.0) -> float:
    """Spin Luttinger parameter from the Ising exchange.

    Returns 1/sqrt(1 - J_z/(2 pi v_F)), valid for 0 <= J_z < 2 pi v_F.
    """
    if J_z < 0.0:
        raise ValueError(f"J_z must be >= 0, got {J_z}")
    x = J_z / (2.0 * math.pi * v_F)
    if x >= 1.0:
        raise ValueError(
            f"J_z = {J_z} is at or beyond the pole 2 pi v_F = {2.0 * math.pi * v_F}"
        )
    return 1.0 / math.sqrt(1.0 - x)


def bare_couplings(p: PhysicalParams) -> Couplings:
    """Map physical parameters to the bare (ell = 0) couplings."""
    g = p.gamma  # gamma / v_F
    kappa = p.c_tilde * p.s_tilde * g / math.pi
    lam = g / math.pi**2
    im_part = 2.0 * p.c_tilde**2 * g / math.pi
    k_tilde_c = 1.0 / p.g_c**2 - 1j * im_part
    k_tilde_s = 1.0 / p.g_s**2 - 1j * im_part
    return Couplings(
        k_c=k_tilde_c - kappa**2,
        k_s=k_tilde_s - kappa**2,
        kappa=kappa,
        lam=lam,
        k_tilde_c=k_tilde_c,
        k_tilde_s=k_tilde_s,
    )
