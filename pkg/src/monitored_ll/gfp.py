"""Gaussian fixed points: Bogoliubov solve and steady-state correlations.

Weak coupling (massless): each momentum mode carries a 4x4 non-hermitian
Hamiltonian in (charge/spin) x (Nambu) space.  A pseudo-unitary
transformation V (V^dag tau3 V = tau3) brings it to lower-triangular form
in Nambu space; the dark-state correlators then reduce to momentum-
independent trace coefficients of V evaluated at q > 0.  V lives in the
six-parameter family

    V = exp(v1 tau1 + v2 tau2),   v_i = v_i0 s0 + v_i2 s2 + v_i3 s3,

(all v_ij real; no s1 content), which is automatically pseudo-unitary.
The Nambu-12 block of V^dag h V has no s1 component on this family, so the
six real projections of the block onto s0, s2, s3 match the six
parameters and a damped Newton iteration closes the solve.  Seeds come
from the per-sector Bogoliubov angles plus the leading correction in the
spin-charge coupling kappa.

Strong coupling (massive): correlators decay exponentially; the decay
length follows from the branch points of the mode dispersion, and a
subtracted oscillatory quadrature of the single-sector correlator provides
an independent numerical check.

Basis ordering everywhere: (b_c, b_s, bdag_c, bdag_s), i.e. tau-major, so
an operator written sigma_a tau_b is the matrix kron(tau_b, sigma_a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import expi

from .errors import DegenerateMode, NoConvergence, NonConvergence
from .params import Couplings

_S0 = np.eye(2, dtype=complex)
_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)
_SIG = (_S0, _S1, _S2, _S3)

TAU3 = np.kron(_S3, _S0)  # Nambu metric in the (b_c, b_s, bdag_c, bdag_s) basis

_SOLVE_TOL = 1e-10
_GAUGE_TOL = 1e-10


def _st(a: int, b: int) -> np.ndarray:
    """Matrix of sigma_a tau_b in the tau-major basis."""
    return np.kron(_SIG[b], _SIG[a])


@dataclass(frozen=True)
class ModeHamiltonian:
    q: float
    h: np.ndarray
    omega_c: complex
    omega_s: complex
    eta_c: float
    eta_s: float
    kappa_plus: float
    kappa_minus: float
    m_lambda: float


@dataclass(frozen=True)
class BogoliubovTransform:
    V: np.ndarray
    params: np.ndarray  # (v10, v12, v13, v20, v22, v23)
    residual: float

    def pseudo_unitarity_defect(self) -> float:
        return float(np.max(np.abs(self.V.conj().T @ TAU3 @ self.V - TAU3)))


@dataclass(frozen=True)
class SigmaDeltaTables:
    """Trace coefficients; index order [alpha, nu, nu'] with alpha in (+, -)
    mapped to (0, 1) and nu in (charge, spin) mapped to (0, 1).

    sigma[alpha] holds the equal-alpha table, delta[alpha] the
    (alpha, -alpha) table.
    """

    sigma: np.ndarray
    delta: np.ndarray
    imag_leakage: float


@dataclass(frozen=True)
class CorrelationCoefficients:
    sigma_plus_c: float
    sigma_plus_s: float
    sigma_minus_c: float
    sigma_minus_s: float
    delta_cs: float
    delta_sc: float
    imag_leakage: float


def dispersion(k_tilde: complex, q: float, m_lambda: float = 0.0, v_F: float = 1.0) -> complex:
    """Mode frequency: root of k~ v_F^2 q^2 - i m^2 with Im <= 0."""
    if k_tilde == 0 and q == 0 and m_lambda == 0:
        raise ValueError("dispersion undefined for k~ = q = m = 0")
    w = complex(np.sqrt(k_tilde * v_F**2 * q**2 - 1j * m_lambda**2 + 0j))
    if w.imag > 0:
        w = -w
    return w


def build_hq(
    c: Couplings, q: float, m_lambda: float = 0.0, v_F: float = 1.0
) -> ModeHamiltonian:
    """Assemble the 4x4 mode Hamiltonian at momentum q."""
    if q == 0 and m_lambda == 0:
        raise ValueError("q = 0 requires a finite mass")
    om_c = dispersion(c.k_tilde_c, q, m_lambda, v_F)
    om_s = dispersion(c.k_tilde_s, q, m_lambda, v_F)
    eta_c = 2.0 * math.atan2(om_c.imag, om_c.real)
    eta_s = 2.0 * math.atan2(om_s.imag, om_s.real)
    h = np.zeros((4, 4), dtype=complex)
    for i, (om, eta) in enumerate(((om_c, eta_c), (om_s, eta_s))):
        block = (abs(om) / 2.0) * (
            (np.exp(1j * eta) + 1.0) * _S0 + (np.exp(1j * eta) - 1.0) * _S1
        )
        proj = np.zeros((2, 2))
        proj[i, i] = 1.0
        h += np.kron(block, proj)
    r = math.sqrt(abs(om_c) / abs(om_s))
    kp = (c.kappa / 2.0) * (r + 1.0 / r)
    km = (c.kappa / 2.0) * (r - 1.0 / r)
    h += v_F * q * (kp * _st(1, 3) - km * _st(2, 2))
    return ModeHamiltonian(
        q=q, h=h, omega_c=om_c, omega_s=om_s, eta_c=eta_c, eta_s=eta_s,
        kappa_plus=kp, kappa_minus=km, m_lambda=m_lambda,
    )


def bogoliubov_block(omega: complex) -> tuple[float, np.ndarray]:
    """Single-sector Bogoliubov angle and the triangularized 2x2 block.

    exp(v tau2) with sinh(2v) = Im(omega)/Re(omega) lower-triangularizes
    the sector Hamiltonian; the transformed block is
    omega tau0 + |omega| (e^{i eta} - 1) tau_minus.
    """
    if not omega.real > 0:
        raise DegenerateMode(f"Re(omega) must be > 0, got {omega!r}")
    v = 0.5 * math.asinh(omega.imag / omega.real)
    eta = 2.0 * math.atan2(omega.imag, omega.real)
    h_tilde = omega * _S0.copy()
    h_tilde[1, 0] = abs(omega) * (np.exp(1j * eta) - 1.0)
    return v, h_tilde


def _generator(p: np.ndarray) -> np.ndarray:
    v1 = p[0] * _S0 + p[1] * _S2 + p[2] * _S3
    v2 = p[3] * _S0 + p[4] * _S2 + p[5] * _S3
    return np.kron(_S1, v1) + np.kron(_S2, v2)


def _nambu12(V: np.ndarray, h: np.ndarray) -> np.ndarray:
    return (V.conj().T @ h @ V)[0:2, 2:4]


def _residual_vec(p: np.ndarray, h: np.ndarray):
    V = expm(_generator(p))
    blk = _nambu12(V, h)
    coef = [0.5 * np.trace(s @ blk) for s in _SIG]
    r = np.array(
        [coef[0].real, coef[0].imag, coef[2].real, coef[2].imag,
         coef[3].real, coef[3].imag]
    )
    return r, abs(coef[1]), V


def _seed_params(hq: ModeHamiltonian, v_F: float = 1.0) -> np.ndarray:
    """Per-sector angles plus the leading kappa correction."""
    om_c, om_s = hq.omega_c, hq.omega_s
    vc = 0.5 * math.asinh(om_c.imag / om_c.real)
    vs = 0.5 * math.asinh(om_s.imag / om_s.real)
    ssum = om_c + om_s
    denom = abs(ssum) ** 2
    pref = v_F * hq.q / denom
    sh, ch = math.sinh(vc - vs), math.cosh(vc + vs)
    w1 = pref * (hq.kappa_plus * sh * ssum.real - hq.kappa_minus * ch * ssum.imag)
    w2 = pref * (hq.kappa_plus * sh * ssum.imag + hq.kappa_minus * ch * ssum.real)
    return np.array([0.0, w1, 0.0, 0.5 * (vc + vs), w2, 0.5 * (vc - vs)])


def _newton(h: np.ndarray, p0: np.ndarray, tol: float = 1e-13, itmax: int = 60):
    p = p0.astype(float).copy()
    r, s1c, V = _residual_vec(p, h)
    best = (np.max(np.abs(r)), p.copy(), V, s1c)
    eps = 1e-7
    for _ in range(itmax):
        if np.max(np.abs(r)) < tol:
            break
        J = np.empty((6, 6))
        for j in range(6):
            pp = p.copy()
            pp[j] += eps
            rp, _, _ = _residual_vec(pp, h)
            pm = p.copy()
            pm[j] -= eps
            rm, _, _ = _residual_vec(pm, h)
            J[:, j] = (rp - rm) / (2.0 * eps)
        dp = np.linalg.lstsq(J, -r, rcond=None)[0]
        alpha = 1.0
        n0 = np.linalg.norm(r)
        moved = False
        while alpha > 1e-4:
            rn, s1n, Vn = _residual_vec(p + alpha * dp, h)
            if np.linalg.norm(rn) < n0:
                p = p + alpha * dp
                r, s1c, V = rn, s1n, Vn
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        if np.max(np.abs(r)) < best[0]:
            best = (np.max(np.abs(r)), p.copy(), V, s1c)
    res = np.max(np.abs(r))
    if res < best[0]:
        best = (res, p, V, s1c)
    return best


def solve_V_plus(c: Couplings, m_lambda: float = 0.0) -> BogoliubovTransform:
    """Solve for V at q > 0 on the massless fixed point.

    The transform depends only on sign(q), so q = +1 is representative.
    Success requires the Nambu-12 residual and the pseudo-unitarity defect
    below 1e-10; the s1 content of the block (absent on this family by the
    gauge argument) is asserted at the same tolerance.
    """
    if m_lambda != 0.0:
        raise ValueError("massless fixed point only; use the xi/F0 routines for m > 0")
    hq = build_hq(c, q=1.0, m_lambda=0.0, v_F=1.0)
    seeds = [("perturbative", _seed_params(hq)), ("zero", np.zeros(6))]
    last = None
    for name, p0 in seeds:
        res, p, V, s1c = _newton(hq.h, p0)
        defect = float(np.max(np.abs(V.conj().T @ TAU3 @ V - TAU3)))
        if res < _SOLVE_TOL and defect < _SOLVE_TOL:
            if s1c > _GAUGE_TOL:
                raise NoConvergence(
                    f"sigma1 content {s1c:.2e} in the Nambu-12 block", best_residual=res,
                    seed=name,
                )
            return BogoliubovTransform(V=V, params=p, residual=float(res))
        last = (name, res)
    raise NoConvergence(
        f"Newton stalled at residual {last[1]:.2e}", best_residual=last[1], seed=last[0]
    )


# ---------------------------------------------------------------------------
# trace tables and the six coefficients


def _X(i: int, j: int) -> np.ndarray:
    E = np.zeros((2, 2), dtype=complex)
    E[i, j] = 1.0
    return E + E.conj().T


def _Y(i: int, j: int) -> np.ndarray:
    E = np.zeros((2, 2), dtype=complex)
    E[i, j] = 1.0
    return -1j * (E - E.conj().T)


def sigma_delta_tables(V: BogoliubovTransform | np.ndarray) -> SigmaDeltaTables:
    """Momentum-independent trace coefficients from V at q > 0.

    sigma[a, i, j] = 1/2 tr[V^dag X_ij (tau0 + a tau1) V]     (equal alpha)
    delta[a, i, j] = 1/2 tr[V^dag (X_ij tau3 + a Y_ij tau2) V] (opposite alpha)

    The q < 0 transform enters implicitly through V_- = tau1 V_+^* tau1.
    """
    Vm = V.V if isinstance(V, BogoliubovTransform) else V
    sigma = np.zeros((2, 2, 2))
    delta = np.zeros((2, 2, 2))
    leak = 0.0
    for ai, a in enumerate((1.0, -1.0)):
        for i in range(2):
            for j in range(2):
                Ms = np.kron(_S0 + a * _S1, _X(i, j))
                Md = np.kron(_S3, _X(i, j)) + a * np.kron(_S2, _Y(i, j))
                ts = 0.5 * np.trace(Vm.conj().T @ Ms @ Vm)
                td = 0.5 * np.trace(Vm.conj().T @ Md @ Vm)
                leak = max(leak, abs(ts.imag), abs(td.imag))
                sigma[ai, i, j] = ts.real
                delta[ai, i, j] = td.real
    return SigmaDeltaTables(sigma=sigma, delta=delta, imag_leakage=leak)


def six_coefficients(c: Couplings) -> CorrelationCoefficients:
    """The six real coefficients of the fixed-point correlation matrix."""
    V = solve_V_plus(c)
    tab = sigma_delta_tables(V)
    kt = (abs(c.k_tilde_c), abs(c.k_tilde_s))
    pre = 1.0 / (2.0 * math.pi**2)
    sp_c = pre * kt[0] ** -0.5 * tab.sigma[0, 0, 0]
    sp_s = pre * kt[1] ** -0.5 * tab.sigma[0, 1, 1]
    d_cs = -pre * (kt[1] / kt[0]) ** 0.25 * tab.delta[0, 0, 1] + c.kappa * sp_c
    d_sc = -pre * (kt[0] / kt[1]) ** 0.25 * tab.delta[0, 1, 0] + c.kappa * sp_s
    sm_c = pre * kt[0] ** 0.5 * tab.sigma[1, 0, 0] + 2.0 * c.kappa * d_sc - c.kappa**2 * sp_s
    sm_s = pre * kt[1] ** 0.5 * tab.sigma[1, 1, 1] + 2.0 * c.kappa * d_cs - c.kappa**2 * sp_c
    return CorrelationCoefficients(
        sigma_plus_c=sp_c,
        sigma_plus_s=sp_s,
        sigma_minus_c=sm_c,
        sigma_minus_s=sm_s,
        delta_cs=d_cs,
        delta_sc=d_sc,
        imag_leakage=tab.imag_leakage,
    )


def correlation_matrix(
    coeff: CorrelationCoefficients, kappa: float, v_F: float, x: float
) -> np.ndarray:
    """4x4 connected-correlator matrix at separation x, rows/columns ordered
    (rho_c, rho_s, j_c, j_s).

    kappa is accepted for interface symmetry: the constant measurement-
    induced current it generates drops out of connected correlators.
    """
    if x == 0:
        raise ValueError("correlation matrix diverges at x = 0")
    C = np.zeros((4, 4))
    C[0, 0] = coeff.sigma_plus_c
    C[1, 1] = coeff.sigma_plus_s
    C[2, 2] = v_F**2 * coeff.sigma_minus_c
    C[3, 3] = v_F**2 * coeff.sigma_minus_s
    C[0, 3] = C[3, 0] = v_F * coeff.delta_cs
    C[1, 2] = C[2, 1] = v_F * coeff.delta_sc
    return -C / x**2


def mean_spin_current(kappa: float, v_F: float, rho0: float) -> float:
    """Constant measurement-induced spin current v_F kappa rho0."""
    if rho0 < 0:
        raise ValueError("rho0 must be >= 0")
    return v_F * kappa * rho0


# ---------------------------------------------------------------------------
# strong coupling: correlation lengths and the massive correlator


def branch_point(k_nu: complex, m_lambda: float, v_F: float = 1.0) -> complex:
    """Upper-half-plane branch point of the massive dispersion."""
    if m_lambda == 0:
        raise ValueError("branch point needs m_lambda != 0")
    if k_nu == 0:
        raise ValueError("branch point needs k_nu != 0")
    qb = complex(np.sqrt(1j * m_lambda**2 / k_nu + 0j)) / v_F
    if qb.imag < 0:
        qb = -qb
    return qb


def correlation_length(
    k_nu: complex, k_nu_prime: complex, m_lambda: float, v_F: float = 1.0
) -> tuple[float, float, float]:
    """Sector decay lengths xi_nu = v_F / |Im sqrt(i m^2 / k_nu)| and the
    pair length max(xi_nu, xi_nu')."""
    xi_a = 1.0 / branch_point(k_nu, m_lambda, v_F).imag
    xi_b = 1.0 / branch_point(k_nu_prime, m_lambda, v_F).imag
    return xi_a, xi_b, max(xi_a, xi_b)


def _h_subtracted(q, k_tilde, m_lambda, v_F, alpha, rk):
    """g(q) - g0(q) without subtractive cancellation.

    g is the massive integrand q (v q/|w|)^alpha |w|/Re(w); g0 its massless
    counterpart.  Uses w - rk v q = -i m^2 / (w + rk v q) exactly.
    """
    w = np.sqrt(k_tilde * v_F**2 * q**2 - 1j * m_lambda**2 + 0j)
    w = np.where(w.imag > 0, -w, w)
    dw = -1j * m_lambda**2 / (w + rk * v_F * q)
    if alpha > 0:
        return -q * dw.real / (w.real * rk.real)
    num = rk.real * (2.0 * (np.conj(rk * v_F * q) * dw).real + np.abs(dw) ** 2) \
        - v_F * q * abs(k_tilde) * dw.real
    return num / (v_F * w.real * rk.real)


def massive_correlator_F0(
    k_tilde: complex,
    m_lambda: float,
    v_F: float,
    alpha: int,
    x: float,
    nodes: int = 16,
    qmax_factor: float = 40.0,
    check: bool = True,
) -> complex:
    """Single-sector correlator integral at the massive fixed point.

    Evaluates int dq/(4 pi) e^{iqx} q (v q/|w|)^alpha |w|/Re(w) as a
    one-sided oscillatory integral: the massless part and the 1/q tail are
    removed analytically (their transforms are closed forms), the smooth
    remainder is integrated over half-period panels split at the dispersion
    knee, and the alternating panel series is resummed by repeated
    averaging.  The real part is the physical correlator; the imaginary
    part is the conjugate partner of the one-sided evaluation.
    """
    if m_lambda == 0:
        raise ValueError("massive correlator needs m_lambda != 0")
    if x == 0:
        raise ValueError("need |x| > 0")
    if alpha not in (1, -1):
        raise ValueError("alpha must be +1 or -1")
    x = abs(x)
    rk = complex(np.sqrt(k_tilde + 0j))
    if not rk.real > 0:
        raise DegenerateMode(f"Re sqrt(k~) must be > 0, got k~ = {k_tilde!r}")
    C0 = 1.0 / rk.real if alpha > 0 else abs(k_tilde) / rk.real
    qb = branch_point(k_tilde, m_lambda, v_F)

    def h(q):
        return _h_subtracted(q, k_tilde, m_lambda, v_F, alpha, rk)

    # 1/q tail coefficient from the stable formula at large q
    Qs = 1e5 * max(1.0, abs(qb))
    c1 = float(Qs * h(np.array([Qs]))[0])
    mu = 2.0 * abs(qb)
    # closed form of int_0^inf e^{iqx} c1 q/(q^2+mu^2) dq
    T = c1 * (
        -0.5 * (math.exp(-mu * x) * expi(mu * x) + math.exp(mu * x) * expi(-mu * x))
        + 0.5j * math.pi * math.exp(-mu * x)
    )

    def panel_sum(n_nodes):
        qmax = qmax_factor * max(1.0 / x, qb.imag, mu)
        npan = int(math.ceil(qmax * x / math.pi))
        xg, wg = np.polynomial.legendre.leggauss(n_nodes)
        # split the first phase panel geometrically from the dispersion knee
        edges = [0.0]
        e = 0.5 * abs(qb)
        while e < math.pi / x and len(edges) < 48:
            edges.append(e)
            e *= 2.0
        edges.append(math.pi / x)
        acc = 0.0 + 0.0j
        partials = np.empty(npan, dtype=complex)
        for j in range(npan):
            seg = edges if j == 0 else (j * math.pi / x, (j + 1) * math.pi / x)
            val = 0.0 + 0.0j
            for a, b in zip(seg[:-1], seg[1:]):
                q = 0.5 * (b - a) * xg + 0.5 * (a + b)
                val += 0.5 * (b - a) * np.sum(
                    wg * (h(q) - c1 * q / (q * q + mu * mu)) * np.exp(1j * q * x)
                )
            acc += val
            partials[j] = acc
        tail = partials[max(0, 2 * npan // 3):]
        while len(tail) > 2:
            tail = 0.5 * (tail[:-1] + tail[1:])
        return tail[-1]

    Ih = panel_sum(nodes)
    if check:
        Ih2 = panel_sum(2 * nodes)
        if abs(Ih - Ih2) > 1e-8 + 1e-6 * abs(Ih2):
            raise NonConvergence(
                f"F0 panel refinement changed the value by {abs(Ih - Ih2):.2e}"
            )
        Ih = Ih2
    return (Ih + T - C0 / x**2) / (2.0 * math.pi)


def fit_decay_modes(xs, values, n_modes: int = 4, power: float = 1.5):
    """Prony least-squares fit of exponentially decaying oscillatory data.

    Pre-flattens by x^power, fits an n_modes linear recurrence, and returns
    (decay_rate, wavevector) of the slowest decaying mode, which sets the
    asymptotic tail.
    """
    u = np.asarray(values, dtype=float) * np.asarray(xs, dtype=float) ** power
    d = xs[1] - xs[0]
    n = len(u)
    if n < 2 * n_modes + 2:
        raise ValueError("not enough samples for the requested mode count")
    A = np.column_stack([u[n_modes - 1 - j: n - 1 - j] for j in range(n_modes)])
    a, *_ = np.linalg.lstsq(A, u[n_modes:], rcond=None)
    roots = np.roots(np.concatenate([[1.0], -a]))
    roots = roots[np.abs(roots) < 1.0]
    if len(roots) == 0:
        raise NonConvergence("no decaying mode found in the Prony fit")
    z = roots[np.argmax(np.abs(roots))]
    return -math.log(abs(z)) / d, abs(np.angle(z)) / d


def xi_fit(
    k_tilde: complex,
    m_lambda: float,
    v_F: float = 1.0,
    alpha: int = 1,
    window: tuple[float, float] = (6.0, 18.0),
    n_samples: int = 52,
    n_modes: int = 4,
) -> tuple[float, float]:
    """Decay length and oscillation wavevector fitted from F0 quadrature.

    Samples the correlator on window * xi_formula and extracts the slowest
    Prony mode; returns (xi_fitted, wavevector_fitted).
    """
    qb = branch_point(k_tilde, m_lambda, v_F)
    xi = 1.0 / qb.imag
    xs = np.linspace(window[0] * xi, window[1] * xi, n_samples)
    vals = [massive_correlator_F0(k_tilde, m_lambda, v_F, alpha, x, check=False).real
            for x in xs]
    decay, wavevector = fit_decay_modes(xs, vals, n_modes=n_modes)
    return 1.0 / decay, wavevector
