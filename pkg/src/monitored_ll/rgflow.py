"""One-loop RG flow of the complex sine-Gordon couplings.

The flow equations for the state (lambda, l_c, l_s, k_c, k_s), all complex,
read

    dlambda/dl = (2 - sum_nu 1/sqrt(l_nu k_nu)) lambda
    dl_nu/dl   = f_t lambda^2
    dk_nu/dl   = -f_x lambda^2

with principal square roots, and the loop coefficients f_t, f_x given by
the triple integral

    (f_t; f_x) = -(1/2 Lambda^4) int_0^{1/Lambda} dR R^3
                 int_0^{2pi} dchi (cos^2 chi; sin^2 chi)
                 int_0^{2pi} dtheta sum_nu
                 exp(-i R cos(chi+theta)) / (l_nu cos^2 theta - k_nu sin^2 theta).

The angular integrals reduce exactly: expanding the exponential in Bessel
harmonics, only the n = 0, +-2 terms survive against cos^2/ sin^2 chi, and
the theta integral is a rational trigonometric integral with residue
closed form.  With

    A_nu = int dtheta 1/(l cos^2 - k sin^2),
    B_nu = int dtheta cos(2 theta)/(l cos^2 - k sin^2),

one gets

    f_t/f_x = -(pi/2 Lambda^4) [ I0 sum_nu A_nu -+ I2 sum_nu B_nu ],
    I0 = int_0^{1/Lambda} R^3 J0(R) dR,   I2 = int_0^{1/Lambda} R^3 J2(R) dR.

The R integral is done by Gauss-Legendre with ``n_R`` nodes (the integrand
is entire, so node doubling is a sharp convergence check).  The raw
tensor-product quadrature over all three axes is kept as
``f_coefficients_brute``; it converges slowly near the real-axis ridge of
the theta denominator and serves as an independent cross-check of the
reduction.

kappa is not renormalized and never appears in the flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache, partial

import numpy as np
from scipy.special import jv

from .errors import BranchError, NoRoot, NonConvergence, SingularIntegrand, StepFailure
from .params import Couplings, PhysicalParams, bare_couplings
from .parallel import ordered_map

_IM_TOL = 1e-9


@dataclass(frozen=True)
class QuadSpec:
    """Node counts for the loop-integral quadrature.

    n_R drives the production (reduced) evaluator; n_chi and n_theta are
    used by the brute-force tensor-product reference path.
    """

    n_R: int = 24
    n_chi: int = 48
    n_theta: int = 48
    Lambda: float = 1.0

    def __post_init__(self):
        if min(self.n_R, self.n_chi, self.n_theta) < 8:
            raise ValueError("quadrature node counts must be >= 8")
        if not self.Lambda > 0:
            raise ValueError("cutoff Lambda must be > 0")


@dataclass(frozen=True)
class FlowState:
    ell: float
    lam: complex
    l_c: complex
    l_s: complex
    k_c: complex
    k_s: complex


@dataclass(frozen=True)
class StepSpec:
    """Adaptive Dormand-Prince 5(4) controls and flow policy."""

    rtol: float = 1e-8
    atol: float = 1e-12
    h0: float = 1e-2
    h_min: float = 1e-12
    max_step: float = 2.0
    escape_threshold: float = 1e3
    weak_threshold: float = 1e-6
    refresh: str = "auto"  # "auto" | "always"
    refresh_delta: float = 1e-2
    freeze: bool = False  # force f = 0 and frozen k, l (linearized-flow mode)


class Phase(Enum):
    ALGEBRAIC = 0
    SHORT_RANGE = 1


@dataclass(frozen=True)
class PhasePoint:
    g_s: float
    gamma: float
    phase: Phase | None
    lambda_ratio: float | None
    delta_sc: float | None = None
    error: str | None = None


@dataclass
class FlowTrace:
    states: list[FlowState]
    status: str  # "completed" | "strong_coupling" | "weak_coupling"
    lambda_ratio: float
    n_f_evals: int = 0
    f_stale: bool = False

    @property
    def final(self) -> FlowState:
        return self.states[-1]


# ---------------------------------------------------------------------------
# loop coefficients


def _check_pair(l, k):
    im = (l * k).imag
    if not (im < 0.0 or abs(im) > _IM_TOL):
        raise SingularIntegrand(
            f"Im(l*k) = {im!r} puts the theta denominator on the real axis"
        )


def _theta_moments(l, k):
    """Closed-form A = int dtheta/(l c^2 - k s^2), B = same with cos(2 theta)."""
    a = 0.5 * (l - k)
    b = 0.5 * (l + k)
    if abs(b) < 1e-300:
        return 2.0 * math.pi / a, 0.0 + 0.0j
    disc = np.sqrt(a * a - b * b + 0j)
    z1 = (-a + disc) / b
    z2 = (-a - disc) / b
    if abs(z1) > abs(z2):
        z1, z2 = z2, z1
    if not abs(z1) < 1.0 - 1e-12 < abs(z2):
        raise SingularIntegrand(
            f"theta-integral pole on the unit circle for l={l!r}, k={k!r}"
        )
    A = (4.0 * math.pi / b) / (z1 - z2)
    B = (2.0 * math.pi - a * A) / b
    return A, B


@lru_cache(maxsize=64)
def _bessel_moments(n_R: int, Lambda: float) -> tuple[float, float]:
    """I0 = int_0^{1/Lambda} R^3 J0 dR and the J2 analogue, by n_R-node GL."""
    x, w = np.polynomial.legendre.leggauss(n_R)
    R = 0.5 * (x + 1.0) / Lambda
    w = w * 0.5 / Lambda
    return float(np.sum(w * R**3 * jv(0, R))), float(np.sum(w * R**3 * jv(2, R)))


def _f_reduced(pairs, n_R, Lambda):
    I0, I2 = _bessel_moments(n_R, Lambda)
    sA = sum(_theta_moments(l, k)[0] for l, k in pairs)
    sB = sum(_theta_moments(l, k)[1] for l, k in pairs)
    pref = -math.pi / (2.0 * Lambda**4)
    return pref * (I0 * sA - I2 * sB), pref * (I0 * sA + I2 * sB)


def f_coefficients(
    l_c: complex,
    l_s: complex,
    k_c: complex,
    k_s: complex,
    quad: QuadSpec | None = None,
    check: bool = True,
) -> tuple[complex, complex]:
    """Loop coefficients (f_t, f_x) for the current couplings.

    Deterministic for a fixed QuadSpec.  With ``check`` the R-node count is
    doubled and a relative mismatch above 1e-5 raises NonConvergence.
    """
    quad = quad or QuadSpec()
    pairs = ((l_c, k_c), (l_s, k_s))
    for l, k in pairs:
        _check_pair(l, k)
    f_t, f_x = _f_reduced(pairs, quad.n_R, quad.Lambda)
    if check:
        f_t2, f_x2 = _f_reduced(pairs, 2 * quad.n_R, quad.Lambda)
        rel = max(
            abs(f_t - f_t2) / max(abs(f_t2), 1e-300),
            abs(f_x - f_x2) / max(abs(f_x2), 1e-300),
        )
        if rel > 1e-5:
            raise NonConvergence(f"f-integral node doubling changed result by {rel:.2e}")
        return f_t2, f_x2
    return f_t, f_x


def f_coefficients_brute(
    l_c: complex,
    l_s: complex,
    k_c: complex,
    k_s: complex,
    quad: QuadSpec | None = None,
    pairs=None,
) -> tuple[complex, complex]:
    """Raw tensor-product Gauss-Legendre evaluation of the triple integral.

    Slowly convergent reference path; production code uses f_coefficients.
    """
    quad = quad or QuadSpec()
    if pairs is None:
        pairs = ((l_c, k_c), (l_s, k_s))
    for l, k in pairs:
        _check_pair(l, k)
    Lam = quad.Lambda
    xR, wR = np.polynomial.legendre.leggauss(quad.n_R)
    R = 0.5 * (xR + 1.0) / Lam
    wR = wR * 0.5 / Lam
    xc, wc = np.polynomial.legendre.leggauss(quad.n_chi)
    chi = (xc + 1.0) * math.pi
    wc = wc * math.pi
    xt, wt = np.polynomial.legendre.leggauss(quad.n_theta)
    th = (xt + 1.0) * math.pi
    wt = wt * math.pi
    S = np.zeros(quad.n_theta, dtype=complex)
    ct2 = np.cos(th) ** 2
    st2 = np.sin(th) ** 2
    for l, k in pairs:
        S += 1.0 / (l * ct2 - k * st2)
    E = np.exp(-1j * R[:, None, None] * np.cos(chi[None, :, None] + th[None, None, :]))
    inner = E @ (wt * S)
    wRR3 = wR * R**3
    pref = -0.5 / Lam**4
    f_t = pref * (wRR3 @ inner @ (wc * np.cos(chi) ** 2))
    f_x = pref * (wRR3 @ inner @ (wc * np.sin(chi) ** 2))
    return complex(f_t), complex(f_x)


# ---------------------------------------------------------------------------
# flow equations


def _inv_sqrt_principal(z: complex) -> complex:
    if z.imag == 0.0 and z.real <= 0.0:
        raise BranchError(f"l*k = {z!r} lies on the negative real axis")
    return 1.0 / complex(np.sqrt(z + 0j))


def rg_rhs(s: FlowState, f_t: complex, f_x: complex) -> np.ndarray:
    """Flow derivative d/dl of (lam, l_c, l_s, k_c, k_s)."""
    dim = 2.0 - _inv_sqrt_principal(s.l_c * s.k_c) - _inv_sqrt_principal(s.l_s * s.k_s)
    lam2 = s.lam * s.lam
    return np.array(
        [dim * s.lam, f_t * lam2, f_t * lam2, -f_x * lam2, -f_x * lam2],
        dtype=complex,
    )


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _state_from_vec(ell, y) -> FlowState:
    return FlowState(ell=ell, lam=y[0], l_c=y[1], l_s=y[2], k_c=y[3], k_s=y[4])


def integrate_flow(
    c0: Couplings,
    ell_max: float = 50.0,
    quad: QuadSpec | None = None,
    solver: StepSpec | None = None,
) -> FlowTrace:
    """Integrate the flow from ell = 0 with lambda(0) = lam, l_nu(0) = 1.

    Stops early with status "strong_coupling" once |lambda/lambda(0)|
    exceeds the escape threshold, or "weak_coupling" once it drops below
    the weak threshold.  The one-loop equations assume Im(l_nu k_nu) < 0;
    a runaway can drive Im(l k) through zero, where the principal root of
    the scaling dimension flips branch and the flow is no longer
    meaningful.  Crossing that line while lambda has grown counts as a
    strong-coupling exit; crossing it otherwise is a numerical failure.
    The loop coefficients are refreshed whenever k or l has drifted by
    more than ``refresh_delta`` since the last evaluation (every accepted
    step with refresh="always"); if a refresh hits a singular integrand
    the previous value is kept and the trace is marked stale.
    """
    if not ell_max > 0:
        raise ValueError("ell_max must be > 0")
    quad = quad or QuadSpec()
    spec = solver or StepSpec()
    lam0 = complex(c0.lam)
    y = np.array([lam0, 1.0, 1.0, c0.k_c, c0.k_s], dtype=complex)
    states = [_state_from_vec(0.0, y)]

    if lam0 == 0:
        # fixed line: nothing flows
        states.append(_state_from_vec(ell_max, y))
        return FlowTrace(states=states, status="weak_coupling", lambda_ratio=0.0)

    n_f = 0
    stale = False
    if spec.freeze:
        f_t = f_x = 0.0 + 0.0j
    else:
        f_t, f_x = f_coefficients(y[1], y[2], y[3], y[4], quad, check=False)
        n_f = 1
    ref = y.copy()

    abs_lam0 = abs(lam0)
    ell = 0.0
    h = min(spec.h0, ell_max)
    k_stages = [None] * 7
    rhs = lambda yy: rg_rhs(_state_from_vec(ell, yy), f_t, f_x)  # noqa: E731

    status = "completed"
    while ell < ell_max:
        h = min(h, ell_max - ell, spec.max_step)
        if h < spec.h_min:
            raise StepFailure(f"step size underflow at ell = {ell}", ell=ell)
        k_stages[0] = rhs(y)
        for i in range(1, 7):
            yi = y + h * sum(a * k_stages[j] for j, a in enumerate(_DP_A[i]))
            k_stages[i] = rhs(yi)
        y5 = y + h * sum(b * k_stages[j] for j, b in enumerate(_DP_B5) if b)
        y4 = y + h * sum(b * k_stages[j] for j, b in enumerate(_DP_B4) if b)
        err = y5 - y4
        scale = spec.atol + spec.rtol * np.maximum(np.abs(y), np.abs(y5))
        enorm = math.sqrt(float(np.mean(np.abs(err / scale) ** 2)))
        if enorm <= 1.0:
            ell += h
            y = y5
            states.append(_state_from_vec(ell, y))
            ratio = abs(y[0]) / abs_lam0
            if ratio > spec.escape_threshold:
                status = "strong_coupling"
                break
            for z in (y[1] * y[3], y[2] * y[4]):
                if z.imag >= 0.0 and z.real <= 0.0:
                    # principal root about to flip branch: flow left validity
                    if ratio > 1.0:
                        status = "strong_coupling"
                    else:
                        raise StepFailure(
                            f"l k reached the negative real axis at ell = {ell} "
                            f"with ratio {ratio:.3g}",
                            ell=ell,
                        )
            if status == "strong_coupling":
                break
            if ratio < spec.weak_threshold:
                status = "weak_coupling"
                break
            if not spec.freeze:
                drift = max(
                    abs(y[1] - ref[1]),
                    abs(y[2] - ref[2]),
                    abs(y[3] - ref[3]),
                    abs(y[4] - ref[4]),
                )
                if spec.refresh == "always" or drift > spec.refresh_delta:
                    try:
                        f_t, f_x = f_coefficients(y[1], y[2], y[3], y[4], quad, check=False)
                        n_f += 1
                        ref = y.copy()
                    except SingularIntegrand:
                        stale = True
        fac = 0.9 * enorm ** (-0.2) if enorm > 0 else 5.0
        h = h * min(5.0, max(0.2, fac))

    return FlowTrace(
        states=states,
        status=status,
        lambda_ratio=abs(y[0]) / abs_lam0,
        n_f_evals=n_f,
        f_stale=stale,
    )


def classify_phase(trace: FlowTrace) -> Phase:
    """Short-range if |lambda(ell_max)/lambda(0)| > 1 (or an early strong-
    coupling exit); algebraic otherwise, including the lambda(0) = 0 line."""
    if trace.status == "strong_coupling":
        return Phase.SHORT_RANGE
    return Phase.SHORT_RANGE if trace.lambda_ratio > 1.0 else Phase.ALGEBRAIC


# ---------------------------------------------------------------------------
# boundaries and scans


def _dimension_sum(gamma: float, g_s: float, g_c: float, c_tilde: float, s_tilde: float):
    p = PhysicalParams(g_s=g_s, gamma=gamma, g_c=g_c, c_tilde=c_tilde, s_tilde=s_tilde)
    c = bare_couplings(p)
    return 1.0 / np.sqrt(complex(c.k_c)) + 1.0 / np.sqrt(complex(c.k_s))


def analytic_boundary(
    g_s: float,
    g_c: float = 1.0,
    c_tilde: float = 1.0 / math.sqrt(2.0),
    s_tilde: float = 1.0 / math.sqrt(2.0),
    rule: str = "re",
    gamma_hi: float = 10.0,
    tol: float = 1e-6,
) -> float:
    """Estimate of the critical gamma/v_F from sum_nu 1/sqrt(k_nu) = 2.

    The complex condition is reduced to its real part by default
    (rule="re"); rule="abs" uses the modulus instead.
    """
    if not g_s > 1.0:
        raise ValueError("analytic boundary needs g_s > 1")
    take = (lambda z: z.real) if rule == "re" else abs
    if rule not in ("re", "abs"):
        raise ValueError(f"unknown boundary rule {rule!r}")

    def fn(gamma):
        return take(_dimension_sum(gamma, g_s, g_c, c_tilde, s_tilde)) - 2.0

    lo, hi = 0.0, gamma_hi
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return 0.0
    if f_lo * f_hi > 0:
        raise NoRoot(
            f"no sign change of the dimension sum on gamma in [0, {gamma_hi}]",
            bracket=(lo, hi),
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) * f_lo > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_point(job, g_c, c_tilde, s_tilde, ell_max, quad, spec):
    g_s, gamma = job
    try:
        p = PhysicalParams(g_s=g_s, gamma=gamma, g_c=g_c, c_tilde=c_tilde, s_tilde=s_tilde)
        trace = integrate_flow(bare_couplings(p), ell_max, quad, spec)
        return PhasePoint(
            g_s=g_s,
            gamma=gamma,
            phase=classify_phase(trace),
            lambda_ratio=trace.lambda_ratio,
        )
    except Exception as exc:  # recorded per point, never aborts the scan
        return PhasePoint(g_s=g_s, gamma=gamma, phase=None, lambda_ratio=None,
                          error=f"{type(exc).__name__}: {exc}")


def phase_diagram_scan(
    gs_values,
    gamma_values,
    g_c: float = 1.0,
    c_tilde: float = 1.0 / math.sqrt(2.0),
    s_tilde: float = 1.0 / math.sqrt(2.0),
    ell_max: float = 50.0,
    quad: QuadSpec | None = None,
    solver: StepSpec | None = None,
    threads: int = 1,
) -> list[PhasePoint]:
    """Classify every grid point; row-major in (g_s, gamma), deterministic
    irrespective of the worker count."""
    gs_values = list(gs_values)
    gamma_values = list(gamma_values)
    if any(b < a for a, b in zip(gs_values, gs_values[1:])) or any(
        b < a for a, b in zip(gamma_values, gamma_values[1:])
    ):
        raise ValueError("grids must be monotone non-decreasing")
    if gs_values and gs_values[0] < 1.0:
        raise ValueError("g_s grid must start at or above 1")
    jobs = [(g, gam) for g in gs_values for gam in gamma_values]
    worker = partial(
        _scan_point,
        g_c=g_c,
        c_tilde=c_tilde,
        s_tilde=s_tilde,
        ell_max=ell_max,
        quad=quad or QuadSpec(),
        spec=solver or StepSpec(),
    )
    return ordered_map(worker, jobs, threads=threads)


def numeric_boundary_column(
    g_s: float,
    gamma_values,
    g_c: float = 1.0,
    c_tilde: float = 1.0 / math.sqrt(2.0),
    s_tilde: float = 1.0 / math.sqrt(2.0),
    ell_max: float = 50.0,
    quad: QuadSpec | None = None,
    solver: StepSpec | None = None,
    tol: float = 1e-3,
) -> float:
    """Bisect the first algebraic/short-range crossing along a gamma column.

    Returns NaN if the whole column is algebraic.
    """
    quad = quad or QuadSpec()
    spec = solver or StepSpec()

    def phase_at(gamma):
        pt = _scan_point((g_s, gamma), g_c, c_tilde, s_tilde, ell_max, quad, spec)
        if pt.phase is None:
            # the flow left its validity domain: not a clean algebraic flow,
            # so it counts as the short-range side of the bracket
            return Phase.SHORT_RANGE
        return pt.phase

    prev = gamma_values[0]
    prev_phase = phase_at(prev)
    bracket = None
    for gamma in gamma_values[1:]:
        cur_phase = phase_at(gamma)
        if prev_phase is Phase.ALGEBRAIC and cur_phase is Phase.SHORT_RANGE:
            bracket = (prev, gamma)
            break
        prev, prev_phase = gamma, cur_phase
    if bracket is None:
        return math.nan
    lo, hi = bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phase_at(mid) is Phase.ALGEBRAIC:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
