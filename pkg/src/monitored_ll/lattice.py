"""Desk-scale exact simulator of the monitored lattice model.

Spin-1/2 fermions on a ring of L sites with coherent hopping t0,
ferromagnetic Ising exchange Jz, optional spin-flip terms (Zeeman h or
Rashba alpha), and monitoring of the directed-hopping jump operators

    L_{x,sigma} = sqrt(gamma) c^dag_{x+sigma, sigma} c_{x, sigma},

sigma = +1 for up, -1 for down, with periodic wrap.  Trajectories follow
the quantum-state-diffusion form of the stochastic Schroedinger equation
(Ito, Euler-Maruyama, renormalized each step, with W = Re<L> taken from
the pre-step state).  Everything is restricted to a fixed particle-number
sector; states are dense vectors, operators sparse matrices with
Jordan-Wigner signs over the mode ordering (all up modes, then all down).

The per-channel noise is drawn from counter-based Philox streams keyed by
(seed, trajectory) with the step index as the counter, so ensembles are
bitwise reproducible for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import SectorMismatch, StepRejected
from .parallel import ordered_map

OBSERVABLE_LABELS = ("rho_c", "rho_s", "j_c", "j_s")


@dataclass(frozen=True)
class LatticeParams:
    L: int
    t0: float = 1.0
    Jz: float = 0.0
    h: float = 0.0
    alpha: float = 0.0
    gamma: float = 0.0
    dt: float = 0.01
    t_final: float = 1.0
    n_traj: int = 1
    seed: int = 0
    n_up: int | None = None
    n_dn: int | None = None
    n_total: int | None = None
    boundary: str = "ring"
    sample_every: int = 10

    def __post_init__(self):
        if not 2 <= self.L <= 8:
            raise ValueError(f"L must be in [2, 8], got {self.L}")
        scale = max(abs(self.t0), abs(self.Jz), self.gamma, abs(self.h), abs(self.alpha))
        if scale > 0 and not self.dt * scale < 0.05:
            raise ValueError(
                f"dt * max(t0, Jz, gamma, h, alpha) = {self.dt * scale:.3g} must be < 0.05"
            )
        if self.boundary not in ("ring", "open"):
            raise ValueError(f"boundary must be 'ring' or 'open', got {self.boundary!r}")
        fixed = self.n_up is not None and self.n_dn is not None
        total = self.n_total is not None
        if fixed == total:
            raise ValueError("specify either (n_up, n_dn) or n_total, not both")
        if (self.h != 0 or self.alpha != 0) and fixed:
            raise SectorMismatch(
                "spin-flip terms do not conserve (N_up, N_dn); use n_total"
            )
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


class SectorBasis:
    """Occupation basis of a particle-number sector.

    Mode m = x for spin-up, m = L + x for spin-down; a basis state is the
    2L-bit integer of mode occupations.
    """

    def __init__(self, L: int, n_up: int | None, n_dn: int | None, n_total: int | None):
        self.L = L
        sites = range(L)

        def masks(n):
            return [sum(1 << s for s in combo) for combo in combinations(sites, n)]

        states = []
        if n_total is None:
            for u in masks(n_up):
                for d in masks(n_dn):
                    states.append(u | (d << L))
        else:
            if not 0 <= n_total <= 2 * L:
                raise ValueError("n_total out of range")
            for nu in range(max(0, n_total - L), min(L, n_total) + 1):
                for u in masks(nu):
                    for d in masks(n_total - nu):
                        states.append(u | (d << L))
        states.sort()
        if not states:
            raise ValueError("empty particle-number sector")
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self.dim = len(states)


def _hop_matrix(basis: SectorBasis, m_to: int, m_from: int) -> sp.csr_matrix:
    """Sparse matrix of c^dag_{m_to} c_{m_from} with Jordan-Wigner signs."""
    rows, cols, vals = [], [], []
    for j, s in enumerate(basis.states):
        if not (s >> m_from) & 1:
            continue
        sign = (-1) ** bin(s & ((1 << m_from) - 1)).count("1")
        s1 = s ^ (1 << m_from)
        if (s1 >> m_to) & 1:
            continue
        sign *= (-1) ** bin(s1 & ((1 << m_to) - 1)).count("1")
        s1 |= 1 << m_to
        i = basis.index.get(s1)
        if i is None:
            continue
        rows.append(i)
        cols.append(j)
        vals.append(sign)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


@dataclass
class LatticeOperators:
    params: LatticeParams
    basis: SectorBasis
    H: sp.csr_matrix
    jumps: list  # [(x, sigma, L_op)] in channel order
    jump_stack: sp.csr_matrix  # vstack of the jump operators, (n_ch * dim, dim)
    sum_LdL: sp.csr_matrix
    number_up: sp.csr_matrix
    number_dn: sp.csr_matrix
    n_site: dict  # (x, sigma) -> density matrix
    observables: dict  # label -> [op per site]

    @property
    def dim(self) -> int:
        return self.basis.dim


def build_operators(p: LatticeParams) -> LatticeOperators:
    """Hamiltonian, jump list, densities and adjoint-generator currents."""
    L = p.L
    basis = SectorBasis(L, p.n_up, p.n_dn, p.n_total)
    dim = basis.dim

    def up(x):
        return x % L

    def dn(x):
        return L + (x % L)

    bonds = [(x, (x + 1) % L) for x in range(L)]
    if p.boundary == "open":
        bonds = [(x, x + 1) for x in range(L - 1)]

    H = sp.csr_matrix((dim, dim), dtype=complex)
    for x, y in bonds:
        for mode in (up, dn):
            hop = _hop_matrix(basis, mode(x), mode(y))
            H = H - p.t0 * (hop + hop.conj().T)

    n_site = {}
    for x in range(L):
        n_site[(x, +1)] = _hop_matrix(basis, up(x), up(x))
        n_site[(x, -1)] = _hop_matrix(basis, dn(x), dn(x))

    if p.Jz != 0:
        for x, y in bonds:
            sz_x = 0.5 * (n_site[(x, +1)] - n_site[(x, -1)])
            sz_y = 0.5 * (n_site[(y, +1)] - n_site[(y, -1)])
            H = H - p.Jz * (sz_x @ sz_y)

    if p.h != 0:
        for x in range(L):
            flip = _hop_matrix(basis, up(x), dn(x))
            H = H + p.h * (flip + flip.conj().T)
    if p.alpha != 0:
        for x, y in bonds:
            r = _hop_matrix(basis, up(x), dn(y)) + _hop_matrix(basis, dn(x), up(y))
            H = H + (-1j * p.alpha) * r - (-1j * p.alpha) * r.conj().T

    # jump channels in fixed order: all up bonds, then all down
    jumps = []
    sgam = math.sqrt(p.gamma)
    for sigma in (+1, -1):
        mode = up if sigma > 0 else dn
        for x in range(L):
            tgt = x + sigma
            if p.boundary == "open" and not 0 <= tgt < L:
                continue
            op = sgam * _hop_matrix(basis, mode(tgt), mode(x))
            jumps.append((x, sigma, op.tocsr()))

    sum_LdL = sp.csr_matrix((dim, dim), dtype=complex)
    for _, _, Lop in jumps:
        sum_LdL = sum_LdL + Lop.conj().T @ Lop

    # bond currents from the adjoint generator: hopping part plus the
    # gamma-proportional measurement term; bond x carries flow x -> x+1
    j_sigma = {}
    for sigma in (+1, -1):
        mode = up if sigma > 0 else dn
        ops = []
        for x in range(L):
            y = (x + 1) % L
            hop = _hop_matrix(basis, mode(y), mode(x))
            j = 1j * p.t0 * (hop - hop.conj().T)
            if p.gamma != 0:
                eye = sp.identity(dim, format="csr", dtype=complex)
                if sigma > 0:
                    j = j + p.gamma * (n_site[(x, +1)] @ (eye - n_site[(y, +1)]))
                else:
                    j = j - p.gamma * (n_site[(y, -1)] @ (eye - n_site[(x, -1)]))
            ops.append(j.tocsr())
        j_sigma[sigma] = ops

    observables = {
        "rho_c": [(n_site[(x, +1)] + n_site[(x, -1)]).tocsr() for x in range(L)],
        "rho_s": [(n_site[(x, +1)] - n_site[(x, -1)]).tocsr() for x in range(L)],
        "j_c": [(j_sigma[+1][x] + j_sigma[-1][x]).tocsr() for x in range(L)],
        "j_s": [(j_sigma[+1][x] - j_sigma[-1][x]).tocsr() for x in range(L)],
    }

    number_up = sum(n_site[(x, +1)] for x in range(L)).tocsr()
    number_dn = sum(n_site[(x, -1)] for x in range(L)).tocsr()
    jump_stack = sp.vstack([op for _, _, op in jumps], format="csr")
    return LatticeOperators(
        params=p, basis=basis, H=H.tocsr(), jumps=jumps, jump_stack=jump_stack,
        sum_LdL=sum_LdL.tocsr(), number_up=number_up, number_dn=number_dn,
        n_site=n_site, observables=observables,
    )


def adjoint_apply(ops: LatticeOperators, Q) -> np.ndarray:
    """Adjoint Lindblad generator on an observable: i[H,Q] + sum_mu
    (L^dag Q L - 1/2 {L^dag L, Q})."""
    Qd = Q.toarray() if sp.issparse(Q) else np.asarray(Q, dtype=complex)
    H = ops.H.toarray()
    out = 1j * (H @ Qd - Qd @ H)
    for _, _, Lop in ops.jumps:
        Ld = Lop.toarray()
        LdL = Ld.conj().T @ Ld
        out += Ld.conj().T @ Qd @ Ld - 0.5 * (LdL @ Qd + Qd @ LdL)
    return out


def lindblad_identity_check(p: LatticeParams) -> float:
    """Max-abs of the Lindblad generator applied to the identity,
    sum_mu (L L^dag - L^dag L); zero on the ring by telescoping."""
    ops = build_operators(p)
    dim = ops.dim
    acc = np.zeros((dim, dim), dtype=complex)
    for _, _, Lop in ops.jumps:
        Ld = Lop.toarray()
        acc += Ld @ Ld.conj().T - Ld.conj().T @ Ld
    return float(np.max(np.abs(acc)))


def kraus_pair(L_op, dt: float):
    """Discrete-time measurement pair K0 = 1 - dt/2 L^dag L, K1 = -i sqrt(dt) L."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    dim = L_op.shape[0]
    eye = sp.identity(dim, format="csr", dtype=complex)
    K0 = eye - 0.5 * dt * (L_op.conj().T @ L_op)
    K1 = -1j * math.sqrt(dt) * L_op
    return K0.tocsr(), K1.tocsr()


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    psi: np.ndarray
    time: float = 0.0
    step: int = 0


def initial_state(ops: LatticeOperators) -> np.ndarray:
    """Deterministic product state: up particles on even sites, down on odd,
    falling back to the first basis state if that configuration is not in
    the sector."""
    p, basis = ops.params, ops.basis
    L = p.L
    if p.n_up is not None:
        evens = [x for x in range(L) if x % 2 == 0]
        odds = [x for x in range(L) if x % 2 == 1]
        if p.n_up <= len(evens) and p.n_dn <= len(odds):
            u = sum(1 << x for x in evens[: p.n_up])
            d = sum(1 << x for x in odds[: p.n_dn])
            idx = basis.index.get(u | (d << L), 0)
        else:
            idx = 0
    else:
        idx = 0
    psi = np.zeros(basis.dim, dtype=complex)
    psi[idx] = 1.0
    return psi


def sse_step(traj: Trajectory, ops: LatticeOperators, dW: np.ndarray) -> Trajectory:
    """One Euler-Maruyama update of the stochastic Schroedinger equation.

    dW holds one Normal(0, dt) increment per jump channel, ordered as
    ops.jumps.  W = Re<L> is evaluated on the incoming state; the state is
    renormalized after the update.
    """
    p = ops.params
    psi = traj.psi
    n_ch = len(ops.jumps)
    Lpsi = (ops.jump_stack @ psi).reshape(n_ch, -1)
    W = (Lpsi @ psi.conj()).real
    drift = -1j * (ops.H @ psi) - 0.5 * (ops.sum_LdL @ psi)
    drift += W @ Lpsi
    drift -= 0.5 * float(W @ W) * psi
    noise = -(dW @ Lpsi) + float(dW @ W) * psi
    new = psi + p.dt * drift + noise
    nrm = float(np.linalg.norm(new))
    if abs(nrm - 1.0) > 0.1:
        raise StepRejected(f"norm drifted to {nrm:.3f}; decrease dt")
    return Trajectory(psi=new / nrm, time=traj.time + p.dt, step=traj.step + 1)


def _channel_noise(seed: int, traj_index: int, step: int, n_channels: int, dt: float):
    """Normal(0, dt) increments addressed by (seed, trajectory, step); the
    position in the returned vector selects the (x, sigma) channel."""
    bitgen = np.random.Philox(
        key=np.array([seed, traj_index], dtype=np.uint64),
        counter=np.array([0, 0, 0, step], dtype=np.uint64),
    )
    gen = np.random.Generator(bitgen)
    return gen.standard_normal(n_channels) * math.sqrt(dt)


@dataclass
class TrajectoryResult:
    snapshots: np.ndarray  # (n_snap, dim) states at sample times
    expect_single: dict  # label -> (L,) real site expectations at t_final
    expect_pair: dict  # (A, B) -> (L, L) complex <A_x B_y> at t_final
    final_psi: np.ndarray


def run_trajectory(ops: LatticeOperators, traj_index: int) -> TrajectoryResult:
    p = ops.params
    traj = Trajectory(psi=initial_state(ops))
    n_ch = len(ops.jumps)
    snaps = [traj.psi.copy()]
    for step in range(p.n_steps):
        dW = _channel_noise(p.seed, traj_index, step, n_ch, p.dt)
        traj = sse_step(traj, ops, dW)
        if (step + 1) % p.sample_every == 0 or step + 1 == p.n_steps:
            snaps.append(traj.psi.copy())
    psi = traj.psi
    applied = {
        label: np.column_stack([op @ psi for op in ops.observables[label]])
        for label in OBSERVABLE_LABELS
    }
    expect_single = {
        label: np.array([np.vdot(psi, applied[label][:, x]).real for x in range(p.L)])
        for label in OBSERVABLE_LABELS
    }
    expect_pair = {}
    for A in OBSERVABLE_LABELS:
        for B in OBSERVABLE_LABELS:
            # <A_x B_y> = (A psi)^dag (B psi) for hermitian A
            expect_pair[(A, B)] = applied[A].conj().T @ applied[B]
    return TrajectoryResult(
        snapshots=np.array(snaps),
        expect_single=expect_single,
        expect_pair=expect_pair,
        final_psi=psi,
    )


@dataclass
class CorrelatorEstimate:
    """Connected correlators C_AB(x), ring-translation averaged.

    value[A][B] is an (L,) array over separations; stderr from the
    trajectory-to-trajectory spread; imag_max tracks the discarded
    imaginary part of the per-trajectory estimates.
    """

    value: dict
    stderr: dict
    imag_max: float
    n_traj: int


@dataclass
class EnsembleResult:
    times: np.ndarray
    purity: np.ndarray
    purity_stderr: np.ndarray
    rho1: np.ndarray
    correlators: CorrelatorEstimate
    pertraj_connected: dict  # (A, B) -> (n_traj, L) complex samples
    dim: int


def sample_times(p: LatticeParams) -> np.ndarray:
    ticks = [0] + [
        s for s in range(1, p.n_steps + 1)
        if s % p.sample_every == 0 or s == p.n_steps
    ]
    return np.array([s * p.dt for s in ticks])


def _run_one(traj_index: int, p: LatticeParams) -> TrajectoryResult:
    return run_trajectory(build_operators(p), traj_index)


def run_ensemble(p: LatticeParams, threads: int = 1) -> EnsembleResult:
    """Trajectory ensemble: heating of rho_1 and connected correlators.

    The ensemble purity uses the unbiased pairwise estimator
    mean_{i != j} |<psi_i|psi_j>|^2 (the naive tr(rho_bar^2) carries a 1/n
    bias) with a jackknife standard error.  Correlators follow the
    measurement-averaged connected form, with the nonlinear term evaluated
    per trajectory before averaging; reductions run in trajectory-index
    order so results are bitwise identical for any worker count.
    """
    if p.n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    results = ordered_map(partial(_run_one, p=p), range(p.n_traj), threads=threads)

    n = p.n_traj
    L = p.L
    times = sample_times(p)
    n_snap = len(times)
    dim = results[0].snapshots.shape[1]

    # unbiased ensemble purity per snapshot
    purity = np.empty(n_snap)
    purity_se = np.empty(n_snap)
    for t in range(n_snap):
        Psi = np.array([r.snapshots[t] for r in results])
        G = Psi @ Psi.conj().T
        A2 = np.abs(G) ** 2
        if n == 1:
            purity[t] = 1.0
            purity_se[t] = 0.0
            continue
        off_rows = (A2.sum(axis=1) - np.diag(A2)).real
        total = float(off_rows.sum())
        purity[t] = total / (n * (n - 1))
        # jackknife over trajectories
        loo = (total - 2.0 * off_rows) / ((n - 1) * (n - 2)) if n > 2 else None
        if loo is None:
            purity_se[t] = 0.0
        else:
            purity_se[t] = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))

    Psi_T = np.array([r.snapshots[-1] for r in results])
    rho1 = (Psi_T.conj().T @ Psi_T).T / n  # sum_i |psi_i><psi_i| / n

    # connected correlators, translation averaged per trajectory
    pertraj = {}
    value = {}
    stderr = {}
    imag_max = 0.0
    for A in OBSERVABLE_LABELS:
        value[A] = {}
        stderr[A] = {}
        for B in OBSERVABLE_LABELS:
            samples = np.empty((n, L), dtype=complex)
            for i, r in enumerate(results):
                pair = r.expect_pair[(A, B)]
                ea, eb = r.expect_single[A], r.expect_single[B]
                for x in range(L):
                    idx = (np.arange(L) + x) % L
                    conn = pair[idx, np.arange(L)] - ea[idx] * eb[np.arange(L)]
                    samples[i, x] = conn.mean()
            pertraj[(A, B)] = samples
            mean = samples.mean(axis=0)
            imag_max = max(imag_max, float(np.max(np.abs(mean.imag))))
            value[A][B] = mean.real
            if n > 1:
                stderr[A][B] = samples.real.std(axis=0, ddof=1) / math.sqrt(n)
            else:
                stderr[A][B] = np.zeros(L)

    corr = CorrelatorEstimate(value=value, stderr=stderr, imag_max=imag_max, n_traj=n)
    return EnsembleResult(
        times=times,
        purity=purity,
        purity_stderr=purity_se,
        rho1=rho1,
        correlators=corr,
        pertraj_connected=pertraj,
        dim=dim,
    )


def estimator_eq4(pertraj: dict, A: str, B: str) -> np.ndarray:
    """Connected correlator: trajectory average of (<AB> - <A><B>)."""
    return pertraj[(A, B)].mean(axis=0)


def estimator_two_replica(results: list, A: str, B: str, L: int) -> np.ndarray:
    """Two-replica form 1/2 <(A1 - A2)(B1 - B2)> on rho_2 = avg_i rho_i x rho_i,
    expanded term by term (replica-diagonal products and cross products
    averaged separately)."""
    n = len(results)
    t_ab = np.zeros(L, dtype=complex)
    t_ba = np.zeros(L, dtype=complex)
    t_a_b = np.zeros(L, dtype=complex)
    t_b_a = np.zeros(L, dtype=complex)
    for r in results:
        pair = r.expect_pair[(A, B)]
        ea, eb = r.expect_single[A], r.expect_single[B]
        for x in range(L):
            idx = (np.arange(L) + x) % L
            t_ab[x] += pair[idx, np.arange(L)].mean()
            t_ba[x] += pair[idx, np.arange(L)].mean()
            t_a_b[x] += (ea[idx] * eb[np.arange(L)]).mean()
            t_b_a[x] += (eb[np.arange(L)] * ea[idx]).mean()
    return 0.5 * ((t_ab + t_ba) - (t_a_b + t_b_a)) / n
