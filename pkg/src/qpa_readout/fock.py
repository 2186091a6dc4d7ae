"""Brute-force verification in a truncated number basis.

Everything here integrates or solves the *same physical model* as the
analytic and Gaussian modules but in a representation that makes no Gaussian
assumption: the resonator block lives on a truncated Fock space of dimension
N, and convergence in N is enforced by an occupancy guard (relative weight
of the top five levels below 1e-8) plus an optional doubling check.

Internally all evolution runs in kappa-reduced units (time in 1/kappa,
rates in kappa) for conditioning; public values are SI. The coherence-block
equation is linear but not trace preserving, so long windows are integrated
in chunks with Frobenius renormalization between chunks to avoid underflow;
the accumulated log-norm is exact because the equation is linear.

The truncation heuristic that seeds the guard uses the exact conditioned
photon number and, for the coherence block, the Gaussian-engine steady state
(whose complex means spread occupancy well beyond the physical photon
number). The heuristic only picks a starting N; correctness rests on the
occupancy guard, which is independent of everything it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, ParameterError, TruncationError
from .gaussian import block_steady_state, intracavity_covariance
from .params import DeviceParams, DriveSpec, PumpSpec
from .rates import steady_state_nbar_conditioned, total_dephasing

_OCCUPANCY_THRESHOLD = 1e-8
_SLOPE_REL_TOL = 5e-3
_ODE_RTOL = 1e-8
_ODE_ATOL = 1e-13
_N_CAP = 420
_MIN_WINDOW = 30.0  # kappa units; slope fit uses the final half
_MAX_WINDOW = 960.0
_CHUNK = 10.0


@dataclass(frozen=True)
class TruncationReport:
    """Occupancy diagnostics of the top Fock levels."""

    top_occupancy: np.ndarray  # relative |rho_nn| of the top 5 levels
    tail_fraction: float
    threshold: float = _OCCUPANCY_THRESHOLD

    @property
    def ok(self) -> bool:
        return self.tail_fraction < self.threshold


@dataclass(frozen=True)
class FockState:
    """Truncated number-basis matrix (a coherence block or a physical state)."""

    dim: int
    block: np.ndarray
    trace: complex
    truncation_report: TruncationReport
    log_norm_offset: float = 0.0  # accumulated log of renormalizations

    @property
    def log_trace_magnitude(self) -> float:
        return math.log(abs(self.trace)) + self.log_norm_offset


def _operators(n: int):
    a = sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr", dtype=complex)
    ad = a.conj().transpose().tocsr()
    num = (ad @ a).tocsr()
    return a, ad, num


def _reduced(device: DeviceParams, pump: PumpSpec, drive: DriveSpec):
    lam_r = pump.lam / device.kappa
    chi_r = device.chi / device.kappa
    f = math.sqrt(drive.alpha_in_flux(device) / device.kappa) * np.exp(1j * drive.phi)
    return lam_r, chi_r, f


def _block_generators(n: int, lam_r: float, chi_r: float, f: complex,
                      gamma_intr_r: float):
    """Left/right generator matrices K, Kt of the block equation.

    d rho / d tau = K rho + rho Kt + a rho a^dag, in kappa-reduced time.
    """
    a, ad, num = _operators(n)
    b = -(lam_r / 2.0) * (ad @ ad - a @ a) - (f * ad - np.conj(f) * a)
    k = (b - (1j * chi_r + 0.5) * num - 0.5 * gamma_intr_r * sp.identity(n)).tocsr()
    kt = (-b - (1j * chi_r + 0.5) * num - 0.5 * gamma_intr_r * sp.identity(n)).tocsr()
    return a, ad, k, kt


def _occupancy_report(block: np.ndarray) -> TruncationReport:
    occ = np.abs(np.diag(block))
    total = float(occ.sum())
    if total == 0.0:
        return TruncationReport(np.zeros(5), 0.0)
    rel = occ[-5:] / total
    return TruncationReport(rel.copy(), float(rel.sum()))


def default_truncation(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                       for_block: bool = True) -> int:
    """Starting Fock dimension for the occupancy-guarded runs."""
    n_phys = max(steady_state_nbar_conditioned(device, pump, drive, s)
                 for s in (+1, -1))
    n_est = n_phys
    v_amp = 1.0
    if for_block:
        ss = block_steady_state(device, pump, drive)
        n_mean = 0.5 * float(np.sum(np.abs(ss.mean) ** 2))
        v_amp = max(1.0, float(np.real(ss.cov[0, 0])), float(np.real(ss.cov[1, 1])))
        n_est = max(n_est, n_mean + v_amp - 0.5)
    else:
        v_amp = max(1.0, float(np.max(np.diag(
            intracavity_covariance(device, pump.lam, +1)))))
    n_dim = math.ceil(n_est + 10.0 * math.sqrt(n_est * v_amp) + 20.0 * v_amp)
    return min(int(n_dim), _N_CAP)


def _escalate(n: int) -> int:
    return min(int(math.ceil(1.4 * n)) + 10, _N_CAP)


def evolve_updown_fock(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                       t: float, n_trunc: int | None = None,
                       include_intrinsic: bool = True,
                       initial: np.ndarray | None = None) -> FockState:
    """Integrate the coherence-block equation for a time ``t`` (seconds).

    Starts from the vacuum block unless ``initial`` is given. The truncation
    is auto-raised until the occupancy guard holds; a fixed ``n_trunc``
    disables escalation (the guard still raises on violation).
    """
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    lam_r, chi_r, f = _reduced(device, pump, drive)
    g_r = device.gamma_intrinsic / device.kappa if include_intrinsic else 0.0
    n = n_trunc if n_trunc is not None else default_truncation(device, pump, drive)
    while True:
        if initial is not None and initial.shape[0] > n:
            raise ParameterError("initial block larger than truncation")
        a, ad, k, kt = _block_generators(n, lam_r, chi_r, f, g_r)

        def rhs(_t, y, n=n, a=a, ad=ad, k=k, kt=kt):
            rho = y.reshape(n, n)
            return (k @ rho + rho @ kt + a @ rho @ ad).ravel()

        rho0 = np.zeros((n, n), dtype=complex)
        if initial is None:
            rho0[0, 0] = 1.0
        else:
            rho0[: initial.shape[0], : initial.shape[1]] = initial
        sol = solve_ivp(rhs, (0.0, device.kappa * t), rho0.ravel(),
                        method="DOP853", rtol=_ODE_RTOL, atol=_ODE_ATOL)
        if not sol.success:
            raise ConvergenceError(f"fock integrator failed: {sol.message}")
        block = sol.y[:, -1].reshape(n, n)
        report = _occupancy_report(block)
        if report.ok:
            return FockState(dim=n, block=block, trace=complex(np.trace(block)),
                             truncation_report=report)
        if n_trunc is not None or n >= _N_CAP:
            raise TruncationError(
                f"top-level occupancy {report.tail_fraction:.3e} exceeds "
                f"{report.threshold:.1e} at N={n}"
            )
        n = _escalate(n)


def _decay_slope(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                 n: int) -> tuple[float, bool]:
    """Log-magnitude slope of Tr at fixed N; (slope in kappa units, converged).

    Raises TruncationError on occupancy violation so the caller can escalate.
    """
    lam_r, chi_r, f = _reduced(device, pump, drive)
    a, ad, k, kt = _block_generators(n, lam_r, chi_r, f, 0.0)

    def rhs(_t, y):
        rho = y.reshape(n, n)
        return (k @ rho + rho @ kt + a @ rho @ ad).ravel()

    rho = np.zeros((n, n), dtype=complex)
    rho[0, 0] = 1.0
    taus: list[np.ndarray] = []
    logs: list[np.ndarray] = []
    log_scale = 0.0  # accumulated log of inter-chunk renormalizations
    tau = 0.0
    window = _MIN_WINDOW * 2.0
    pts_per_chunk = 9
    while True:
        target = tau + _CHUNK
        t_eval = np.linspace(tau, target, pts_per_chunk)
        sol = solve_ivp(rhs, (tau, target), rho.ravel(), method="DOP853",
                        rtol=_ODE_RTOL, atol=_ODE_ATOL, t_eval=t_eval)
        if not sol.success:
            raise ConvergenceError(f"fock integrator failed: {sol.message}")
        seg = sol.y.reshape(n, n, -1)
        tr = np.abs(np.einsum("iik->k", seg))
        if np.any(tr == 0.0):
            raise ConvergenceError("trace magnitude underflowed within a chunk")
        taus.append(sol.t)
        logs.append(np.log(tr) + log_scale)
        rho = seg[:, :, -1]
        report = _occupancy_report(rho)
        if not report.ok:
            raise TruncationError(
                f"top-level occupancy {report.tail_fraction:.3e} exceeds "
                f"{report.threshold:.1e} at N={n}"
            )
        scale = float(np.max(np.abs(rho)))
        rho = rho / scale
        log_scale += math.log(scale)
        tau = target
        if tau + 1e-9 < window:
            continue
        t_all = np.concatenate(taus)
        l_all = np.concatenate(logs)
        half = t_all >= 0.5 * tau
        tail = t_all >= 0.75 * tau
        mid = half & ~tail
        slope_mid = float(np.polyfit(t_all[mid], l_all[mid], 1)[0])
        slope_tail = float(np.polyfit(t_all[tail], l_all[tail], 1)[0])
        slope = float(np.polyfit(t_all[half], l_all[half], 1)[0])
        if abs(slope_mid - slope_tail) <= _SLOPE_REL_TOL * max(abs(slope), 1e-30):
            return slope, True
        if tau >= _MAX_WINDOW:
            return slope, False
        window = min(2.0 * window, _MAX_WINDOW + _CHUNK)


def gamma_phi_fock(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                   n_trunc: int | None = None,
                   return_truncation: bool = False):
    """Dephasing rate from brute-force decay of |Tr rho_block|, 1/s.

    Fits the exponential decay over the final half of an adaptively extended
    window (at least 30/kappa) and restores the intrinsic 1/T2*. Truncation
    escalates on occupancy violations unless ``n_trunc`` pins it.
    """
    n = n_trunc if n_trunc is not None else default_truncation(device, pump, drive)
    while True:
        try:
            slope, converged = _decay_slope(device, pump, drive, n)
        except TruncationError:
            if n_trunc is not None or n >= _N_CAP:
                raise
            n = _escalate(n)
            continue
        if not converged:
            raise ConvergenceError(
                "block decay is not exponential on the probed window "
                f"(half-window slopes differ by more than {_SLOPE_REL_TOL:.1%})"
            )
        rate = -slope * device.kappa + device.gamma_intrinsic
        return (rate, n) if return_truncation else rate


def block_decay_eigenvalue(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                           n_trunc: int) -> float:
    """Decay rate from the block superoperator eigenvalue closest to zero.

    Second extraction path: the eigenvalue of the vectorized block generator
    with the largest real part governs the long-time decay. Returns the rate
    in 1/s including the intrinsic 1/T2*.
    """
    lam_r, chi_r, f = _reduced(device, pump, drive)
    a, ad, k, kt = _block_generators(n_trunc, lam_r, chi_r, f, 0.0)
    ident = sp.identity(n_trunc, dtype=complex, format="csr")
    sop = (sp.kron(k, ident) + sp.kron(ident, kt.T) + sp.kron(a, ad.T)).tocsc()
    # shift-invert around the analytic estimate for robust ARPACK convergence
    guess = -(total_dephasing(device, pump, drive) - device.gamma_intrinsic) / device.kappa
    vals = spla.eigs(sop, k=3, sigma=guess, which="LM", return_eigenvectors=False)
    lead = vals[np.argmax(vals.real)]
    return -float(lead.real) * device.kappa + device.gamma_intrinsic


def steady_state_conditioned(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                             sigma: int, n_trunc: int | None = None) -> FockState:
    """Steady state of the qubit-conditioned Lindbladian by null-space solve."""
    if sigma not in (+1, -1):
        raise ParameterError("sigma must be +1 or -1")
    lam_r, chi_r, f = _reduced(device, pump, drive)
    n = n_trunc if n_trunc is not None else default_truncation(
        device, pump, drive, for_block=False)
    while True:
        a, ad, num = _operators(n)
        b = -(lam_r / 2.0) * (ad @ ad - a @ a) - (f * ad - np.conj(f) * a)
        g = (b - (1j * chi_r * sigma + 0.5) * num).tocsr()
        ident = sp.identity(n, dtype=complex, format="csr")
        lop = (sp.kron(g, ident) + sp.kron(ident, g.conj()) + sp.kron(a, ad.T)).tolil()
        # trade one (dependent) row for the trace normalization
        trace_row = np.zeros(n * n, dtype=complex)
        trace_row[:: n + 1] = 1.0
        lop[0, :] = trace_row
        rhs_vec = np.zeros(n * n, dtype=complex)
        rhs_vec[0] = 1.0
        rho = spla.spsolve(lop.tocsc(), rhs_vec).reshape(n, n)
        rho = 0.5 * (rho + rho.conj().T)
        report = _occupancy_report(rho)
        if report.ok:
            eigvals = np.linalg.eigvalsh(rho)
            if eigvals.min() < -1e-10:
                raise ConvergenceError(
                    f"conditioned steady state not positive (min eig {eigvals.min():.2e})"
                )
            tr = complex(np.trace(rho))
            if abs(tr - 1.0) > 1e-10:
                raise ConvergenceError(f"conditioned steady state trace {tr:.12g} != 1")
            return FockState(dim=n, block=rho, trace=tr, truncation_report=report)
        if n_trunc is not None or n >= _N_CAP:
            raise TruncationError(
                f"top-level occupancy {report.tail_fraction:.3e} exceeds "
                f"{report.threshold:.1e} at N={n}"
            )
        n = _escalate(n)


def state_moments(state: FockState) -> dict:
    """Mean field, photon number, and quadrature covariance of a Fock state."""
    n = state.dim
    a, ad, num = _operators(n)
    rho = state.block
    x = (a + ad) / math.sqrt(2.0)
    p = -1j * (a - ad) / math.sqrt(2.0)
    mean_a = complex(np.trace(a @ rho))
    nbar = float(np.real(np.trace(num @ rho)))
    mean_x = float(np.real(np.trace(x @ rho)))
    mean_p = float(np.real(np.trace(p @ rho)))
    xx = np.real(np.trace((x @ x) @ rho)) - mean_x**2
    pp = np.real(np.trace((p @ p) @ rho)) - mean_p**2
    xp = 0.5 * np.real(np.trace((x @ p + p @ x) @ rho)) - mean_x * mean_p
    return {
        "mean_a": mean_a,
        "nbar": nbar,
        "mean_x": mean_x,
        "mean_p": mean_p,
        "cov": np.array([[float(xx), float(xp)], [float(xp), float(pp)]]),
    }


# --------------------------------------------------------------------------
# verification suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationRow:
    """One oracle-vs-analytic comparison."""

    kind: str
    chi_over_kappa: float
    lam_over_kappa: float
    nbar: float
    phi: float
    analytic: float
    oracle: float
    rel_error: float
    tolerance: float
    n_trunc: int
    passed: bool


_PHI_CHOICES = (0.0, math.pi / 4.0, math.pi / 2.0)


def _suite_draws(device: DeviceParams, n_points: int, nbar_max: float,
                 seed: int) -> list[tuple[float, float, float, float]]:
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n_points):
        chi_r = rng.uniform(0.02, 0.15)
        lam_r = rng.uniform(0.0, 0.35)
        nbar = rng.uniform(0.2, nbar_max)
        phi = _PHI_CHOICES[rng.integers(0, len(_PHI_CHOICES))]
        draws.append((chi_r, lam_r, nbar, phi))
    return draws


def _verify_point(args) -> list[VerificationRow]:
    """One suite point (module-level so a process pool can pickle it)."""
    (device, chi_r, lam_r, nbar, phi, rate_tol, doubling_tol, check_doubling,
     chi_corruption) = args
    from .rates import drive_for_nbar

    dev = replace(device, chi=chi_r * device.kappa)
    pump = PumpSpec.from_lambda(lam_r * device.kappa, device.kappa)
    drive = drive_for_nbar(dev, pump, nbar, phi=phi)
    dev_analytic = dev if chi_corruption == 1.0 else \
        replace(dev, chi=chi_corruption * dev.chi)
    analytic = total_dephasing(dev_analytic, pump, drive)
    oracle, n_used = gamma_phi_fock(dev, pump, drive, return_truncation=True)
    rel = abs(oracle / analytic - 1.0)
    rows = [VerificationRow(
        kind="gamma_phi", chi_over_kappa=chi_r, lam_over_kappa=lam_r,
        nbar=nbar, phi=phi, analytic=analytic, oracle=oracle,
        rel_error=rel, tolerance=rate_tol, n_trunc=n_used,
        passed=rel <= rate_tol,
    )]
    if check_doubling:
        doubled = gamma_phi_fock(dev, pump, drive, n_trunc=2 * n_used)
        rel_d = abs(doubled / oracle - 1.0)
        rows.append(VerificationRow(
            kind="truncation_doubling", chi_over_kappa=chi_r,
            lam_over_kappa=lam_r, nbar=nbar, phi=phi, analytic=oracle,
            oracle=doubled, rel_error=rel_d, tolerance=doubling_tol,
            n_trunc=2 * n_used, passed=rel_d <= doubling_tol,
        ))
    return rows


def verification_suite(device: DeviceParams, n_points: int, nbar_max: float,
                       seed: int, rate_tol: float = 0.02,
                       doubling_tol: float = 1e-3,
                       check_doubling: bool = True,
                       chi_corruption: float = 1.0,
                       workers: int = 1) -> list[VerificationRow]:
    """Random-draw oracle suite: dephasing rates vs the closed form.

    Draws chi/kappa in [0.02, 0.15], lam/kappa in [0, 0.35], target photon
    number in [0.2, nbar_max], phi in {0, pi/4, pi/2}. Each point compares
    the Fock-oracle rate against the closed-form total dephasing at
    ``rate_tol`` relative, and (optionally) re-runs at doubled truncation to
    bound the truncation error at ``doubling_tol``.

    Points are independent; ``workers > 1`` fans them out over a process
    pool, gathering results in draw order so the report is identical either
    way. ``chi_corruption`` scales chi on the analytic side only; it exists
    as a mutation-test hook so CI can confirm the suite actually fails when
    the two sides disagree.
    """
    tasks = [(device, chi_r, lam_r, nbar, phi, rate_tol, doubling_tol,
              check_doubling, chi_corruption)
             for chi_r, lam_r, nbar, phi in _suite_draws(device, n_points,
                                                         nbar_max, seed)]
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            chunks = list(pool.map(_verify_point, tasks))
    else:
        chunks = [_verify_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]
