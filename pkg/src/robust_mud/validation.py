"""Acceptance checks, runnable at reduced (``quick``) or full trial counts.

Each check returns a :class:`CheckResult`; :func:`validate` runs all of them
and reports one line per check.
"""
from __future__ import annotations

import io
import math
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate as sp_integrate
from scipy.signal import welch

from . import interference
from .ber import AnalyticBerInputs, average_ber, average_ber_paths, noise_for_sigma_n1
from .cdma import FadingParams, build_composite_matrix, generate_fading, generate_m_sequence, make_signatures
from .detectors import PenaltyFunction, decorrelate, m_estimate, psi, rho
from .harness import ExperimentConfig, emit_results, mc_oracle_interference, run_ber_sweep
from .interference import BoundaryProfile, interferer_cf_given_sB, sample_interferer
from .quadrature import QuadratureSpec, integrate

__all__ = ["CheckResult", "CHECKS", "run_check", "validate", "format_report"]

OMEGA_GRID = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0)
LEVELS = ("quick", "full")


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.name}: measured {self.measured}; expected {self.expected}"
                f" ({self.seconds:.1f} s)")


def _s_integral(i, j, w):
    f = lambda s: math.exp(-0.5 * w * w * (i + j * (1 - 2 * s)) ** 2)
    pts = None
    if j != 0 and 0 < (1 + i / j) / 2 < 1:
        pts = [(1 + i / j) / 2]
    return sp_integrate.quad(f, 0.0, 1.0, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def check_j_kernel(level="full"):
    worst = 0.0
    for i in range(-4, 5):
        for j in range(-4, 5):
            for w in OMEGA_GRID:
                worst = max(worst, abs(float(interference.j_kernel(i, j, w)) - _s_integral(i, j, w)))
    return CheckResult("1 j-kernel oracle", worst <= 1e-8, f"max |err| = {worst:.2e}", "<= 1e-08")


def _s_average_cf(w, prof):
    # breakpoints where some branch variance vanishes
    i = np.arange(-prof.a_nontransitions - 1, prof.a_nontransitions + 2)
    j = np.arange(-prof.b_transitions - 1, prof.b_transitions + 2)
    jj, ii = np.meshgrid(j[j != 0], i)
    s = (1 + ii / jj) / 2
    pts = sorted(set(np.round(s[(s > 0) & (s < 1)], 12)))
    f = lambda s: float(interferer_cf_given_sB(w, s, prof))
    return sp_integrate.quad(f, 0.0, 1.0, points=pts or None, epsabs=1e-13, epsrel=1e-12,
                             limit=400)[0]


def check_cf_closure(level="full"):
    worst = 0.0
    for n in (5, 7):
        for b in range(n):
            prof = BoundaryProfile(n, b)
            for w in OMEGA_GRID:
                closed = float(interference.interferer_cf_given_B(w, prof))
                worst = max(worst, abs(closed - _s_average_cf(w, prof)))
    return CheckResult("2 CF closure over offset", worst <= 1e-8, f"max |err| = {worst:.2e}",
                       "<= 1e-08")


def check_sampling(level="full"):
    trials = 10**6
    prof = BoundaryProfile(7, 3)
    rng = np.random.default_rng(np.random.SeedSequence(20240603))
    x = sample_interferer(prof, rng, trials)
    worst = 0.0
    for w in OMEGA_GRID:
        emp = float(np.mean(np.cos(w * x)))
        worst = max(worst, abs(emp - float(interference.interferer_cf_given_B(w, prof))))
    return CheckResult("3 sampler vs CF", worst <= 3e-3, f"max |err| = {worst:.2e} ({trials} draws)",
                       "<= 3e-03")


def _eq18_19_configs():
    out = []
    for n, b in ((7, 3), (31, 16), (127, 64)):
        prof = BoundaryProfile(n, b)
        for k in (1, 2, 3, 6):
            for sigma in (0.5, 1.0, 3.0, float(n) / 3):
                out.append(AnalyticBerInputs.gaussian(prof, k, sigma))
        for eps in (0.01, 0.1):
            for mode in ("paper", "exact"):
                noise = noise_for_sigma_n1(float(n) / 4, eps, 100.0, mode)
                out.append(AnalyticBerInputs(prof, 6, noise, mode))
    return out


def check_quadrature(level="full"):
    spec = QuadratureSpec()
    worst_id = 0.0
    for k in (0.0, 0.5, 1.0, 2.0, 4.0):
        val, _ = integrate(lambda x: np.sin(k * x) * x * np.exp(-0.5 * x * x), 0.0, 40.0, spec)
        worst_id = max(worst_id, abs(val - math.sqrt(math.pi / 2) * k * math.exp(-0.5 * k * k)))
    worst_path = 0.0
    for inp in _eq18_19_configs():
        direct, split = average_ber_paths(inp, spec)
        worst_path = max(worst_path, abs(direct - split))
    ok = worst_id <= 1e-8 and worst_path <= 1e-8
    return CheckResult("4 quadrature self-test", ok,
                       f"identity err {worst_id:.2e}, route gap {worst_path:.2e}",
                       "both <= 1e-08")


def check_single_user(level="full"):
    val = average_ber(AnalyticBerInputs.gaussian(BoundaryProfile(7, 3), 1, 1.0))
    return CheckResult("5 single-user closed form", abs(val - 0.0050252) <= 1e-6,
                       f"{val:.8f}", "0.0050252 +- 1e-06")


def check_analytic_vs_mc(level="full", workers=1):
    trials = 10**7 if level == "full" else 10**6
    prof = BoundaryProfile(7, 3)
    parts = []
    ok = True
    for sigma in (1.0, 3.0):
        exact = average_ber(AnalyticBerInputs.gaussian(prof, 3, sigma))
        est = mc_oracle_interference(prof, 3, sigma, trials, seed=7_000_000 + int(sigma), workers=workers)
        z = (est.ber - exact) / est.stderr
        ok &= abs(z) <= 3.0
        parts.append(f"sigma={sigma:g}: analytic {exact:.6f} mc {est.ber:.6f} (z={z:+.2f})")
    return CheckResult("6 analytic vs Monte Carlo", ok, "; ".join(parts) + f" [{trials} trials]",
                       "|z| <= 3")


def check_estimator_calculus(level="full"):
    a, b = 1.345, 3.0
    kinds = [PenaltyFunction.huber(), PenaltyFunction.hampel(), PenaltyFunction.proposed()]
    worst_fd = 0.0
    worst_cont = 0.0
    h = 1e-6
    for pf in kinds:
        bps = [v for v in (pf.a, pf.b, pf.c) if v is not None]
        x = np.linspace(-5 * b, 5 * b, 20001)
        mask = np.ones_like(x, bool)
        for bp in bps:
            mask &= np.abs(np.abs(x) - bp) > 1e-3
        x = x[mask]
        fd = (rho(x + h, pf) - rho(x - h, pf)) / (2 * h)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - psi(x, pf)))))
        for bp in bps:
            for sgn in (1, -1):
                lo, hi = np.nextafter(sgn * bp, 0), np.nextafter(sgn * bp, sgn * np.inf)
                for fn in (rho, psi):
                    worst_cont = max(worst_cont, abs(float(fn(lo, pf) - fn(hi, pf))))
    pf = PenaltyFunction("proposed", a, b)
    # continuity at |x| = b: a b - a^2/2 = -a b / 2 + d
    d_gap = abs((a * b - 0.5 * a * a) - (-0.5 * a * b + pf.d))
    ok = worst_fd <= 1e-6 and worst_cont <= 1e-12 and d_gap <= 1e-12
    return CheckResult("7 estimator calculus", ok,
                       f"fd err {worst_fd:.2e}, jump {worst_cont:.2e}, d gap {d_gap:.1e}",
                       "fd <= 1e-06, jumps <= 1e-12")


def check_detector_sanity(level="full"):
    rng = np.random.default_rng(np.random.SeedSequence(31337))
    sig = make_signatures(31, 4)
    worst = 0.0
    ls_match = True
    for _ in range(20):
        while True:
            d = [0, *rng.integers(0, 31, 3)]
            M = build_composite_matrix(sig, d)
            if np.linalg.matrix_rank(M) == M.shape[1]:
                break
        theta = (rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])) / math.sqrt(62)
        y = M @ theta
        for pf in (PenaltyFunction.least_squares(), PenaltyFunction.huber(0.1),
                   PenaltyFunction.hampel(0.1), PenaltyFunction.proposed(0.1)):
            worst = max(worst, float(np.max(np.abs(m_estimate(y, M, pf).theta_hat - theta))))
        yn = y + 0.1 * (rng.standard_normal(31) + 1j * rng.standard_normal(31))
        ls_match &= np.array_equal(m_estimate(yn, M, PenaltyFunction.least_squares()).theta_hat,
                                   decorrelate(yn, M))
    ok = worst <= 1e-10 and ls_match
    return CheckResult("8 detector sanity", ok,
                       f"noise-free err {worst:.1e}, LS bit-match {ls_match}",
                       "err <= 1e-10, bit-match True")


ORDER = ("proposed", "hampel", "huber", "decorrelator")


def check_robust_ordering(level="full", workers=1):
    trials = 10 * 2**14 if level == "full" else 2**14
    cfg = ExperimentConfig(n=31, num_users=4, snr_grid_db=(6.0, 8.0, 10.0), epsilon=0.1,
                           kappa=100.0, trials=trials, seed=20230917, detectors=ORDER)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        curves = {c.detector: c for c in run_ber_sweep(cfg, workers)}
    used = curves["proposed"].records[0].trials
    ok = level != "full" or used >= 10**5
    worst_gap = -math.inf
    wide = 0
    for si in range(len(cfg.snr_grid_db)):
        for better, worse in zip(ORDER, ORDER[1:]):
            rb, rw = curves[better].records[si], curves[worse].records[si]
            se = math.hypot(rb.stderr, rw.stderr)
            gap = (rb.ber - rw.ber) / se if se > 0 else 0.0
            worst_gap = max(worst_gap, gap)
        rp, rd = curves["proposed"].records[si], curves["decorrelator"].records[si]
        wide += (rd.ber - rp.ber) >= 5 * math.hypot(rp.stderr, rd.stderr)
    ok &= worst_gap <= 2.0 and wide >= 2
    bers = ", ".join(f"{d}={curves[d].ber().round(5).tolist()}" for d in ORDER)
    return CheckResult("9 robustness ordering", ok,
                       f"{bers}; worst ordering gap {worst_gap:+.2f} SE; "
                       f"wide wins {wide}/3; {used} symbols/point",
                       "gaps <= +2 SE, >= 2 wide wins, >= 1e5 symbols")


def _csv_bytes(cfg, workers):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        curves = run_ber_sweep(cfg, workers)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "out.csv"
        emit_results(curves, "csv", path)
        return path.read_bytes()


def check_infrastructure(level="full"):
    notes = []
    ok = True
    for m in range(3, 8):
        s = generate_m_sequence(m).astype(int)
        n = s.size
        acf = [int(np.dot(s, np.roll(s, k))) for k in range(n)]
        good = abs(int(s.sum())) == 1 and acf[0] == n and all(v == -1 for v in acf[1:])
        ok &= good
    notes.append(f"m-seq 3-7 {'ok' if ok else 'BAD'}")

    fp = FadingParams(0.998, 80.0, 10_000.0)
    g = generate_fading(2**20, fp, np.random.default_rng(np.random.SeedSequence(8080)))
    f, pxx = welch(g, fs=fp.symbol_rate, nperseg=2**14, return_onesided=False)
    peak = abs(float(f[np.argmax(pxx)]))
    ok &= abs(peak - 80.0) <= 5.0
    notes.append(f"fading peak {peak:.2f} Hz")

    trials = 8 * 2**14 + 123 if level == "full" else 3 * 2**14 + 123
    cfg = ExperimentConfig(n=7, num_users=2, snr_grid_db=(4.0, 12.0), trials=trials, seed=99)
    ref = _csv_bytes(cfg, 1)
    same = all(_csv_bytes(cfg, w) == ref for w in (4, 8))
    ok &= same
    notes.append(f"CSV identical under 1/4/8 workers: {same}")
    return CheckResult("10 infrastructure", ok, "; ".join(notes),
                       "m-seq properties, peak within 5 Hz of 80, identical CSV")


CHECKS = (
    check_j_kernel,
    check_cf_closure,
    check_sampling,
    check_quadrature,
    check_single_user,
    check_analytic_vs_mc,
    check_estimator_calculus,
    check_detector_sanity,
    check_robust_ordering,
    check_infrastructure,
)


def run_check(check, level="full") -> CheckResult:
    t0 = time.perf_counter()
    try:
        res = check(level)
    except Exception as exc:  # a crashing check is a failed check
        res = CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}", "no error")
    res.seconds = time.perf_counter() - t0
    return res


def validate(level: str = "quick", stream=None) -> list[CheckResult]:
    """Run every acceptance check, printing one line per check to `stream`."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    results = []
    for check in CHECKS:
        res = run_check(check, level)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
        results.append(res)
    return results


def format_report(results) -> str:
    buf = io.StringIO()
    for r in results:
        print(r.line(), file=buf)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed", file=buf)
    return buf.getvalue()
