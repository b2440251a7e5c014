"""Seeded Monte Carlo BER sweeps, analytic curves and result files.

Randomness is organised in shards of ``SHARD_SIZE`` symbols. Shard ``k``
draws from ``SeedSequence(seed, spawn_key=(k,))`` only, so results do not
depend on how shards are spread over worker processes. The same shard
draws are reused at every SNR point (the noise is drawn at unit scale and
rescaled), which keeps curves free of point-to-point sampling jitter.

SNR convention: ``SNR = E|g|^2 / (2 sigma_c^2)`` with ``E|g|^2 = 1`` and
``sigma_c^2 = (1 - eps) v^2 + eps kappa v^2`` the per-component chip noise
variance. The analytic model measures the matched-filter output in units
where the target term is ``A1 N`` with ``E[A1^2] = 2``; its noise is the chip
mixture scaled by ``N sqrt(2)``, so with ``cf_mode="exact"`` and ``eps = 0``
the single-user analytic BER is the Rayleigh BPSK value
``(1 - sqrt(SNR / (1 + SNR))) / 2`` seen by the simulator. With
``cf_mode="paper"`` the same mixture parameters go through
:func:`~robust_mud.noise.noise_cf_paper`, a Gaussian CF whose variance ``2 [v^2 (1-eps)^2 + kappa^3 v^2 eps^2]`` differs
from the mixture variance (by a factor 2 even at ``eps = 0``).
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ber import AnalyticBerInputs, average_ber
from .cdma import FadingParams, build_composite_matrix, generate_fading, make_signatures, stack_theta
from .detectors import PenaltyFunction, detect_symbols, m_estimate_batch
from .interference import BoundaryProfile, count_transitions, sample_interferer
from .noise import MixtureNoiseParams, sample_noise
from .quadrature import QuadratureSpec

__all__ = [
    "SHARD_SIZE",
    "DELAY_BLOCK",
    "ConfigError",
    "ExperimentConfig",
    "BerRecord",
    "BerCurve",
    "OracleEstimate",
    "parse_config",
    "load_config",
    "dump_config",
    "chip_noise",
    "analytic_inputs",
    "penalty_for",
    "run_ber_sweep",
    "run_analytic_curve",
    "run_oracle_curve",
    "mc_oracle_interference",
    "format_results",
    "emit_results",
    "read_results",
]

SHARD_SIZE = 2**14
DELAY_BLOCK = 2**10
ORACLE_CHUNK = 2**20
DETECTORS = ("decorrelator", "huber", "hampel", "proposed")
_ALIASES = {"least_squares": "decorrelator"}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """All inputs of a simulation or analytic sweep.

    Breakpoints of the robust penalties are multiples of the nominal noise
    std ``v`` at each SNR point.
    """

    n: int = 31
    num_users: int = 4
    snr_grid_db: tuple[float, ...] = (6.0, 8.0, 10.0)
    epsilon: float = 0.1
    kappa: float = 100.0
    trials: int = 100_000
    seed: int = 0
    detectors: tuple[str, ...] = DETECTORS
    pole_radius: float = 0.998
    peak_freq: float = 80.0
    symbol_rate: float = 10_000.0
    delays_mode: str = "random-chip"
    cf_mode: str = "paper"
    huber_a: float = 1.345
    hampel_a: float = 1.345
    hampel_b: float = 3.0
    hampel_c: float = 6.0
    proposed_a: float = 1.345
    proposed_b: float = 3.0
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "detectors",
                           tuple(_ALIASES.get(d, d) for d in self.detectors))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must be non-empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ConfigError("snr_grid_db must be strictly increasing")
        if not 1 <= self.num_users <= self.n:
            raise ConfigError("num_users must lie in [1, n]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.delays_mode not in ("zero", "random-chip"):
            raise ConfigError("delays_mode must be 'zero' or 'random-chip'")
        if self.cf_mode not in ("paper", "exact"):
            raise ConfigError("cf_mode must be 'paper' or 'exact'")
        bad = [d for d in self.detectors if d not in DETECTORS]
        if bad:
            raise ConfigError(f"unknown detectors {bad}; choose from {DETECTORS}")
        try:
            MixtureNoiseParams(1.0, self.epsilon, self.kappa)
            self.fading
            for det in self.detectors:
                penalty_for(self, det, 1.0)
            make_signatures(self.n, self.num_users)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def fading(self) -> FadingParams:
        return FadingParams(self.pole_radius, self.peak_freq, self.symbol_rate)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
        if kind == "tuple[float, ...]":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "tuple[str, ...]":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)


def dump_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config`."""
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    trials: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.trials if self.trials else math.nan

    @property
    def stderr(self) -> float:
        p = self.ber
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else math.nan


@dataclass
class BerCurve:
    """Per-SNR error counts of one detector (or analytic curve)."""

    detector: str
    records: list[BerRecord] = field(default_factory=list)
    nonconverged: int = 0
    excluded: int = 0

    def ber(self) -> np.ndarray:
        return np.array([r.ber for r in self.records])

    def stderr(self) -> np.ndarray:
        return np.array([r.stderr for r in self.records])


@dataclass(frozen=True)
class AnalyticRecord(BerRecord):
    """Analytic point: `value` is exact up to quadrature, ``stderr`` is 0."""

    value: float = 0.0

    @property
    def ber(self) -> float:
        return self.value

    @property
    def stderr(self) -> float:
        return 0.0


def chip_noise(cfg: ExperimentConfig, snr_db: float) -> MixtureNoiseParams:
    """Chip-level mixture noise at `snr_db` under the module's SNR convention."""
    sigma_c2 = 0.5 * 10.0 ** (-snr_db / 10.0)
    v = math.sqrt(sigma_c2 / ((1 - cfg.epsilon) + cfg.epsilon * cfg.kappa))
    return MixtureNoiseParams(v, cfg.epsilon, cfg.kappa)


def analytic_inputs(cfg: ExperimentConfig, snr_db: float) -> AnalyticBerInputs:
    """Analytic-model inputs matching the simulator at `snr_db`."""
    chip = chip_noise(cfg, snr_db)
    mf = chip.scaled(chip.v * cfg.n * math.sqrt(2.0))
    return AnalyticBerInputs(target_profile(cfg), cfg.num_users, mf, cfg.cf_mode)


def penalty_for(cfg: ExperimentConfig, detector: str, scale: float) -> PenaltyFunction:
    if detector == "decorrelator":
        return PenaltyFunction.least_squares()
    if detector == "huber":
        return PenaltyFunction.huber(scale, cfg.huber_a)
    if detector == "hampel":
        return PenaltyFunction.hampel(scale, cfg.hampel_a, cfg.hampel_b, cfg.hampel_c)
    if detector == "proposed":
        return PenaltyFunction.proposed(scale, cfg.proposed_a, cfg.proposed_b)
    raise ConfigError(f"unknown detector {detector!r}")


def _shard_stream(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))


def _run_shard(cfg: ExperimentConfig, shard: int):
    """Error counts of one shard: arrays indexed [snr, detector]."""
    start = shard * SHARD_SIZE
    m = min(SHARD_SIZE, cfg.trials - start)
    L, n = cfg.num_users, cfg.n
    rng = _shard_stream(cfg.seed, shard)
    sig = make_signatures(n, L)
    nblocks = -(-m // DELAY_BLOCK)
    if cfg.delays_mode == "random-chip":
        delays = rng.integers(0, n, size=(nblocks, L))
    else:
        delays = np.zeros((nblocks, L), int)
    delays[:, 0] = 0
    fading = np.stack([generate_fading(m, cfg.fading, rng) for _ in range(L)], axis=1)
    symbols = 2 * rng.integers(0, 2, size=(m + 1, L)) - 1
    unit = sample_noise(MixtureNoiseParams(1.0, cfg.epsilon, cfg.kappa), (m, n), rng)

    nsnr, ndet = len(cfg.snr_grid_db), len(cfg.detectors)
    errors = np.zeros((nsnr, ndet), np.int64)
    nonconv = np.zeros((nsnr, ndet), np.int64)
    used = 0
    excluded = 0
    for blk in range(nblocks):
        sl = slice(blk * DELAY_BLOCK, min((blk + 1) * DELAY_BLOCK, m))
        d = delays[blk]
        M = build_composite_matrix(sig, d)
        count = sl.stop - sl.start
        if np.linalg.matrix_rank(M) < M.shape[1]:
            excluded += count
            continue
        used += count
        theta = stack_theta(d, symbols[1:][sl], symbols[:-1][sl], fading[sl], n)
        clean = theta @ M.T
        g1 = fading[sl, 0]
        b1 = symbols[1:][sl, 0]
        for si, snr in enumerate(cfg.snr_grid_db):
            noise = chip_noise(cfg, snr)
            Y = clean + noise.v * unit[sl]
            for di, det in enumerate(cfg.detectors):
                pf = penalty_for(cfg, det, noise.v)
                th, _, conv, _, _ = m_estimate_batch(Y, M, pf, cfg.tol, cfg.max_iter)
                bhat = detect_symbols(th[:, 0], g1)
                errors[si, di] += int(np.count_nonzero(bhat != b1))
                nonconv[si, di] += int(np.count_nonzero(~conv))
    return errors, nonconv, used, excluded


def _map_shards(fn, cfg, nshards, workers):
    if workers <= 1 or nshards <= 1:
        return [fn(cfg, k) for k in range(nshards)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, [cfg] * nshards, range(nshards)))


def run_ber_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[BerCurve]:
    """Simulated BER of user 1 for every configured detector.

    Delay blocks whose composite matrix is rank deficient are excluded
    from every detector alike; a warning reports the excluded count.
    """
    nshards = -(-cfg.trials // SHARD_SIZE)
    results = _map_shards(_run_shard, cfg, nshards, workers)
    errors = sum(r[0] for r in results)
    nonconv = sum(r[1] for r in results)
    used = sum(r[2] for r in results)
    excluded = sum(r[3] for r in results)
    if excluded:
        warnings.warn(
            f"{excluded} of {cfg.trials} trials excluded: rank-deficient observation matrix",
            RuntimeWarning, stacklevel=2,
        )
    curves = []
    for di, det in enumerate(cfg.detectors):
        recs = [BerRecord(snr, used, int(errors[si, di])) for si, snr in enumerate(cfg.snr_grid_db)]
        curves.append(BerCurve(det, recs, int(nonconv[:, di].sum()), excluded))
    return curves


def target_profile(cfg: ExperimentConfig) -> BoundaryProfile:
    return count_transitions(make_signatures(cfg.n, cfg.num_users).chips[0])


def run_analytic_curve(cfg: ExperimentConfig, quad: QuadratureSpec = QuadratureSpec()) -> BerCurve:
    """Analytic BER over the SNR grid; B is taken from user 1's signature."""
    recs = []
    for snr in cfg.snr_grid_db:
        inp = analytic_inputs(cfg, snr)
        recs.append(AnalyticRecord(snr, 0, 0, average_ber(inp, quad)))
    return BerCurve("analytic", recs)


@dataclass(frozen=True)
class OracleEstimate:
    errors: int
    trials: int

    @property
    def ber(self) -> float:
        return self.errors / self.trials

    @property
    def stderr(self) -> float:
        p = self.ber
        return math.sqrt(p * (1 - p) / self.trials)


def _oracle_chunk(args, chunk):
    prof, K, components, trials, seed = args
    m = min(ORACLE_CHUNK, trials - chunk * ORACLE_CHUNK)
    rng = _shard_stream(seed, chunk)
    stat = rng.rayleigh(1.0, m) * prof.n
    for _ in range(K - 1):
        stat += sample_interferer(prof, rng, m)
    weights = np.array([w for w, _ in components])
    sds = np.sqrt([var for _, var in components])
    pick = rng.choice(len(components), size=m, p=weights / weights.sum())
    stat += sds[pick] * rng.standard_normal(m)
    return int(np.count_nonzero(stat < 0))


def mc_oracle_interference(prof: BoundaryProfile, K: int, sigma_n1: float, trials: int,
                           seed: int = 0, workers: int = 1, components=None) -> OracleEstimate:
    """Direct simulation of ``A1 N + sum_k I_k + n1 < 0``.

    ``A1`` is unit-scale Rayleigh, the ``I_k`` are drawn with
    :func:`~robust_mud.interference.sample_interferer` and ``n1`` is Gaussian
    with std `sigma_n1`, or a Gaussian mixture if `components` (a list of
    ``(weight, variance)``) is given.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if components is None:
        components = [(1.0, float(sigma_n1) ** 2)]
    nchunks = -(-trials // ORACLE_CHUNK)
    counts = _map_shards(_oracle_chunk, (prof, K, tuple(components), trials, seed), nchunks, workers)
    return OracleEstimate(int(sum(counts)), trials)


def run_oracle_curve(cfg: ExperimentConfig, workers: int = 1) -> BerCurve:
    """Monte Carlo of the analytic model at each SNR, noise as in :func:`analytic_inputs`."""
    recs = []
    for snr in cfg.snr_grid_db:
        inp = analytic_inputs(cfg, snr)
        est = mc_oracle_interference(inp.prof, cfg.num_users, inp.sigma_n1, cfg.trials,
                                     cfg.seed, workers, components=inp.noise_components())
        recs.append(BerRecord(snr, est.trials, est.errors))
    return BerCurve("mc_oracle", recs)


CSV_COLUMNS = ("detector", "snr_db", "trials", "errors", "ber", "stderr")


def _rows(curves):
    for c in curves:
        for r in c.records:
            yield {"detector": c.detector, "snr_db": r.snr_db, "trials": r.trials,
                   "errors": r.errors, "ber": r.ber, "stderr": r.stderr}


def format_results(curves, fmt: str, cfg: ExperimentConfig | None = None) -> str:
    """Render curves as CSV or JSON text. Floats are written with ``repr``."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in _rows(curves):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "config": dataclasses.asdict(cfg) if cfg is not None else None,
            "seed": cfg.seed if cfg is not None else None,
            "curves": [
                {"detector": c.detector, "nonconverged": c.nonconverged, "excluded": c.excluded,
                 "records": [{k: v for k, v in row.items() if k != "detector"}
                             for row in _rows([c])]}
                for c in curves
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def emit_results(curves, fmt: str, path, cfg: ExperimentConfig | None = None) -> Path:
    """Write :func:`format_results` output to `path`."""
    text = format_results(curves, fmt, cfg)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def _record(snr, trials, errors, ber):
    # analytic rows carry no trials; their value is the stored BER
    if trials == 0:
        return AnalyticRecord(snr, 0, 0, float(ber))
    return BerRecord(snr, trials, errors)


def read_results(path) -> list[BerCurve]:
    """Load curves written by :func:`emit_results` (format from the suffix)."""
    path = Path(path)
    text = path.read_text()
    curves: dict[str, BerCurve] = {}
    if path.suffix == ".json":
        for c in json.loads(text)["curves"]:
            curves[c["detector"]] = BerCurve(
                c["detector"],
                [_record(r["snr_db"], r["trials"], r["errors"], r["ber"]) for r in c["records"]],
                c["nonconverged"], c["excluded"])
        return list(curves.values())
    for row in csv.DictReader(io.StringIO(text)):
        curve = curves.setdefault(row["detector"], BerCurve(row["detector"]))
        curve.records.append(_record(float(row["snr_db"]), int(row["trials"]), int(row["errors"]),
                                     float(row["ber"])))
    return list(curves.values())
