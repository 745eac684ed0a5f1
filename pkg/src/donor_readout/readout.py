"""Monte Carlo single-donor readout by resonant light scattering.

Each trial is an exact jump process on the rate matrix of
:mod:`donor_readout.dynamics`: exponential sojourns, branching by rate.
x -> g decays emit an elastic photon, Auger decays a TES photon; each photon
is collected with probability ``collection_efficiency``.

Trial ``k`` for initial state ``s`` draws from its own Philox stream keyed
by the master seed with counter ``(0, 0, s, k)``, so results do not depend
on trial order or on how trials are spread over workers.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .dynamics import RateParams, State, bright_cycle_rate, build_rate_matrix
from .levels import LevelScheme, material_preset

_MASK64 = (1 << 64) - 1


class Initial(enum.IntEnum):
    BRIGHT = 0  # 1S
    DARK = 1  # excited hydrogenic


_START_STATE = {Initial.BRIGHT: State.G, Initial.DARK: State.E}


def _default_scheme() -> LevelScheme:
    return LevelScheme.from_material(material_preset("GaAs"))


@dataclass(frozen=True)
class ReadoutConfig:
    rates: RateParams = field(default_factory=lambda: RateParams(p_auger=0.0))
    window: float = 100.0  # ns
    collection_efficiency: float = 0.1
    n_trials: int = 10_000
    rng_seed: int = 0
    count_elastic_only: bool = True
    scheme: LevelScheme = field(default_factory=_default_scheme)

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("window must be > 0")
        if not 0 <= self.collection_efficiency <= 1:
            raise ValueError("collection_efficiency must lie in [0, 1]")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


def photon_budget_preset(**kw) -> ReadoutConfig:
    """Strongly saturated resonant probe, no Auger decay: ~10 photons per 100 ns."""
    rates = RateParams(p_auger=0.0).with_nir(intensity=100.0, sat_intensity=1.0)
    return ReadoutConfig(rates=rates, **kw)


def quantum_well_preset(**kw) -> ReadoutConfig:
    """Quantum-well exciton lifetime (232 ps) with a 23 ns window."""
    scheme = LevelScheme.from_material(material_preset("GaAs"), tau_d0x=0.232)
    rates = RateParams.from_scheme(scheme, p_auger=0.0).with_nir(intensity=100.0, sat_intensity=1.0)
    kw.setdefault("window", 23.0)
    return ReadoutConfig(rates=rates, scheme=scheme, **kw)


@dataclass(frozen=True)
class _JumpTables:
    exit_rates: np.ndarray
    n_dest: np.ndarray
    cum_dest: np.ndarray
    dest: np.ndarray
    emit_prob: np.ndarray


def _jump_tables(cfg: ReadoutConfig) -> _JumpTables:
    M = build_rate_matrix(cfg.scheme, cfg.rates)
    n = M.shape[0]
    eta = cfg.collection_efficiency
    exit_rates = np.zeros(n)
    n_dest = np.zeros(n, dtype=np.int64)
    cum = np.ones((n, n))
    dest = np.zeros((n, n), dtype=np.int64)
    emit = np.zeros((n, n))
    for i in range(n):
        targets = [j for j in range(n) if j != i and M[j, i] > 0]
        total = sum(M[j, i] for j in targets)
        exit_rates[i] = total
        n_dest[i] = len(targets)
        acc = 0.0
        for k, j in enumerate(targets):
            acc += M[j, i] / total
            cum[i, k] = acc
            dest[i, k] = j
            if i == State.X:
                if j == State.G:
                    emit[i, k] = eta
                elif not cfg.count_elastic_only:
                    emit[i, k] = eta
        if targets:
            cum[i, len(targets) - 1] = 1.0
    return _JumpTables(exit_rates, n_dest, cum, dest, emit)


def _trial_rng(master_seed: int, initial: Initial, trial_seed: int) -> np.random.Generator:
    bitgen = np.random.Philox(
        key=int(master_seed) & _MASK64,
        counter=np.array([0, 0, int(initial), int(trial_seed) & _MASK64], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


def _run(tables: _JumpTables, cfg: ReadoutConfig, initial: Initial, trial_seed: int):
    rng = _trial_rng(cfg.rng_seed, initial, trial_seed)
    return _kernels.jump_trial(
        rng, tables.exit_rates, tables.n_dest, tables.cum_dest, tables.dest,
        tables.emit_prob, int(_START_STATE[initial]), float(cfg.window),
    )


def simulate_trajectory(cfg: ReadoutConfig, initial: Initial | str, trial_seed: int) -> tuple[int, State]:
    """Collected photon count and final state of one trial."""
    initial = Initial[initial.upper()] if isinstance(initial, str) else Initial(initial)
    count, final = _run(_jump_tables(cfg), cfg, initial, trial_seed)
    return int(count), State(final)


@dataclass(frozen=True)
class PhotonCountHistogram:
    """Per-trial outcomes for bright (1S) and dark (excited) starts.

    Final states are kept so that QND statistics can be computed; synthetic
    histograms may omit them.
    """

    bright_counts: np.ndarray
    dark_counts: np.ndarray
    bright_final: np.ndarray | None = None
    dark_final: np.ndarray | None = None

    def __post_init__(self):
        if self.bright_counts.size == 0 or self.dark_counts.size == 0:
            raise ValueError("both histograms must be nonempty")
        if np.any(self.bright_counts < 0) or np.any(self.dark_counts < 0):
            raise ValueError("photon counts must be >= 0")

    @classmethod
    def from_counts(cls, bright, dark) -> PhotonCountHistogram:
        return cls(np.asarray(bright, dtype=np.int64), np.asarray(dark, dtype=np.int64))

    @property
    def max_count(self) -> int:
        return int(max(self.bright_counts.max(), self.dark_counts.max()))

    def histogram(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.max_count + 1
        return (
            np.arange(n),
            np.bincount(self.bright_counts, minlength=n),
            np.bincount(self.dark_counts, minlength=n),
        )

    def to_csv(self) -> str:
        k, b, d = self.histogram()
        rows = ["photon_count,bright_trials,dark_trials"]
        rows += [f"{i},{x},{y}" for i, x, y in zip(k, b, d)]
        return "\n".join(rows) + "\n"

    def mean(self, which: str = "bright") -> float:
        return float(getattr(self, f"{which}_counts").mean())

    def standard_error(self, which: str = "bright") -> float:
        c = getattr(self, f"{which}_counts")
        return float(c.std(ddof=1) / math.sqrt(c.size)) if c.size > 1 else math.inf


def _simulate_block(tables, cfg, initial, seeds):
    counts = np.empty(len(seeds), dtype=np.int64)
    finals = np.empty(len(seeds), dtype=np.int64)
    for k, s in enumerate(seeds):
        counts[k], finals[k] = _run(tables, cfg, initial, s)
    return counts, finals


def simulate_counts(cfg: ReadoutConfig, initial: Initial | str,
                    workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Photon counts and final states of ``n_trials`` trials from one initial state.

    Trials are split into contiguous blocks across ``workers`` threads; the
    compiled kernel releases the GIL. Output does not depend on ``workers``.
    """
    initial = Initial[initial.upper()] if isinstance(initial, str) else Initial(initial)
    tables = _jump_tables(cfg)
    seeds = np.arange(cfg.n_trials)
    if workers <= 1:
        return _simulate_block(tables, cfg, initial, seeds)
    blocks = np.array_split(seeds, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: _simulate_block(tables, cfg, initial, b), blocks))
    counts, finals = zip(*parts)
    return np.concatenate(counts), np.concatenate(finals)


def photon_histograms(cfg: ReadoutConfig, workers: int = 1) -> PhotonCountHistogram:
    """Run ``n_trials`` trials per initial state."""
    bright, bright_final = simulate_counts(cfg, Initial.BRIGHT, workers)
    dark, dark_final = simulate_counts(cfg, Initial.DARK, workers)
    return PhotonCountHistogram(bright, dark, bright_final, dark_final)


def expected_photons(cfg: ReadoutConfig) -> float:
    """Mean collected photons for a bright start, no-relight approximation.

    With D0X decay rate R in the bright cycle, Auger probability p per decay
    and window T, the elastic yield is eta (1-p)/p (1 - exp(-p R T)),
    reducing to eta R T as p -> 0.
    """
    eta = cfg.collection_efficiency
    p = cfg.rates.p_auger
    rt = bright_cycle_rate(cfg.rates) * cfg.window
    if p == 0:
        return eta * rt
    shelved = -math.expm1(-p * rt)
    mean = eta * (1.0 - p) / p * shelved
    if not cfg.count_elastic_only:
        mean += eta * shelved
    return mean


@dataclass
class ReadoutResult:
    threshold: int
    fidelity: float
    miss_rate: float
    false_rate: float
    qnd_probability: float

    def to_dict(self) -> dict:
        return asdict(self)


_BRIGHT_STATES = (int(State.G), int(State.X))


def choose_threshold(h: PhotonCountHistogram) -> ReadoutResult:
    """Best integer threshold; a trial reads bright when its count >= threshold.

    Minimizes miss + false rate over thresholds 0..max count, ties going to
    the smaller threshold. The QND probability is the fraction of bright
    trials read as bright that also end in a bright (1S-cycling) state.
    """
    _, b, d = h.histogram()
    nb, nd = int(b.sum()), int(d.sum())
    # counts of bright trials below t and dark trials at or above t
    miss_n = np.concatenate(([0], np.cumsum(b)[:-1]))
    false_n = nd - np.concatenate(([0], np.cumsum(d)[:-1]))
    # compare in exact integers so that ties resolve to the smallest threshold
    t = int(np.argmin(miss_n * nd + false_n * nb))
    miss, false = miss_n[t] / nb, false_n[t] / nd
    qnd = math.nan
    if h.bright_final is not None:
        reported = h.bright_counts >= t
        if reported.any():
            qnd = float(np.isin(h.bright_final[reported], _BRIGHT_STATES).mean())
        else:
            qnd = 0.0
    return ReadoutResult(
        threshold=t,
        fidelity=float(1.0 - (miss + false) / 2.0),
        miss_rate=float(miss),
        false_rate=float(false),
        qnd_probability=qnd,
    )
