"""Statistical model checking: Monte-Carlo estimation with adaptive sample size.

Each trial simulates one execution with its own random stream derived from
``(seed, trial index)`` and feeds every observation to one online monitor
per property.  Trials are consumed in index order, and the stopping rule is
checked after every trial, so the outcome does not depend on how trials
were scheduled across worker processes.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from chansmc.channel_system import ChannelSystem, cs_step
from chansmc.errors import ArgumentError
from chansmc.kernel import Observation, Rng, rat
from chansmc.mtl.formula import Prop, Property, Verdict, atoms
from chansmc.mtl.monitor import Monitor
from chansmc.program_graph import Terminal

INCONCLUSIVE_FLAG = Fraction(1, 5)

# why a trial stopped
RESOLVED = "property-resolved"
COMPLETE = "trace-complete"
LENGTH_CAP = "length-cap"
TIME_LOCK = "time-lock"


def _as_fraction(x, what) -> Fraction:
    try:
        return Fraction(rat(x))
    except ArgumentError:
        raise ArgumentError(f"{what} must be a number, got {x!r}") from None


def required_samples(epsilon, delta, p_hat=None) -> int:
    """Samples needed for ``|p_hat - p| <= epsilon`` with probability ``1 - delta``.

    Without an estimate this is the Okamoto-Hoeffding bound
    ``ln(2/delta) / (2 epsilon^2)``.  With one, the variance-adaptive bound
    ``(2/epsilon^2) ln(2/delta) (1/4 - (|p_hat - 1/2| - 2 epsilon/3)^2)``,
    capped by the former.  The shift ``|p_hat - 1/2| - 2 epsilon/3`` is
    clamped at zero so estimates near 1/2 give the largest bound.
    """
    eps = float(_as_fraction(epsilon, "epsilon"))
    dlt = float(_as_fraction(delta, "delta"))
    if not 0 < eps < 0.5:
        raise ArgumentError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if not 0 < dlt < 1:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    log_term = math.log(2 / dlt)
    worst = math.ceil(log_term / (2 * eps * eps))
    if p_hat is None:
        return worst
    p = float(p_hat)
    if not 0 <= p <= 1:
        raise ArgumentError(f"p_hat must lie in [0, 1], got {p_hat}")
    shift = max(0.0, abs(p - 0.5) - 2 * eps / 3)
    adaptive = math.ceil((2 / (eps * eps)) * log_term * (0.25 - shift * shift))
    return max(1, min(worst, adaptive))


@dataclass(frozen=True)
class SmcConfig:
    epsilon: object = Fraction(1, 20)
    delta: object = Fraction(1, 20)
    max_samples: int = 100_000
    max_trace_length: int = 10_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        eps = _as_fraction(self.epsilon, "epsilon")
        dlt = _as_fraction(self.delta, "delta")
        if not 0 < eps < Fraction(1, 2):
            raise ArgumentError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if not 0 < dlt < 1:
            raise ArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", dlt)
        for name in ("max_samples", "max_trace_length", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ArgumentError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ArgumentError(f"seed must be an integer, got {self.seed!r}")
        if not -(2**63) <= self.seed < 2**64:
            raise ArgumentError("seed must fit in 64 bits")

    @property
    def batch_size(self) -> int:
        return max(64, self.workers * 8)


@dataclass(frozen=True)
class TrialResult:
    index: int
    verdicts: dict  # property name -> Verdict
    length: int
    reason: str
    wall_time: float = 0.0


@dataclass
class PropertyEstimate:
    name: str
    n: int = 0
    k: int = 0
    inconclusive: int = 0
    required: int = 0
    done: bool = False

    @property
    def estimate(self) -> Optional[float]:
        return self.k / self.n if self.n else None


@dataclass
class SmcReport:
    properties: list
    epsilon: Fraction
    delta: Fraction
    seed: int
    trials: int
    budget_exhausted: bool
    reasons: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def for_property(self, name) -> PropertyEstimate:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def inconclusive_flagged(self) -> bool:
        return any(self.trials and Fraction(p.inconclusive, self.trials) > INCONCLUSIVE_FLAG for p in self.properties)

    def to_json(self, timing: bool = False) -> dict:
        """JSON form; ``timing`` adds wall time, which breaks byte identity across runs."""
        out = {
            "seed": self.seed,
            "epsilon": str(self.epsilon),
            "delta": str(self.delta),
            "confidence": str(1 - self.delta),
            "trials": self.trials,
            "budget_exhausted": self.budget_exhausted,
            "inconclusive_flagged": self.inconclusive_flagged,
            "terminal_reasons": dict(sorted(self.reasons.items())),
            "properties": [
                {
                    "name": p.name,
                    "n": p.n,
                    "k": p.k,
                    "estimate": p.estimate,
                    "interval": None
                    if p.n == 0
                    else [p.estimate - float(self.epsilon), p.estimate + float(self.epsilon)],
                    "inconclusive": p.inconclusive,
                    "required": p.required,
                    "converged": p.done,
                }
                for p in self.properties
            ],
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


# --------------------------------------------------------------------------
# Trials


def referenced_labels(properties: Sequence[Property]) -> frozenset:
    return frozenset(a.name for p in properties for a in atoms(p.formula) if isinstance(a, Prop))


def run_trial(cs: ChannelSystem, properties: Sequence[Property], cfg: SmcConfig, index: int, wanted=None) -> TrialResult:
    """Simulate trial ``index`` until every property is conclusive or the run ends.

    A deadlocked (finished) execution resolves all remaining properties with
    end-of-trace semantics; a length cap or time-lock leaves them unknown.
    """
    start = time.perf_counter()
    if wanted is None:
        wanted = referenced_labels(properties)
    rng = Rng(cfg.seed).split(index)
    monitors = [Monitor(p.formula) for p in properties]
    open_ = list(range(len(monitors)))
    s = cs.sample_initial_state(rng)
    now = 0
    obs = Observation(cs.labels(s, wanted), None, now)
    length = 0
    reason = LENGTH_CAP
    while True:
        length += 1
        open_ = [i for i in open_ if not monitors[i].update(obs).conclusive]
        if not open_:
            reason = RESOLVED
            break
        if length > cfg.max_trace_length:
            break
        r = cs_step(cs, s, now, rng)
        if isinstance(r, Terminal):
            if r.reason == "deadlock":
                for i in open_:
                    monitors[i].end_of_trace()
                reason = COMPLETE
            else:
                reason = TIME_LOCK
            break
        s, event, now = r
        obs = Observation(cs.labels(s, wanted), event, now)
    verdicts = {p.name: m.verdict for p, m in zip(properties, monitors)}
    return TrialResult(index, verdicts, length, reason, time.perf_counter() - start)


# Worker processes receive the model once, through the pool initializer.
_shared: dict = {}


def _init_worker(cs, properties, cfg):
    _shared["job"] = (cs, properties, cfg, referenced_labels(properties))


def _run_chunk(indices):
    cs, properties, cfg, wanted = _shared["job"]
    out = []
    for i in indices:
        r = run_trial(cs, properties, cfg, i, wanted)
        out.append((r.index, {k: v.value for k, v in r.verdicts.items()}, r.length, r.reason, r.wall_time))
    return out


def _unpack(row) -> TrialResult:
    i, verdicts, length, reason, wall = row
    return TrialResult(i, {k: Verdict(v) for k, v in verdicts.items()}, length, reason, wall)


def _chunks(lo, hi, parts):
    size = max(1, -(-(hi - lo) // parts))
    return [list(range(a, min(a + size, hi))) for a in range(lo, hi, size)]


def estimate(cs: ChannelSystem, properties: Sequence[Property], cfg: SmcConfig, on_trial=None) -> SmcReport:
    """Estimate the probability of each property.

    A property stops counting once its sample count reaches the adaptive
    bound for its current estimate; the run ends when every property has
    stopped or ``max_samples`` trials have run (``budget_exhausted``).
    Unknown verdicts are counted separately and excluded from ``n``.
    ``on_trial`` is called with each consumed :class:`TrialResult`.
    """
    properties = list(properties)
    if not properties:
        raise ArgumentError("no properties to estimate")
    names = [p.name for p in properties]
    if len(set(names)) != len(names):
        raise ArgumentError(f"property names must be distinct: {names}")
    start = time.perf_counter()
    stats = [PropertyEstimate(p.name, required=required_samples(cfg.epsilon, cfg.delta)) for p in properties]
    reasons: dict = {}
    consumed = 0
    pool = None
    try:
        if cfg.workers > 1:
            pool = ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(cs, properties, cfg))
        else:
            _init_worker(cs, properties, cfg)
        while consumed < cfg.max_samples and not all(st.done for st in stats):
            hi = min(cfg.max_samples, consumed + cfg.batch_size)
            if pool is None:
                rows = _run_chunk(range(consumed, hi))
            else:
                rows = [r for part in pool.map(_run_chunk, _chunks(consumed, hi, cfg.workers)) for r in part]
            for row in rows:
                result = _unpack(row)
                consumed += 1
                reasons[result.reason] = reasons.get(result.reason, 0) + 1
                if on_trial is not None:
                    on_trial(result)
                for st in stats:
                    if st.done:
                        continue
                    v = result.verdicts[st.name]
                    if v is Verdict.UNKNOWN:
                        st.inconclusive += 1
                        continue
                    st.n += 1
                    st.k += v is Verdict.TRUE
                    st.required = required_samples(cfg.epsilon, cfg.delta, Fraction(st.k, st.n))
                    st.done = st.n >= st.required
                if all(st.done for st in stats):
                    break
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        _shared.clear()
    return SmcReport(
        stats,
        cfg.epsilon,
        cfg.delta,
        cfg.seed,
        consumed,
        not all(st.done for st in stats),
        reasons,
        time.perf_counter() - start,
    )


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
