"""Seeded Monte Carlo for the oriented cluster, grown one level at a time.

Each lattice edge (x, x + e_i) gets its own uniform derived purely from
(seed, replica, x, i): a keyed 8-byte blake2b digest of the vertex expanded
per direction with a splitmix64 finalizer.  Sampling is therefore counter
based; the same edge queried from any code path, any worker partition, or
any run with the same seed sees the same outcome.  That makes results
bit-reproducible and makes coupled comparisons across parameter vectors exact
(raising any p_i can only add open edges).

Frontiers are sparse dicts from coordinate tuples to exact integer path
counts (or occupancy bits), so the martingale numerator never saturates.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from hashlib import blake2b

from .errors import ResourceLimitError, ValidationError
from .vectors import EdgeParams

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

THREADS_ENV_VAR = "OPERCOLATE_THREADS"
DEFAULT_MEMORY_CAP = 2 << 30  # bytes

# 95% normal-approximation half-width multiplier.
_Z95 = 1.959963984540054


def _thresholds(params: EdgeParams):
    # Edge i opens iff its 64-bit uniform is below floor(p_i * 2^64); integer
    # comparison keeps the coupling exact and monotone in p.
    return tuple(int(float(e) * 2.0**64) for e in params.p.as_floats().entries)


def _entry_overhead(d: int) -> int:
    # Rough bytes per frontier entry: dict slot + coordinate tuple + count.
    return 150 + 8 * d


@dataclass(frozen=True)
class SimConfig:
    params: EdgeParams
    max_level: int
    replicas: int
    seed: int
    track_counts: bool = True
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP
    threads: int | None = None

    def __post_init__(self):
        if self.max_level < 1:
            raise ValidationError("max_level must be >= 1")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")
        if self.memory_cap_bytes < 1:
            raise ValidationError("memory cap must be positive")

    def to_record(self) -> dict:
        return {
            "p": [float(e) for e in self.params.p.as_floats().entries],
            "max_level": self.max_level,
            "replicas": self.replicas,
            "seed": self.seed,
            "track_counts": self.track_counts,
            "memory_cap_bytes": self.memory_cap_bytes,
        }


@dataclass(frozen=True)
class FrontierState:
    """Occupied vertices of one level with their open-path counts."""

    level: int
    counts: dict

    def path_total(self) -> int:
        return sum(self.counts.values())

    def alive(self) -> bool:
        return bool(self.counts)


class EdgeSampler:
    """Deterministic per-edge open/closed decisions for one (seed, replica)."""

    __slots__ = ("d", "replica", "thresholds", "_key", "_pack")

    def __init__(self, params: EdgeParams, seed: int, replica: int):
        self.d = params.d
        self.replica = replica
        self.thresholds = _thresholds(params)
        self._key = (seed & _MASK64).to_bytes(8, "little")
        self._pack = struct.Struct("<q%dI" % self.d).pack

    def vertex_base(self, vertex) -> int:
        digest = blake2b(
            self._pack(self.replica, *vertex), key=self._key, digest_size=8
        ).digest()
        return int.from_bytes(digest, "little")

    def open_directions(self, vertex):
        base = self.vertex_base(vertex)
        out = []
        for i, threshold in enumerate(self.thresholds):
            z = (base + (i + 1) * _GOLDEN) & _MASK64
            z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
            z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
            if (z ^ (z >> 31)) < threshold:
                out.append(i)
        return out


def grow_level(
    state: FrontierState,
    sampler: EdgeSampler,
    track_counts: bool = True,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
) -> FrontierState:
    """Advance the frontier one level; each edge is sampled exactly once.

    Two paths through the same vertex share that vertex's outgoing edges, so
    counts follow the true cluster growth rather than independent branching.
    """
    d = sampler.d
    max_entries = max(1, memory_cap_bytes // _entry_overhead(d))
    nxt: dict = {}
    for x, c in state.counts.items():
        for i in sampler.open_directions(x):
            y = x[:i] + (x[i] + 1,) + x[i + 1 :]
            if track_counts:
                nxt[y] = nxt.get(y, 0) + c
            else:
                nxt[y] = 1
        if len(nxt) > max_entries:
            raise ResourceLimitError(
                f"frontier at level {state.level + 1} passed "
                f"{len(nxt)} vertices, over the {memory_cap_bytes}-byte cap"
            )
    return FrontierState(state.level + 1, nxt)


def _run_replica(config: SimConfig, replica: int):
    """Per-level path totals for one replica; totals stay 0 after extinction."""
    sampler = EdgeSampler(config.params, config.seed, replica)
    d = sampler.d
    thresholds = sampler.thresholds
    pack = sampler._pack
    key = sampler._key
    track = config.track_counts
    max_entries = max(1, config.memory_cap_bytes // _entry_overhead(d))

    frontier = {(0,) * d: 1}
    totals = []
    for level in range(config.max_level):
        nxt: dict = {}
        for x, c in frontier.items():
            base = int.from_bytes(
                blake2b(pack(replica, *x), key=key, digest_size=8).digest(),
                "little",
            )
            for i in range(d):
                z = (base + (i + 1) * _GOLDEN) & _MASK64
                z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
                z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
                if (z ^ (z >> 31)) < thresholds[i]:
                    y = x[:i] + (x[i] + 1,) + x[i + 1 :]
                    if track:
                        nxt[y] = nxt.get(y, 0) + c
                    else:
                        nxt[y] = 1
            if len(nxt) > max_entries:
                raise ResourceLimitError(
                    f"replica {replica}: frontier at level {level + 1} passed "
                    f"{len(nxt)} vertices, over the "
                    f"{config.memory_cap_bytes}-byte cap"
                )
        frontier = nxt
        totals.append(sum(frontier.values()) if track else len(frontier))
        if not frontier:
            totals.extend([0] * (config.max_level - level - 1))
            break
    return totals


def replica_count_trajectories(config: SimConfig):
    """Path totals per level for every replica, in replica order."""
    threads = _resolve_threads(config.threads)
    replicas = range(config.replicas)
    if threads <= 1:
        return [_run_replica(config, r) for r in replicas]
    chunks = [list(replicas)[i::threads] for i in range(threads)]
    results: dict = {}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for chunk, rows in zip(
            chunks, pool.map(lambda ch: [_run_replica(config, r) for r in ch], chunks)
        ):
            for r, row in zip(chunk, rows):
                results[r] = row
    return [results[r] for r in range(config.replicas)]


def _resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"bad {THREADS_ENV_VAR} value {env!r}") from None
    return 1


@dataclass(frozen=True)
class SimResult:
    """Per-level sample statistics over all replicas, in level order 1..N."""

    levels: tuple
    mean_w: tuple            # per-level mean of X_n / mu^n (None untracked)
    var_w: tuple             # sample variance of the same (None untracked)
    survival_frac: tuple
    ci_mean_w: tuple         # 95% half-widths (None untracked)
    ci_survival: tuple
    replicas: int
    seed: int

    def csv_rows(self):
        rows = []
        for idx, level in enumerate(self.levels):
            rows.append(
                (
                    level,
                    "" if self.mean_w[idx] is None else self.mean_w[idx],
                    "" if self.var_w[idx] is None else self.var_w[idx],
                    self.survival_frac[idx],
                    "" if self.ci_mean_w[idx] is None else self.ci_mean_w[idx],
                )
            )
        return rows

    def to_record(self) -> dict:
        return {
            "kind": "simulation-result",
            "levels": list(self.levels),
            "mean_w": list(self.mean_w),
            "var_w": list(self.var_w),
            "survival_frac": list(self.survival_frac),
            "ci_mean_w": list(self.ci_mean_w),
            "ci_survival": list(self.ci_survival),
            "replicas": self.replicas,
            "seed": self.seed,
        }


def _summarize(config: SimConfig, trajectories) -> SimResult:
    n_levels = config.max_level
    r = config.replicas
    mu_val = float(config.params.mu)
    track = config.track_counts
    mean_w, var_w, ci_w = [], [], []
    survival, ci_s = [], []
    for idx in range(n_levels):
        alive = sum(1 for row in trajectories if row[idx] > 0)
        frac = alive / r
        survival.append(frac)
        ci_s.append(_Z95 * math.sqrt(frac * (1.0 - frac) / r))
        if not track:
            mean_w.append(None)
            var_w.append(None)
            ci_w.append(None)
            continue
        scale = mu_val ** (idx + 1)
        ws = [row[idx] / scale for row in trajectories]
        mean = math.fsum(ws) / r
        if r > 1:
            var = math.fsum((w - mean) ** 2 for w in ws) / (r - 1)
        else:
            var = 0.0
        mean_w.append(mean)
        var_w.append(var)
        ci_w.append(_Z95 * math.sqrt(var / r))
    return SimResult(
        levels=tuple(range(1, n_levels + 1)),
        mean_w=tuple(mean_w),
        var_w=tuple(var_w),
        survival_frac=tuple(survival),
        ci_mean_w=tuple(ci_w),
        ci_survival=tuple(ci_s),
        replicas=r,
        seed=config.seed,
    )


def estimate_survival(config: SimConfig) -> SimResult:
    """Fraction of replicas whose frontier is still occupied at each level."""
    return _summarize(config, replica_count_trajectories(config))


def estimate_martingale(config: SimConfig) -> SimResult:
    """Per-level mean and variance of the normalized path count X_n / mu^n."""
    if not config.track_counts:
        raise ValidationError("martingale estimation requires track_counts=True")
    if float(config.params.mu) <= 0:
        raise ValidationError("mu must be positive")
    return _summarize(config, replica_count_trajectories(config))
