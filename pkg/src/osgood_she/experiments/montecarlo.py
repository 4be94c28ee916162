"""Monte Carlo plumbing: fixed path batches, ordered process pools, summaries."""
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

BATCH_SIZE = 32
Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def intervals_overlap(a, b) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def path_batches(n_paths: int, size: int = BATCH_SIZE):
    """Fixed id chunks; batch composition never depends on the worker count."""
    return [list(range(i, min(i + size, n_paths))) for i in range(0, n_paths, size)]


def stream_id(sub_run: int, path_id: int) -> int:
    return (int(sub_run) << 32) | int(path_id)


def run_ordered(func, tasks, workers: int = 1):
    """Map func over tasks; results come back in task order whatever the worker count."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        return list(ex.map(func, tasks))


@dataclass
class McSummary:
    n_paths: int
    exploded_count: int
    explosion_fraction: float
    interval: tuple
    times: np.ndarray
    mean_vp: np.ndarray
    max_vp: np.ndarray
    seeds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n_paths": self.n_paths, "exploded_count": self.exploded_count,
                "explosion_fraction": self.explosion_fraction,
                "interval": [float(x) for x in self.interval]}


def summarize(results) -> McSummary:
    n = len(results)
    k = sum(r.exploded for r in results)
    times = sorted({float(row[0]) for r in results for row in r.norm_trace if not r.exploded}
                   or {float(row[0]) for r in results for row in r.norm_trace})
    pos = {t: i for i, t in enumerate(times)}
    mat = np.full((n, len(times)), np.nan)
    for j, r in enumerate(results):
        for row in r.norm_trace:
            i = pos.get(float(row[0]))
            if i is not None and np.isfinite(row[3]):
                mat[j, i] = row[3]
    with np.errstate(all="ignore"), _quiet():
        mean = np.nanmean(mat, axis=0) if n else np.array([])
        mx = np.nanmax(mat, axis=0) if n else np.array([])
    return McSummary(n, int(k), k / n if n else 0.0, wilson_interval(k, n), np.array(times), mean, mx,
                     [(r.path_id, r.seed, r.stream) for r in results])


class _quiet:
    def __enter__(self):
        import warnings
        self._cm = warnings.catch_warnings()
        self._cm.__enter__()
        warnings.simplefilter("ignore", RuntimeWarning)

    def __exit__(self, *exc):
        return self._cm.__exit__(*exc)
