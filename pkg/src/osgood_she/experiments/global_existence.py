"""Global-existence proxy: localized paths under certified conditions, plus the stopping table."""
from dataclasses import dataclass

from ..config import RunConfig, build_setup
from ..solver import simulate_batch
from .montecarlo import McSummary, intervals_overlap, path_batches, run_ordered, stream_id, summarize, wilson_interval
from .preconditions import global_checks, require


@dataclass
class StoppingRow:
    n: int
    a_n: float
    eligible: int
    shortfalls: int
    censored: int
    frequency: float
    lo: float
    hi: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GlobalResult:
    summary: McSummary
    table: list
    results: list
    checks: dict


def _batch(task):
    cfg, seed, ids, sub_run = task
    setup = build_setup(cfg)
    return simulate_batch(setup, seed, [stream_id(sub_run, i) for i in ids], ids)


def simulate_paths(cfg: RunConfig, n_paths: int, seed: int, workers: int = 1, sub_run: int = 0) -> list:
    """Run paths 0..n_paths-1 in fixed batches; results ordered by path id."""
    tasks = [(cfg, seed, ids, sub_run) for ids in path_batches(n_paths)]
    return [r for batch in run_ordered(_batch, tasks, workers) for r in batch]


def stopping_table(results) -> list:
    """Per level n: how often tau_{n+1} - tau_n < a_n among paths where it is decided."""
    rows = {}
    for r in results:
        a = dict(r.ladder.a_seq)
        for n, short in r.ladder.tripling_shortfalls:
            row = rows.setdefault(n, [a[n], 0, 0, 0])
            if short is None:
                row[3] += 1
            else:
                row[1] += 1
                row[2] += int(short)
    table = []
    for n in sorted(rows):
        a_n, elig, k, cens = rows[n]
        lo, hi = wilson_interval(k, elig)
        table.append(StoppingRow(n, a_n, elig, k, cens, k / elig if elig else float("nan"), lo, hi))
    return table


def shortfall_trend_ok(table, min_eligible: int = 20) -> bool:
    """Shortfall frequency nonincreasing in n, up to Wilson interval overlap."""
    rows = [r for r in table if r.eligible >= min_eligible]
    for a, b in zip(rows, rows[1:]):
        if b.frequency > a.frequency and not intervals_overlap((a.lo, a.hi), (b.lo, b.hi)):
            return False
    return True


def run_global_existence(cfg: RunConfig, n_paths: int = None, seed: int = 0, workers: int = 1,
                         certify: bool = True) -> GlobalResult:
    checks = global_checks(cfg)
    if certify:
        require(checks, "global existence")
    n = cfg.n_paths if n_paths is None else n_paths
    results = simulate_paths(cfg, n, seed, workers)
    return GlobalResult(summarize(results), stopping_table(results), results, checks)
