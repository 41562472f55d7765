"""Exhaustive path enumeration used as ground truth for the alignment DPs."""
from __future__ import annotations

from functools import lru_cache
from typing import Any, Iterator, List, Tuple

import numpy as np
from scipy.special import logsumexp

from jeanie.config import APP_CONFIG
from jeanie.data.models import AlignmentConfig
from jeanie.errors import InvalidArgument, ResourceLimit

# (view_a, view_b, t, t') with 0-based temporal indices
Cell = Tuple[int, int, int, int]


def _setup(shape: Tuple[int, ...], iotas: Tuple[int, int]):
    if len(shape) != 4:
        raise InvalidArgument(f"expected a (K, K', tau, tau') shape, got {shape}")
    ka, kb, tau, tau2 = (int(v) for v in shape)
    eta_a, eta_b = (ka - 1) // 2, (kb - 1) // 2
    iota_a = iotas[0] if ka > 1 else 0
    iota_b = iotas[1] if kb > 1 else 0
    moves = [
        (ia, ib, j, k)
        for ia in range(iota_a + 1)
        for ib in range(iota_b + 1)
        for j in (0, 1)
        for k in (0, 1)
        if (ia, ib, j, k) != (0, 0, 0, 0)
    ]
    return ka, kb, tau, tau2, eta_a, eta_b, moves


def _successors(state, origin, dims, moves):
    """Next admissible states; a state is (steps_a, steps_b, t, t') with 1-based t."""
    ka, kb, tau, tau2, eta_a, eta_b = dims
    na, nb, t, t2 = state
    oa, ob = origin
    for ia, ib, j, k in moves:
        nxt = (na + ia, nb + ib, t + j, t2 + k)
        if nxt[0] > eta_a or nxt[1] > eta_b:
            continue
        if not (1 <= nxt[2] <= tau and 1 <= nxt[3] <= tau2):
            continue
        # shift origin selects the first view; steps only move forward
        va, vb = nxt[0] - oa, nxt[1] - ob
        if abs(va) > eta_a or abs(vb) > eta_b:
            continue
        yield nxt


def count_admissible_paths(shape: Tuple[int, ...], iotas: Tuple[int, int]) -> int:
    ka, kb, tau, tau2, eta_a, eta_b, moves = _setup(shape, iotas)
    dims = (ka, kb, tau, tau2, eta_a, eta_b)
    total = 0
    for oa in range(-eta_a, eta_a + 1):
        for ob in range(-eta_b, eta_b + 1):
            origin = (oa, ob)

            @lru_cache(maxsize=None)
            def paths_from(state: Tuple[int, int, int, int]) -> int:
                ends_here = int(state[2] == tau and state[3] == tau2)
                return ends_here + sum(paths_from(nxt) for nxt in _successors(state, origin, dims, moves))

            total += paths_from((0, 0, 0, 0))
    return total


def iter_admissible_paths(shape: Tuple[int, ...], iotas: Tuple[int, int]) -> Iterator[List[Cell]]:
    """Yield every admissible path as its list of visited (view_a, view_b, t, t') cells."""
    ka, kb, tau, tau2, eta_a, eta_b, moves = _setup(shape, iotas)
    dims = (ka, kb, tau, tau2, eta_a, eta_b)
    for oa in range(-eta_a, eta_a + 1):
        for ob in range(-eta_b, eta_b + 1):
            origin = (oa, ob)
            stack: List[Tuple[Tuple[int, int, int, int], List[Cell]]] = [((0, 0, 0, 0), [])]
            while stack:
                state, cells = stack.pop()
                for nxt in _successors(state, origin, dims, moves):
                    cell = (nxt[0] - oa + eta_a, nxt[1] - ob + eta_b, nxt[2] - 1, nxt[3] - 1)
                    path = cells + [cell]
                    if nxt[2] == tau and nxt[3] == tau2:
                        yield path
                    stack.append((nxt, path))


def path_costs(d: Any, iotas: Tuple[int, int]) -> np.ndarray:
    arr = np.asarray(d, dtype=np.float64)
    costs = [sum(arr[cell] for cell in path) for path in iter_admissible_paths(arr.shape, iotas)]
    return np.asarray(costs, dtype=np.float64)


def brute_force_align(d: Any, cfg: AlignmentConfig, axes: int = 2) -> float:
    arr = np.asarray(d, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, None]
    if axes == 1 and arr.shape[1] != 1:
        raise InvalidArgument("single-axis alignment requires K' = 1")
    limit = int(APP_CONFIG['MAX_ORACLE_PATHS'])
    count = count_admissible_paths(arr.shape, cfg.iotas)
    if count >= limit:
        raise ResourceLimit(f"{count} admissible paths exceed the enumeration limit {limit}")
    costs = path_costs(arr, cfg.iotas)
    return float(-cfg.gamma * logsumexp(-costs / cfg.gamma))


def hard_min_cost(d: Any, iotas: Tuple[int, int]) -> Tuple[float, int]:
    """Cheapest admissible path cost and how many paths attain it."""
    costs = path_costs(d if np.ndim(d) == 4 else np.asarray(d)[None, None], iotas)
    best = float(costs.min())
    return best, int(np.sum(np.isclose(costs, best, rtol=0.0, atol=1e-12)))


__all__ = [
    "brute_force_align",
    "count_admissible_paths",
    "hard_min_cost",
    "iter_admissible_paths",
    "path_costs",
]
