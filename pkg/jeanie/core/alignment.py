from __future__ import annotations

import math
from typing import Any, List, Sequence, Tuple

import numpy as np
import torch
from scipy.special import logsumexp

from jeanie.data.models import AlignmentCache, AlignmentConfig, AlignmentResult, FeatureMap
from jeanie.errors import InvalidArgument, InvalidState

INF = np.inf


def _as_array(d: Any) -> np.ndarray:
    if isinstance(d, torch.Tensor):
        d = d.detach().cpu().numpy()
    return np.asarray(d, dtype=np.float64)


# ============================================================
# Soft minimum
# ============================================================
def softmin_gamma(values: Sequence[float], gamma: float) -> float:
    """-gamma * log(sum(exp(-v / gamma))); +inf entries carry no mass."""
    if not gamma > 0:
        raise InvalidArgument("gamma must be > 0")
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InvalidArgument("softmin of an empty list")
    if np.any(np.isnan(arr)) or np.any(arr == -INF):
        raise InvalidArgument("softmin values must be finite or +inf")
    return float(_softmin_stack(arr, gamma))


def _softmin_stack(values: np.ndarray, gamma: float, axis: int = 0) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        return -gamma * logsumexp(-values / gamma, axis=axis)


def _softmin3(a: float, b: float, c: float, gamma: float) -> float:
    low = min(a, b, c)
    if low == INF:
        return INF
    total = math.exp(-(a - low) / gamma) + math.exp(-(b - low) / gamma) + math.exp(-(c - low) / gamma)
    return low - gamma * math.log(total)


# ============================================================
# Base distances and the distance tensor
# ============================================================
def _base_from_squared(sq: Any, cfg: AlignmentConfig) -> Any:
    if cfg.base == 'EUCLIDEAN':
        return sq
    if cfg.base == 'RBF':
        exp = torch.exp if isinstance(sq, torch.Tensor) else np.exp
        return 2.0 - 2.0 * exp(-sq / (2.0 * cfg.sigma ** 2))
    raise InvalidArgument(f"unknown base distance {cfg.base!r}")


def base_distance(x: Sequence[float], y: Sequence[float], cfg: AlignmentConfig) -> float:
    """Squared Euclidean or the squared RKHS distance of the Gaussian kernel."""
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    if xa.shape != ya.shape:
        raise InvalidArgument(f"feature length mismatch: {xa.size} vs {ya.size}")
    return float(_base_from_squared(float(np.sum((xa - ya) ** 2)), cfg))


def distance_tensor(query: FeatureMap, support: FeatureMap, cfg: AlignmentConfig) -> torch.Tensor:
    """(K, K', tau, tau') tensor, or (K, K', L, L', tau, tau') when the support has views."""
    q = query.data
    s = support.data.to(q.dtype)
    if q.shape[0] != s.shape[0]:
        raise InvalidArgument(f"feature size mismatch: {q.shape[0]} vs {s.shape[0]}")
    qf = q.permute(1, 2, 3, 0)
    sf = s.permute(1, 2, 3, 0)
    diff = qf[:, :, None, None, :, None, :] - sf[None, None, :, :, None, :, :]
    dist = _base_from_squared((diff * diff).sum(dim=-1), cfg)
    if not support.has_views:
        return dist[:, :, 0, 0]
    return dist


def relative_view_tensor(d: torch.Tensor | np.ndarray, gamma: float) -> torch.Tensor:
    """Collapse query/support view grids onto relative offsets by a soft minimum.

    Offsets run over -(eta_q + eta_s)..(eta_q + eta_s) per axis; the result is a
    (Kr, Kr', tau, tau') tensor ready for ``jeanie``.
    """
    tensor = torch.as_tensor(d, dtype=torch.float64)
    if tensor.dim() != 6:
        raise InvalidArgument("relative view tensor needs views on both sides")
    kq, kq2, ks, ks2 = tensor.shape[:4]
    out_rows: List[torch.Tensor] = []
    for ra in range(kq + ks - 1):
        row: List[torch.Tensor] = []
        for rb in range(kq2 + ks2 - 1):
            # query index minus support index, shifted to a non-negative offset
            members = [
                tensor[a, b, sa, sb]
                for a in range(kq) for sa in range(ks) if a - sa + ks - 1 == ra
                for b in range(kq2) for sb in range(ks2) if b - sb + ks2 - 1 == rb
            ]
            stacked = torch.stack(members)
            row.append(-gamma * torch.logsumexp(-stacked / gamma, dim=0))
        out_rows.append(torch.stack(row))
    return torch.stack(out_rows)


# ============================================================
# Soft-DTW
# ============================================================
def _check_matrix(d: np.ndarray) -> None:
    if d.ndim != 2 or d.size == 0:
        raise InvalidArgument(f"soft-DTW needs a non-empty 2-D matrix, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise InvalidArgument("distance matrix must be finite")


def _soft_dtw_forward(d: np.ndarray, gamma: float) -> np.ndarray:
    m, n = d.shape
    r = np.full((m + 1, n + 1), INF)
    r[0, 0] = 0.0
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            r[i, j] = d[i - 1, j - 1] + _softmin3(r[i - 1, j - 1], r[i - 1, j], r[i, j - 1], gamma)
    return r


def _soft_dtw_backward(d: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    m, n = d.shape
    e = np.zeros_like(r)
    e[m, n] = 1.0
    for i in range(m, 0, -1):
        for j in range(n, 0, -1):
            weight = e[i, j]
            if weight == 0.0:
                continue
            # soft minimum of the predecessors
            base = r[i, j] - d[i - 1, j - 1]
            for pi, pj in ((i - 1, j - 1), (i - 1, j), (i, j - 1)):
                if r[pi, pj] < INF:
                    e[pi, pj] += weight * math.exp((base - r[pi, pj]) / gamma)
    return e[1:, 1:]


def soft_dtw(d: Any, gamma: float, with_grad: bool = False) -> AlignmentResult:
    if not gamma > 0:
        raise InvalidArgument("gamma must be > 0")
    arr = _as_array(d)
    _check_matrix(arr)
    r = _soft_dtw_forward(arr, gamma)
    result = AlignmentResult(
        value=float(r[-1, -1]),
        cache=AlignmentCache(method='softdtw', d=arr.copy(), r=r, gamma=gamma),
    )
    if with_grad:
        result.grad_d = _soft_dtw_backward(arr, r, gamma)
    return result


# ============================================================
# JEANIE dynamic program
# ============================================================
class _ViewDP:
    """Joint temporal/viewpoint DP over states (origin_a, n_a, origin_b, n_b, t, t').

    Origins are indexed by shift + eta, n counts accumulated view steps (0..eta) and
    the effective view index is n - origin + 2 * eta. Axis b has size 1 for single-axis use.
    """

    def __init__(self, d: np.ndarray, gamma: float, iotas: Tuple[int, int]):
        self.d = d
        self.gamma = gamma
        self.ka, self.kb, self.tau, self.tau2 = d.shape
        self.eta_a = (self.ka - 1) // 2
        self.eta_b = (self.kb - 1) // 2
        self.iota_a = iotas[0] if self.ka > 1 else 0
        self.iota_b = iotas[1] if self.kb > 1 else 0

        view_a, valid_a = self._view_index(self.ka, self.eta_a)
        view_b, valid_b = self._view_index(self.kb, self.eta_b)
        shape = (self.ka, self.eta_a + 1, self.kb, self.eta_b + 1)
        self.view_a = np.broadcast_to(view_a[:, :, None, None], shape)
        self.view_b = np.broadcast_to(view_b[None, None, :, :], shape)
        self.valid = valid_a[:, :, None, None] & valid_b[None, None, :, :]
        # per-state base distance, (Ka, Na, Kb, Nb, tau, tau')
        deff = d[self.view_a, self.view_b]
        self.deff = np.where(self.valid[..., None, None], deff, INF)
        self.moves = [
            (ia, ib, j, k)
            for ia in range(self.iota_a + 1)
            for ib in range(self.iota_b + 1)
            for j in (0, 1)
            for k in (0, 1)
            if (ia, ib, j, k) != (0, 0, 0, 0)
        ]

    @staticmethod
    def _view_index(k: int, eta: int) -> Tuple[np.ndarray, np.ndarray]:
        origin = np.arange(k)[:, None]
        steps = np.arange(eta + 1)[None, :]
        view = steps - origin + 2 * eta
        valid = (view >= 0) & (view < k)
        return np.clip(view, 0, k - 1), valid

    def _predecessors(self, na: int, nb: int, t: int, t2: int):
        for ia, ib, j, k in self.moves:
            pa, pb = na - ia, nb - ib
            if pa < 0 or pb < 0:
                continue
            yield pa, pb, t - j, t2 - k

    def forward(self) -> Tuple[float, np.ndarray]:
        r = np.full((self.ka, self.eta_a + 1, self.kb, self.eta_b + 1, self.tau + 1, self.tau2 + 1), INF)
        r[:, 0, :, 0, 0, 0] = 0.0
        for t in range(1, self.tau + 1):
            for t2 in range(1, self.tau2 + 1):
                for na in range(self.eta_a + 1):
                    for nb in range(self.eta_b + 1):
                        cands = np.stack([r[:, pa, :, pb, pt, pt2] for pa, pb, pt, pt2 in self._predecessors(na, nb, t, t2)])
                        r[:, na, :, nb, t, t2] = self.deff[:, na, :, nb, t - 1, t2 - 1] + _softmin_stack(cands, self.gamma)
        value = float(_softmin_stack(r[..., self.tau, self.tau2].reshape(-1), self.gamma))
        return value, r

    def backward(self, r: np.ndarray, value: float) -> np.ndarray:
        e = np.zeros_like(r)
        final = r[..., self.tau, self.tau2]
        with np.errstate(invalid='ignore', over='ignore'):
            e[..., self.tau, self.tau2] = np.where(np.isfinite(final), np.exp((value - final) / self.gamma), 0.0)
        for t in range(self.tau, 0, -1):
            for t2 in range(self.tau2, 0, -1):
                for na in range(self.eta_a, -1, -1):
                    for nb in range(self.eta_b, -1, -1):
                        weight = e[:, na, :, nb, t, t2]
                        state = r[:, na, :, nb, t, t2]
                        live = np.isfinite(state) & (weight != 0.0)
                        if not live.any():
                            continue
                        with np.errstate(invalid='ignore'):
                            base = state - self.deff[:, na, :, nb, t - 1, t2 - 1]
                        for pa, pb, pt, pt2 in self._predecessors(na, nb, t, t2):
                            prev = r[:, pa, :, pb, pt, pt2]
                            ok = live & np.isfinite(prev)
                            if not ok.any():
                                continue
                            share = np.zeros_like(weight)
                            share[ok] = weight[ok] * np.exp((base[ok] - prev[ok]) / self.gamma)
                            e[:, pa, :, pb, pt, pt2] += share

        grad = np.zeros_like(self.d)
        cells = np.where(self.valid[..., None, None], e[..., 1:, 1:], 0.0)
        np.add.at(grad, (self.view_a, self.view_b), cells)
        return grad


def _check_views(d: np.ndarray, cfg: AlignmentConfig, axes: int) -> Tuple[int, int]:
    if axes not in (1, 2):
        raise InvalidArgument(f"axes must be 1 or 2, got {axes}")
    if d.ndim != 4 or 0 in d.shape:
        raise InvalidArgument(f"JEANIE needs a non-empty (K, K', tau, tau') tensor, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise InvalidArgument("distance tensor must be finite")
    ka, kb = d.shape[:2]
    if ka % 2 == 0 or kb % 2 == 0:
        raise InvalidArgument(f"view counts must be odd (2 eta + 1), got {ka} x {kb}")
    if axes == 1 and kb != 1:
        raise InvalidArgument("single-axis alignment requires K' = 1")
    iota_a, iota_b = cfg.iotas
    for k, iota, name in ((ka, iota_a, 'iota'), (kb, iota_b, 'iota_alt')):
        if k > 1 and iota > k:
            raise InvalidArgument(f"{name}={iota} exceeds the view range 2 eta + 1 = {k}")
    return iota_a, iota_b


def jeanie(d: Any, cfg: AlignmentConfig, axes: int = 2, with_grad: bool = False) -> AlignmentResult:
    arr = _as_array(d)
    iotas = _check_views(arr, cfg, axes)
    dp = _ViewDP(arr, cfg.gamma, iotas)
    value, r = dp.forward()
    result = AlignmentResult(
        value=value,
        cache=AlignmentCache(method='jeanie', d=arr.copy(), r=r, gamma=cfg.gamma, extras={'iotas': iotas}),
    )
    if with_grad:
        result.grad_d = dp.backward(r, value)
    return result


# ============================================================
# Free viewpoint matching
# ============================================================
def fvm(d: Any, gamma: float, with_grad: bool = False) -> AlignmentResult:
    """Best local view pair per (t, t') by soft minimum, followed by soft-DTW."""
    if not gamma > 0:
        raise InvalidArgument("gamma must be > 0")
    arr = _as_array(d)
    if arr.ndim != 6:
        raise InvalidArgument("FVM needs view grids on both query and support sides")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("distance tensor must be finite")
    tau, tau2 = arr.shape[-2:]
    stage = _softmin_stack(arr.reshape(-1, tau, tau2), gamma)
    inner = soft_dtw(stage, gamma)
    result = AlignmentResult(
        value=inner.value,
        cache=AlignmentCache(method='fvm', d=arr.copy(), r=inner.cache.r, gamma=gamma, extras={'stage': stage}),
    )
    if with_grad:
        result.grad_d = align_backward(result, arr)
    return result


def fvm_stage_matrix(d: Any, gamma: float) -> np.ndarray:
    arr = _as_array(d)
    return _softmin_stack(arr.reshape(-1, *arr.shape[-2:]), gamma)


# ============================================================
# Gradients
# ============================================================
def align_backward(result: AlignmentResult, d: Any) -> np.ndarray:
    """d value / d D for a result produced by soft_dtw, jeanie or fvm."""
    cache = result.cache
    if cache is None:
        raise InvalidState("alignment result carries no forward cache")
    arr = _as_array(d)
    if arr.shape != cache.d.shape or not np.array_equal(arr, cache.d):
        raise InvalidState("distance tensor differs from the one the forward pass cached")

    if cache.method == 'softdtw':
        return _soft_dtw_backward(cache.d, cache.r, cache.gamma)
    if cache.method == 'jeanie':
        dp = _ViewDP(cache.d, cache.gamma, cache.extras['iotas'])
        return dp.backward(cache.r, result.value)
    if cache.method == 'fvm':
        stage = cache.extras['stage']
        outer = _soft_dtw_backward(stage, cache.r, cache.gamma)
        weights = np.exp((stage - cache.d) / cache.gamma)
        return weights * outer
    raise InvalidState(f"unknown cached method {cache.method!r}")


# ============================================================
# torch bridge
# ============================================================
class _AlignFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, d: torch.Tensor, method: str, cfg: AlignmentConfig, axes: int) -> torch.Tensor:  # type: ignore[override]
        arr = _as_array(d)
        if method == 'jeanie':
            result = jeanie(arr, cfg, axes)
        elif method == 'softdtw':
            result = soft_dtw(arr, cfg.gamma)
        else:
            result = fvm(arr, cfg.gamma)
        ctx.result = result
        ctx.arr = arr
        return d.new_tensor(result.value)

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):  # type: ignore[override]
        grad = torch.from_numpy(align_backward(ctx.result, ctx.arr)).to(grad_output.dtype)
        return grad_output * grad, None, None, None


def aligned_distance(d: torch.Tensor, cfg: AlignmentConfig, method: str = 'jeanie', axes: int = 2) -> torch.Tensor:
    """Differentiable alignment value for a distance tensor from ``distance_tensor``.

    jeanie on a six-axis tensor aligns over relative viewpoints; softdtw uses the
    centre view pair only.
    """
    if method == 'jeanie':
        if d.dim() == 6:
            d = relative_view_tensor(d, cfg.gamma)
        return _AlignFunction.apply(d, 'jeanie', cfg, axes)
    if method == 'softdtw':
        while d.dim() > 2:
            d = d[(d.shape[0] - 1) // 2]
        return _AlignFunction.apply(d, 'softdtw', cfg, axes)
    if method == 'fvm':
        if d.dim() == 4:
            d = d[:, :, None, None]
        return _AlignFunction.apply(d, 'fvm', cfg, axes)
    raise InvalidArgument(f"unknown alignment method {method!r}")


def align_features(query: FeatureMap, support: FeatureMap, cfg: AlignmentConfig, method: str = 'jeanie', axes: int = 2) -> float:
    with torch.no_grad():
        d = distance_tensor(query, support, cfg)
    return float(aligned_distance(d, cfg, method, axes))


__all__ = [
    "align_backward",
    "align_features",
    "aligned_distance",
    "base_distance",
    "distance_tensor",
    "fvm",
    "fvm_stage_matrix",
    "jeanie",
    "relative_view_tensor",
    "soft_dtw",
    "softmin_gamma",
]
