"""Heatmap-guided Monte Carlo tree search over k-opt moves.

The solver keeps an edge weight matrix W (initialized from the heatmap), an
access count matrix Q, and a move counter M. Candidate moves are directed
break/reconnect chains: starting from a random city, the tour is opened into
a path and repeatedly rewired toward the candidate neighbor with the highest
potential

    Z_ij = W_ij / Omega_i + alpha * sqrt(ln(M + 1) / (Q_ij + 1)),

then closed back into a cycle. Improving moves are applied and reinforce the
weights of their new edges; non-improving rounds restart from a freshly
sampled tour while the best tour found so far is retained.

Chains are encoded on a path array where every reconnection is a prefix
reversal, so intermediate states are always Hamiltonian paths and no
reconnection can disconnect the tour.

W and Q live only on candidate edges: reconnections always target candidate
neighbors, and the bookkeeping after an accepted move skips the occasional
non-candidate closing edge so the invariant survives.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .heatmaps import Heatmap
from .instances import DistanceMatrix, Instance, RankTable
from .tours import SolveResult, Tour

#: Lower bound kept on every candidate-edge weight so row sums stay positive.
W_FLOOR = 1e-6


class DegenerateRowError(ValueError):
    """Raised when a city's weight row sums to zero (no usable candidates)."""


@dataclass(frozen=True)
class MctsParams:
    """Solver hyperparameters; defaults follow the conventional settings."""

    alpha: float = 1.0
    beta: float = 10.0
    max_depth: int = 10
    max_candidate_num: int = 1000
    param_h: int = 10
    use_heatmap: bool = True
    time_limit_factor: float = 0.1

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        for name in ("max_depth", "max_candidate_num", "param_h"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.time_limit_factor <= 0:
            raise ValueError("time_limit_factor must be positive")


@dataclass(frozen=True)
class Move:
    """A k-opt move: the rewired tour, its exact length change, edge diff."""

    new_order: np.ndarray
    delta: float
    added: tuple[tuple[int, int], ...]
    removed: tuple[tuple[int, int], ...]

    @property
    def k(self) -> int:
        return len(self.removed)


@dataclass
class MctsState:
    """Mutable search state owned by a single solver run.

    The per-row Python lists (``cand_list``, ``wrow``, ``qinv``, ``omega``)
    mirror W and Q on candidate edges for the hot sampling loop; they are
    kept in sync eagerly by the mutators below.
    """

    n: int
    d: np.ndarray
    ranks: RankTable
    params: MctsParams
    rng: np.random.Generator
    W: np.ndarray
    Q: np.ndarray
    M: int
    candidates: list[np.ndarray]
    cand_exp: list[np.ndarray]  # exp(P_ij) aligned with candidates[i]
    cand_list: list[list[int]]
    cand_pos: list[dict[int, int]]
    wrow: list[list[float]]
    qinv: list[list[float]]
    omega: list[float]
    best_order: Optional[np.ndarray] = None
    best_length: float = math.inf
    restarts: int = 0
    simulations: int = 0


def init_state(
    inst: Instance,
    dm: DistanceMatrix,
    ranks: RankTable,
    hm: Heatmap,
    params: MctsParams,
    seed: int,
) -> MctsState:
    """Build candidate sets and initialize W = 100 * P on candidate edges.

    Candidates are the ``max_candidate_num`` neighbors with the highest
    heatmap probability (ties and absent entries fall back to ascending
    distance); with ``use_heatmap`` off they are simply the nearest
    neighbors. Candidate edges whose heatmap value is zero get weight 1.0
    so that every weight row keeps positive mass.
    """
    n = inst.n
    if hm.n != n or dm.n != n or ranks.n != n:
        raise ValueError(f"dimension mismatch: instance n={n}, heatmap n={hm.n}, dm n={dm.n}")
    mcn = min(params.max_candidate_num, n - 1)
    d = dm.entries.astype(np.float64)
    prob_rows = [dict(hm.row(i)) for i in range(n)]
    candidates: list[np.ndarray] = []
    cand_exp: list[np.ndarray] = []
    W = np.zeros((n, n))
    for i in range(n):
        by_distance = ranks.row(i)
        if params.use_heatmap:
            p = np.array([prob_rows[i].get(int(j), 0.0) for j in by_distance])
            chosen = by_distance[np.argsort(-p, kind="stable")][:mcn]
        else:
            chosen = by_distance[:mcn]
        chosen = np.array(chosen, dtype=np.int32)
        candidates.append(chosen)
        cand_exp.append(np.exp(np.array([prob_rows[i].get(int(j), 0.0) for j in chosen])))
        for j in chosen:
            p_edge = max(prob_rows[i].get(int(j), 0.0), prob_rows[int(j)].get(i, 0.0))
            w = 100.0 * p_edge if p_edge > 0.0 else 1.0
            W[i, j] = w
            W[j, i] = w
    cand_list = [c.tolist() for c in candidates]
    cand_pos = [{j: t for t, j in enumerate(row)} for row in cand_list]
    wrow = [W[i, candidates[i]].tolist() for i in range(n)]
    qinv = [[1.0] * len(row) for row in cand_list]  # 1/sqrt(Q+1) with Q = 0
    omega = W.sum(axis=1).tolist()
    return MctsState(
        n=n,
        d=d,
        ranks=ranks,
        params=params,
        rng=np.random.default_rng(seed),
        W=W,
        Q=np.zeros((n, n), dtype=np.int64),
        M=0,
        candidates=candidates,
        cand_exp=cand_exp,
        cand_list=cand_list,
        cand_pos=cand_pos,
        wrow=wrow,
        qinv=qinv,
        omega=omega,
    )


def is_candidate_edge(state: MctsState, i: int, j: int) -> bool:
    return j in state.cand_pos[i] or i in state.cand_pos[j]


def _set_weight(state: MctsState, i: int, j: int, w: float) -> None:
    """Symmetric weight write that keeps omega and the row caches in sync."""
    old = float(state.W[i, j])
    state.W[i, j] = w
    state.W[j, i] = w
    state.omega[i] += w - old
    state.omega[j] += w - old
    t = state.cand_pos[i].get(j)
    if t is not None:
        state.wrow[i][t] = w
    t = state.cand_pos[j].get(i)
    if t is not None:
        state.wrow[j][t] = w


def _bump_access(state: MctsState, i: int, j: int) -> None:
    state.Q[i, j] += 1
    state.Q[j, i] += 1
    inv = 1.0 / math.sqrt(state.Q[i, j] + 1.0)
    t = state.cand_pos[i].get(j)
    if t is not None:
        state.qinv[i][t] = inv
    t = state.cand_pos[j].get(i)
    if t is not None:
        state.qinv[j][t] = inv


def potential(state: MctsState, i: int, j: int) -> float:
    """The UCB-style edge potential Z_ij (defined for candidate edges)."""
    omega = float(state.W[i].sum())
    if omega <= 0.0:
        raise DegenerateRowError(f"weight row {i} sums to zero")
    explore = math.sqrt(math.log(state.M + 1) / (state.Q[i, j] + 1))
    return float(state.W[i, j]) / omega + state.params.alpha * explore


def sample_initial_tour(state: MctsState) -> Tour:
    """Grow a tour from a random start, sampling successors by exp(P_ij).

    When no unvisited candidate remains the nearest unvisited city is used,
    which guarantees completion.
    """
    n = state.n
    rng = state.rng
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int32)
    current = int(rng.integers(n))
    order[0] = current
    visited[current] = True
    for t in range(1, n):
        cands = state.candidates[current]
        open_mask = ~visited[cands]
        if open_mask.any():
            choices = cands[open_mask]
            cum = np.cumsum(state.cand_exp[current][open_mask])
            nxt = int(choices[np.searchsorted(cum, rng.random() * cum[-1], side="right")])
        else:
            by_distance = state.ranks.row(current)
            nxt = int(by_distance[~visited[by_distance]][0])
        order[t] = nxt
        visited[nxt] = True
        current = nxt
    length = float(state.d[order, np.roll(order, -1)].sum())
    tour = Tour(order=order, length=length)
    if length < state.best_length:
        state.best_order = np.array(order)
        state.best_length = length
    return tour


def _sample_chain(
    state: MctsState, order_list: list[int], ia: int, a: int, break_succ: bool
) -> Optional[tuple[float, list[int], list[tuple[int, int]], list[tuple[int, int]]]]:
    """Run one greedy break/reconnect chain from city ``a``.

    Opens the tour at one of a's edges, repeatedly reconnects the path head
    to its best-potential candidate (the break at the chosen city is forced,
    making the step a prefix reversal), and evaluates closing the path back
    to ``a`` after every reconnection. Returns the best closing found as
    (delta, order, added, removed), or None if no valid reconnection exists.
    """
    n = state.n
    d = state.d
    # Path from the freed neighbor back to a, walking away from the cut.
    if break_succ:
        path = order_list[ia + 1 :] + order_list[: ia + 1]
    else:
        rev = order_list[::-1]
        k = n - ia
        path = rev[k:] + rev[:k]
    b1 = path[0]
    path_pos = [0] * n
    for t, city in enumerate(path):
        path_pos[city] = t
    removed: list[tuple[int, int]] = [(a, b1)]
    added: list[tuple[int, int]] = []
    removed_sum = float(d[a, b1])
    added_sum = 0.0
    sl = state.params.alpha * math.sqrt(math.log(state.M + 1))
    best: Optional[tuple[float, list[int], list, list]] = None
    for _ in range(state.params.max_depth):
        head = path[0]
        p1 = path[1]
        cands = state.cand_list[head]
        wr = state.wrow[head]
        qi = state.qinv[head]
        om = state.omega[head]
        if om <= 0.0:
            raise DegenerateRowError(f"weight row {head} sums to zero")
        inv_om = 1.0 / om
        best_z = -math.inf
        target = -1
        # Exploration term drops out entirely at M=0 or alpha=0.
        if sl > 0.0:
            for t in range(len(cands)):
                j = cands[t]
                if j == a or j == p1:
                    continue
                z = wr[t] * inv_om + sl * qi[t]
                if z > best_z or (z == best_z and j < target):
                    best_z = z
                    target = j
        else:
            for t in range(len(cands)):
                j = cands[t]
                if j == a or j == p1:
                    continue
                z = wr[t] * inv_om
                if z > best_z or (z == best_z and j < target):
                    best_z = z
                    target = j
        if target < 0:
            break
        idx = path_pos[target]
        b_next = path[idx - 1]
        added.append((head, target))
        removed.append((target, b_next))
        added_sum += float(d[head, target])
        removed_sum += float(d[target, b_next])
        path[:idx] = path[idx - 1 :: -1]
        for t in range(idx):
            path_pos[path[t]] = t
        close_delta = added_sum + float(d[path[0], a]) - removed_sum
        if best is None or close_delta < best[0]:
            best = (close_delta, path.copy(), added + [(path[0], a)], removed.copy())
    return best


def generate_kopt_move(state: MctsState, tour: Tour) -> Optional[Move]:
    """Sample ``param_h`` chains from random start cities; keep the best.

    Each simulation draws one value that decides both the start city and
    which of its two tour edges is broken first.
    """
    n = state.n
    order_list = [int(v) for v in tour.order]
    pos = [0] * n
    for t, city in enumerate(order_list):
        pos[city] = t
    best: Optional[tuple[float, list[int], list, list]] = None
    for _ in range(state.params.param_h):
        state.simulations += 1
        draw = int(state.rng.integers(2 * n))
        a = draw >> 1
        chain = _sample_chain(state, order_list, pos[a], a, bool(draw & 1))
        if chain is not None and (best is None or chain[0] < best[0]):
            best = chain
    if best is None:
        return None
    delta, new_order, add_edges, rem_edges = best
    return Move(
        new_order=np.array(new_order, dtype=np.int32),
        delta=delta,
        added=tuple(add_edges),
        removed=tuple(rem_edges),
    )


def weight_update(state: MctsState, i: int, j: int, l_old: float, l_new: float) -> None:
    """Reinforce edge (i, j) by beta * (exp((L - L') / L) - 1), floored."""
    if l_old <= 0:
        raise ValueError("weight_update needs a positive previous length")
    increment = state.params.beta * math.expm1((l_old - l_new) / l_old)
    _set_weight(state, i, j, max(float(state.W[i, j]) + increment, W_FLOOR))


def accept_or_restart(state: MctsState, tour: Tour, move: Optional[Move]) -> Tour:
    """Apply an improving move (with bookkeeping) or restart from a sample."""
    if move is not None and move.delta < 0.0:
        assert len(set(move.new_order.tolist())) == state.n, "move broke the permutation"
        new_length = tour.length + move.delta
        state.M += 1
        for i, j in move.removed + move.added:
            if is_candidate_edge(state, i, j):
                _bump_access(state, i, j)
        for i, j in move.added:
            if is_candidate_edge(state, i, j):
                weight_update(state, i, j, tour.length, new_length)
        new_tour = Tour(order=move.new_order, length=new_length)
        if new_length < state.best_length:
            state.best_order = np.array(move.new_order)
            state.best_length = new_length
        return new_tour
    state.restarts += 1
    return sample_initial_tour(state)


def solve(
    inst: Instance,
    dm: DistanceMatrix,
    ranks: RankTable,
    hm: Heatmap,
    params: MctsParams,
    seed: int = 0,
    max_iters: int | None = None,
) -> SolveResult:
    """Run the improve/restart loop under a wall-clock or simulation budget.

    With ``max_iters`` unset the budget is ``time_limit_factor * n`` seconds
    of wall time. Otherwise the run stops once ``max_iters`` k-opt chain
    simulations have been spent, which makes results bit-reproducible for a
    fixed seed regardless of machine speed.
    """
    start = time.monotonic()
    state = init_state(inst, dm, ranks, hm, params, seed)
    tour = sample_initial_tour(state)
    if max_iters is None:
        deadline = start + params.time_limit_factor * inst.n

        def budget_left() -> bool:
            return time.monotonic() < deadline

    else:

        def budget_left() -> bool:
            return state.simulations < max_iters

    while budget_left():
        move = generate_kopt_move(state, tour)
        tour = accept_or_restart(state, tour, move)
    best = Tour(order=state.best_order, length=state.best_length)
    return SolveResult(
        best_tour=best,
        wall_time=time.monotonic() - start,
        restarts=state.restarts,
        moves_accepted=state.M,
        simulations=state.simulations,
    )
