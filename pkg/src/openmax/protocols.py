"""Synchronous extremum-consensus updates over open networks.

Two protocol variants, each with a max and a min mode:

* approximate: every agent keeps one scalar per input coordinate and applies
  ``new = max(neighborhood max - alpha, own input)`` (min mode adds ``alpha``
  and takes minima).  The decay ``alpha`` lets stale values fade after the
  extremum holder leaves, at the price of a steady-state offset.
* exact: every agent keeps a cascade of ``delta + 1`` levels.  Level 0 loads
  the agent's current input and level ``l`` takes the neighborhood extremum
  of level ``l - 1``, so the top level reproduces the extremum of the inputs
  ``delta + 1`` ticks ago exactly whenever ``delta`` is at least the graph
  diameter.

All updates are synchronous: a tick's new states are computed entirely from
the previous tick's states.  States are ``float`` values for the approximate
variant and ``numpy`` arrays of shape ``(delta + 1,)`` for the exact one; any
coordinate axis appended to those shapes is carried through elementwise, which
is how many independent consensus instances share one network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .graph import NetworkSnapshot, induced_subgraph, partition_nodes

__all__ = [
    "ProtocolParams",
    "State",
    "init_agent",
    "resume_agent",
    "output",
    "admc_step",
    "admc_min_step",
    "edmc_step",
    "edmc_min_step",
    "step",
    "open_step",
]

State = Union[float, np.ndarray]


@dataclass(frozen=True)
class ProtocolParams:
    """Validated protocol selection: mode, variant, and tuning constants."""

    mode: str
    variant: str
    alpha: float | None = None
    delta: int | None = None
    read_departing: bool = True

    def __post_init__(self) -> None:
        if self.mode not in ("max", "min"):
            raise ValueError(f"mode must be 'max' or 'min', got {self.mode!r}")
        if self.variant not in ("approximate", "exact"):
            raise ValueError(
                f"variant must be 'approximate' or 'exact', got {self.variant!r}"
            )
        if self.variant == "approximate":
            if self.alpha is None:
                raise ValueError("the approximate variant needs a decay alpha")
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
            if self.delta is not None:
                raise ValueError("delta applies only to the exact variant")
        else:
            if self.delta is None:
                raise ValueError("the exact variant needs a cascade depth delta")
            if int(self.delta) != self.delta or self.delta < 0:
                raise ValueError(f"delta must be a nonnegative integer, got {self.delta}")
            object.__setattr__(self, "delta", int(self.delta))
            if self.alpha is not None:
                raise ValueError("alpha applies only to the approximate variant")


def _check_cover(g: NetworkSnapshot, x: Mapping[int, State], u: Mapping[int, object]) -> None:
    for i in g.sorted_nodes:
        if i not in x:
            raise KeyError(f"missing state for agent {i}")
        if i not in u:
            raise KeyError(f"missing input for agent {i}")


def _check_cascades(g: NetworkSnapshot, x: Mapping[int, State]) -> None:
    shape = None
    for i in g.sorted_nodes:
        arr = x[i]
        if not isinstance(arr, np.ndarray) or arr.ndim < 1:
            raise TypeError(f"agent {i} state is not a cascade array")
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ValueError(
                f"cascade shape mismatch: agent {i} has {arr.shape}, expected {shape}"
            )


def init_agent(params: ProtocolParams, u_now: object) -> State:
    """State of an agent that joins (or starts) with input ``u_now``."""
    if params.variant == "approximate":
        arr = np.asarray(u_now, dtype=float)
        return float(arr) if arr.ndim == 0 else arr.copy()
    arr = np.asarray(u_now, dtype=float)
    return np.broadcast_to(arr, (params.delta + 1, *arr.shape)).copy()


def resume_agent(params: ProtocolParams, x_prior: object, u_now: object) -> State:
    """State of an agent resuming from a prescribed output value.

    Used when a run starts mid-stream from given state values rather than
    from the inputs.  For the exact variant, level 0 always holds the current
    input; the remaining levels carry the prescribed value.
    """
    if params.variant == "approximate":
        arr = np.asarray(x_prior, dtype=float)
        return float(arr) if arr.ndim == 0 else arr.copy()
    x_arr = np.asarray(x_prior, dtype=float)
    state = np.broadcast_to(x_arr, (params.delta + 1, *x_arr.shape)).copy()
    state[0] = np.asarray(u_now, dtype=float)
    return state


def output(params: ProtocolParams, state: State) -> object:
    """The value an agent exposes: its scalar state, or the cascade's top level."""
    if params.variant == "approximate":
        return state
    top = state[-1]
    return float(top) if np.ndim(top) == 0 else top


def admc_step(
    g: NetworkSnapshot,
    x: Mapping[int, State],
    u: Mapping[int, object],
    alpha: float,
) -> dict[int, State]:
    """One synchronous approximate max step on a fixed snapshot."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    _check_cover(g, x, u)
    new: dict[int, State] = {}
    for i in g.sorted_nodes:
        xi = x[i]
        if isinstance(xi, float):
            best = xi
            for j in g.adjacency[i]:
                xj = x[j]
                if xj > best:
                    best = xj
            decayed = best - alpha
            ui = u[i]
            new[i] = ui if ui > decayed else decayed
        else:
            best = xi
            for j in g.adjacency[i]:
                best = np.maximum(best, x[j])
            new[i] = np.maximum(best - alpha, u[i])
    return new


def admc_min_step(
    g: NetworkSnapshot,
    x: Mapping[int, State],
    u: Mapping[int, object],
    alpha: float,
) -> dict[int, State]:
    """One synchronous approximate min step; mirror image of :func:`admc_step`."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    _check_cover(g, x, u)
    new: dict[int, State] = {}
    for i in g.sorted_nodes:
        xi = x[i]
        if isinstance(xi, float):
            worst = xi
            for j in g.adjacency[i]:
                xj = x[j]
                if xj < worst:
                    worst = xj
            grown = worst + alpha
            ui = u[i]
            new[i] = ui if ui < grown else grown
        else:
            worst = xi
            for j in g.adjacency[i]:
                worst = np.minimum(worst, x[j])
            new[i] = np.minimum(worst + alpha, u[i])
    return new


def edmc_step(
    g: NetworkSnapshot,
    x: Mapping[int, State],
    u: Mapping[int, object],
) -> dict[int, State]:
    """One synchronous exact max step: shift the cascade, load the input."""
    _check_cover(g, x, u)
    _check_cascades(g, x)
    new: dict[int, State] = {}
    for i in g.sorted_nodes:
        own = x[i]
        agg = own[:-1]
        for j in g.adjacency[i]:
            agg = np.maximum(agg, x[j][:-1])
        arr = np.empty_like(own)
        arr[0] = np.asarray(u[i], dtype=float)
        arr[1:] = agg
        new[i] = arr
    return new


def edmc_min_step(
    g: NetworkSnapshot,
    x: Mapping[int, State],
    u: Mapping[int, object],
) -> dict[int, State]:
    """One synchronous exact min step; mirror image of :func:`edmc_step`."""
    _check_cover(g, x, u)
    _check_cascades(g, x)
    new: dict[int, State] = {}
    for i in g.sorted_nodes:
        own = x[i]
        agg = own[:-1]
        for j in g.adjacency[i]:
            agg = np.minimum(agg, x[j][:-1])
        arr = np.empty_like(own)
        arr[0] = np.asarray(u[i], dtype=float)
        arr[1:] = agg
        new[i] = arr
    return new


def step(
    params: ProtocolParams,
    g: NetworkSnapshot,
    x: Mapping[int, State],
    u: Mapping[int, object],
) -> dict[int, State]:
    """Dispatch one closed-network step for the selected variant and mode."""
    if params.variant == "approximate":
        if params.mode == "max":
            return admc_step(g, x, u, params.alpha)
        return admc_min_step(g, x, u, params.alpha)
    if params.mode == "max":
        return edmc_step(g, x, u)
    return edmc_min_step(g, x, u)


def open_step(
    params: ProtocolParams,
    g_now: NetworkSnapshot,
    g_next: NetworkSnapshot,
    x: Mapping[int, State],
    u_now: Mapping[int, object],
    u_next: Mapping[int, object],
) -> dict[int, State]:
    """One step across a possible membership change.

    Remaining agents update on the current snapshot; by default they still
    read the last states of departing neighbors (set ``read_departing=False``
    on the params to exclude them).  Arriving agents start from their own
    next-tick input and read nobody this tick.
    """
    part = partition_nodes(g_now.nodes, g_next.nodes)
    base_graph = g_now
    if not params.read_departing and part.departing:
        base_graph = induced_subgraph(g_now, g_now.nodes - part.departing)
    base = step(params, base_graph, x, u_now)
    new: dict[int, State] = {}
    for i in sorted(part.remaining):
        new[i] = base[i]
    for i in sorted(part.arriving):
        if i not in u_next:
            raise KeyError(f"missing input for arriving agent {i}")
        new[i] = init_agent(params, u_next[i])
    return new
