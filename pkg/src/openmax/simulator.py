"""Declarative scenario runs over open networks.

A scenario bundles a topology, an optional membership-churn schedule, the
protocol selection, and either a bank of reference signals (consensus runs)
or a size-estimation setup.  Loading resolves every random choice up front,
so a (config, seed) pair fully determines each trace byte.

Randomness is split into named streams derived from the root seed, so that
changing one randomized aspect leaves the others untouched:

====================  =========================================
stream                derivation
====================  =========================================
topology growth       ``SeedSequence((seed, 0))``
churn subsets         ``SeedSequence((seed, 1))``
size-estimation draws ``SeedSequence((seed, 2))``
signal construction   ``SeedSequence((seed, 3))``
worst-case trials     integer derived from ``SeedSequence((seed, 4))``
====================  =========================================

Tick convention: inputs are sampled at tick ``k``, the step produces the
states for ``k + 1``, and the error at ``k`` is measured against the input
extremum at ``k``.  A membership change scheduled at tick ``c`` means the new
snapshot is in effect from tick ``c`` on, so windows are the half-open spans
between change ticks.  Within one batch of churn events the change counts as
a single network change for dwell-time accounting.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .bounds import (
    AssumptionViolation,
    BoundsReport,
    admc_bounds,
    admc_min_bounds,
    audit_window,
    edmc_bounds,
)
from .graph import (
    ChurnEvent,
    NetworkSnapshot,
    apply_churn,
    barabasi_albert,
    diameter,
    induced_subgraph,
    is_connected,
    line_graph,
    snapshot_from_text,
    snapshot_to_text,
)
from .protocols import ProtocolParams, init_agent, open_step, output, resume_agent
from .signals import SignalBank, build_spec, certify_slope, sample
from .size_estimation import (
    dse_generate,
    dse_worst_case_monte_carlo,
    expected_estimate_admc,
    expected_estimate_edmc,
    mle_estimate,
)

__all__ = [
    "ScenarioError",
    "RunExecutionError",
    "ConnectivityLost",
    "DseConfig",
    "TraceOptions",
    "ChurnChange",
    "Window",
    "Scenario",
    "ErrorTrace",
    "DseTrace",
    "RunResult",
    "make_scenario",
    "scenario_from_mapping",
    "load_scenario",
    "load_scenario_file",
    "list_presets",
    "load_preset",
    "run",
    "run_size_estimation",
    "write_outputs",
]


class ScenarioError(ValueError):
    """The scenario description is malformed or internally inconsistent."""


class RunExecutionError(RuntimeError):
    """A run had to abort; the message carries the tick context."""


class ConnectivityLost(RunExecutionError):
    """A window's snapshot is disconnected, so extrema cannot propagate."""


@dataclass(frozen=True)
class DseConfig:
    """Size-estimation setup: coordinates per agent and worst-case trial count."""

    p: int
    mc_trials: int = 2000

    def __post_init__(self) -> None:
        if int(self.p) != self.p or self.p < 2:
            raise ScenarioError(f"the coordinate count p must be an integer >= 2, got {self.p}")
        if int(self.mc_trials) != self.mc_trials or self.mc_trials < 1:
            raise ScenarioError(f"mc_trials must be a positive integer, got {self.mc_trials}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "mc_trials", int(self.mc_trials))


@dataclass(frozen=True)
class TraceOptions:
    """Which artifacts a run writes: the per-agent trace CSV and the plot data."""

    csv: bool = True
    plotdata: bool = True


@dataclass(frozen=True)
class ChurnChange:
    """One batched membership change: the tick, its events, the resulting set."""

    tick: int
    events: tuple[ChurnEvent, ...]
    active: frozenset[int]


@dataclass(frozen=True)
class Window:
    """Span of ticks with a fixed snapshot; ``end`` is inclusive."""

    start: int
    end: int
    graph: NetworkSnapshot


@dataclass(frozen=True, eq=False)
class Scenario:
    """Fully resolved run description; every random choice is already made."""

    name: str
    kind: str
    params: ProtocolParams
    reference: NetworkSnapshot
    insertion_order: tuple[int, ...]
    horizon: int
    dwell: int
    seed: int
    slope_bound: float
    changes: tuple[ChurnChange, ...]
    windows: tuple[Window, ...]
    bank: SignalBank | None = None
    dse: DseConfig | None = None
    initial_states: dict[int, float] | None = None
    trace: TraceOptions = field(default=TraceOptions())

    def graph_at(self, tick: int) -> NetworkSnapshot:
        for w in reversed(self.windows):
            if tick >= w.start:
                return w.graph
        raise ValueError(f"tick {tick} precedes the first window")


@dataclass(frozen=True, eq=False)
class ErrorTrace:
    """Tick-indexed record of a consensus run.

    ``outputs[k]`` and ``inputs[k]`` map each active agent to its exposed
    state and its reference value at tick ``k``; ``targets[k]`` is the input
    extremum over the active set and ``errors[k]`` the worst absolute
    deviation from it.
    """

    ticks: np.ndarray
    errors: np.ndarray
    targets: np.ndarray
    n_active: np.ndarray
    outputs: tuple[dict[int, float], ...]
    inputs: tuple[dict[int, float], ...]


@dataclass(frozen=True, eq=False)
class DseTrace:
    """Tick-indexed record of a size-estimation run.

    ``estimates[k]`` maps each active agent to its size estimate;
    ``target_estimates[k]`` is the estimate an agent holding the exact
    per-coordinate maxima would produce, and ``errors[k]`` the worst
    per-coordinate consensus deviation from those maxima.
    """

    ticks: np.ndarray
    errors: np.ndarray
    true_sizes: np.ndarray
    target_estimates: np.ndarray
    estimates: tuple[dict[int, float], ...]


@dataclass(frozen=True, eq=False)
class RunResult:
    scenario: Scenario
    trace: ErrorTrace | DseTrace
    summary: dict


# ---------------------------------------------------------------------------
# scenario assembly


def _as_int(value: object, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{what} must be an integer, got {value!r}")
    return int(value)


def _reference_incident(reference: NetworkSnapshot, node: int) -> frozenset[tuple[int, int]]:
    return frozenset(e for e in reference.edges if node in e)


def make_scenario(
    *,
    name: str,
    kind: str,
    params: ProtocolParams,
    reference: NetworkSnapshot,
    horizon: int,
    seed: int,
    changes: Sequence[tuple[int, Iterable[int]]] = (),
    dwell: int | None = None,
    bank: SignalBank | None = None,
    dse: DseConfig | None = None,
    initial_states: Mapping[int, float] | None = None,
    insertion_order: Sequence[int] | None = None,
    trace: TraceOptions = TraceOptions(),
    declared_slope: float | None = None,
) -> Scenario:
    """Validate and assemble a scenario from already-built parts.

    ``changes`` lists ``(tick, active node set)`` pairs; the events of each
    change are derived against the previous active set, with reactivated
    nodes restoring their incident edges from the reference topology.  All
    dwell-spacing, connectivity, coverage, and tuning checks happen here, so
    config loading and programmatic construction share one gatekeeper.
    """
    if kind not in ("consensus", "size_estimation"):
        raise ScenarioError(f"kind must be 'consensus' or 'size_estimation', got {kind!r}")
    horizon = _as_int(horizon, "horizon")
    if horizon < 1:
        raise ScenarioError(f"horizon must be at least 1 tick, got {horizon}")
    seed = _as_int(seed, "seed")
    if seed < 0:
        raise ScenarioError("seed must be a nonnegative integer")

    order = tuple(insertion_order) if insertion_order is not None else reference.sorted_nodes
    if frozenset(order) != reference.nodes:
        raise ScenarioError("insertion order must list exactly the reference nodes")

    ticks = [_as_int(t, "change tick") for t, _ in changes]
    if any(b <= a for a, b in zip(ticks, ticks[1:])):
        raise ScenarioError("change ticks must be strictly increasing")
    if ticks and (ticks[0] < 1 or ticks[-1] > horizon):
        raise ScenarioError("change ticks must lie in [1, horizon]")

    if dwell is None:
        spans = [b - a for a, b in zip([0] + ticks, ticks)]
        dwell = min(spans) if spans else horizon
    dwell = _as_int(dwell, "dwell")
    if dwell < 1:
        raise ScenarioError(f"dwell must be at least 1 tick, got {dwell}")
    prev = 0
    for t in ticks:
        if t - prev < dwell:
            raise AssumptionViolation(
                f"changes at ticks {prev} and {t} are {t - prev} apart, closer than "
                f"the dwell time {dwell}"
            )
        prev = t

    # Realize the window snapshots by replaying the derived churn events.
    realized: list[ChurnChange] = []
    graphs = [reference]
    current = reference
    for (tick, active_raw) in changes:
        active = frozenset(int(v) for v in active_raw)
        if not active:
            raise ScenarioError(f"change at tick {tick} would empty the network")
        unknown = active - reference.nodes
        if unknown:
            raise ScenarioError(
                f"change at tick {tick} activates nodes {sorted(unknown)} that are "
                "not part of the reference topology"
            )
        if active == current.nodes:
            raise ScenarioError(f"change at tick {tick} does not modify the network")
        events = [
            ChurnEvent("activate", v, _reference_incident(reference, v))
            for v in sorted(active - current.nodes)
        ]
        events.extend(ChurnEvent("deactivate", v) for v in sorted(current.nodes - active))
        try:
            for ev in events:
                current = apply_churn(current, ev)
        except ValueError as exc:
            raise ScenarioError(f"change at tick {tick} is not applicable: {exc}") from exc
        realized.append(ChurnChange(int(tick), tuple(events), active))
        graphs.append(current)

    starts = [0] + [c.tick for c in realized]
    ends = [t - 1 for t in starts[1:]] + [horizon]
    windows = tuple(Window(s, e, g) for s, e, g in zip(starts, ends, graphs))
    for w in windows:
        if not is_connected(w.graph):
            raise ConnectivityLost(
                f"the snapshot in effect from tick {w.start} is disconnected; "
                "extrema cannot reach every agent"
            )

    if kind == "consensus":
        if bank is None:
            raise ScenarioError("a consensus scenario needs a signal bank")
        if dse is not None:
            raise ScenarioError("size-estimation settings do not apply to a consensus run")
        missing = [i for i in reference.sorted_nodes if i not in bank.specs]
        if missing:
            raise ScenarioError(f"agents {missing} have no reference signal")
        declared = bank.slope_bound if declared_slope is None else float(declared_slope)
        certify_slope(bank, horizon, declared)
        slope_bound = declared
    else:
        if dse is None:
            raise ScenarioError("a size-estimation scenario needs its settings (p, trials)")
        if bank is not None:
            raise ScenarioError("size estimation generates its own inputs; drop the signals")
        if initial_states is not None:
            raise ScenarioError("size estimation draws its own initial states")
        slope_bound = 0.0  # inputs are piecewise constant between changes

    if params.variant == "approximate" and kind == "consensus" and params.alpha <= slope_bound:
        raise AssumptionViolation(
            f"decay alpha ({params.alpha:.6g}) must exceed the input slope bound "
            f"({slope_bound:.6g}) for the tracking error to shrink"
        )
    if params.variant == "exact" and dwell < params.delta:
        raise AssumptionViolation(
            f"dwell time ({dwell}) is shorter than the cascade depth ({params.delta}); "
            "the delayed extremum cannot settle between changes"
        )

    states: dict[int, float] | None = None
    if initial_states is not None:
        states = {int(i): float(v) for i, v in initial_states.items()}
        if frozenset(states) != reference.nodes:
            raise ScenarioError("initial states must cover exactly the starting agents")
        if not all(math.isfinite(v) for v in states.values()):
            raise ScenarioError("initial states must be finite")

    return Scenario(
        name=str(name),
        kind=kind,
        params=params,
        reference=reference,
        insertion_order=order,
        horizon=horizon,
        dwell=dwell,
        seed=seed,
        slope_bound=float(slope_bound),
        changes=tuple(realized),
        windows=windows,
        bank=bank,
        dse=dse,
        initial_states=states,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# config loading


def _section(data: Mapping, key: str, required: bool = False) -> dict:
    raw = data.get(key)
    if raw is None:
        if required:
            raise ScenarioError(f"missing required section {key!r}")
        return {}
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"section {key!r} must be a mapping")
    return dict(raw)


def _reject_unknown(where: str, leftovers: Mapping) -> None:
    if leftovers:
        raise ScenarioError(f"unknown keys in {where}: {sorted(leftovers)}")


def _build_topology(
    section: dict, seed: int
) -> tuple[NetworkSnapshot, tuple[int, ...]]:
    kind = section.pop("kind", None)
    if kind == "line":
        n = _as_int(section.pop("n"), "topology n")
        g = line_graph(n)
        order = g.sorted_nodes
    elif kind == "barabasi_albert":
        seed_line = _as_int(section.pop("seed_line", 5), "seed_line")
        target_n = _as_int(section.pop("target_n"), "target_n")
        m = _as_int(section.pop("edges_per_new_node", 2), "edges_per_new_node")
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
        g, order = barabasi_albert(line_graph(seed_line), target_n, m, rng)
    elif kind == "explicit":
        text = section.pop("text", None)
        if not isinstance(text, str):
            raise ScenarioError("explicit topology needs a 'text' edge-list block")
        g = snapshot_from_text(text)
        order = g.sorted_nodes
    else:
        raise ScenarioError(f"unknown topology kind {kind!r}")
    _reject_unknown("topology", section)
    return g, order


def _build_bank(
    section: dict, nodes: Sequence[int], seed: int, horizon: int
) -> tuple[SignalBank, float | None]:
    declared = section.pop("slope_bound", None)
    if declared is not None:
        declared = float(declared)
    default = section.pop("default", None)
    per_agent = _section(section, "agents")
    section.pop("agents", None)
    _reject_unknown("signals", section)

    rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    specs = {}
    for i in nodes:
        raw = per_agent.pop(i, None)
        if raw is None:
            raw = per_agent.pop(str(i), None)
        if raw is None:
            raw = default
        if raw is None:
            raise ScenarioError(f"agent {i} has no signal and no default is given")
        if not isinstance(raw, Mapping) or "kind" not in raw:
            raise ScenarioError(f"signal for agent {i} must be a mapping with a 'kind'")
        opts = dict(raw)
        kind = opts.pop("kind")
        try:
            specs[i] = build_spec(kind, opts, rng=rng, horizon=horizon)
        except ValueError as exc:
            raise ScenarioError(f"signal for agent {i}: {exc}") from exc
    if per_agent:
        raise ScenarioError(f"signals name unknown agents: {sorted(per_agent)}")
    return SignalBank(specs), declared


def _realize_pool_churn(
    section: dict,
    reference: NetworkSnapshot,
    order: Sequence[int],
    seed: int,
    horizon: int,
) -> list[tuple[int, frozenset[int]]]:
    pool_size = _as_int(section.pop("pool_size", 25), "pool_size")
    every = _as_int(section.pop("every"), "churn period")
    prob = float(section.pop("activation_probability", 0.5))
    max_redraws = _as_int(section.pop("max_redraws", 100), "max_redraws")
    _reject_unknown("churn", section)
    if not 1 <= pool_size < reference.n:
        raise ScenarioError(
            f"pool_size must be in [1, {reference.n - 1}] so a core always remains"
        )
    if every < 1:
        raise ScenarioError("the churn period must be positive")
    if not 0.0 < prob < 1.0:
        raise ScenarioError("activation_probability must lie strictly inside (0, 1)")

    pool = list(order[-pool_size:])
    core = frozenset(order[:-pool_size])
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    changes: list[tuple[int, frozenset[int]]] = []
    current = reference.nodes
    for tick in range(every, horizon, every):
        for attempt in range(max_redraws):
            keep = frozenset(v for v in pool if rng.random() < prob)
            target = core | keep
            if target == current:
                continue
            if is_connected(induced_subgraph(reference, target)):
                break
        else:
            raise ScenarioError(
                f"could not draw a connected membership change at tick {tick} "
                f"within {max_redraws} attempts"
            )
        changes.append((tick, target))
        current = target
    return changes


def _realize_explicit_churn(
    section: dict, reference: NetworkSnapshot
) -> list[tuple[int, frozenset[int]]]:
    events = section.pop("events", None)
    _reject_unknown("churn", section)
    if not isinstance(events, list):
        raise ScenarioError("explicit churn needs an 'events' list")
    changes: list[tuple[int, frozenset[int]]] = []
    current = reference.nodes
    for raw in events:
        if not isinstance(raw, Mapping):
            raise ScenarioError("each churn event must be a mapping")
        entry = dict(raw)
        tick = _as_int(entry.pop("tick"), "churn event tick")
        deact = frozenset(int(v) for v in entry.pop("deactivate", []) or [])
        act = frozenset(int(v) for v in entry.pop("activate", []) or [])
        _reject_unknown(f"churn event at tick {tick}", entry)
        if deact & act:
            raise ScenarioError(
                f"churn event at tick {tick} both activates and deactivates "
                f"{sorted(deact & act)}"
            )
        if deact - current:
            raise ScenarioError(
                f"churn event at tick {tick} deactivates inactive nodes "
                f"{sorted(deact - current)}"
            )
        if act & current:
            raise ScenarioError(
                f"churn event at tick {tick} activates already-active nodes "
                f"{sorted(act & current)}"
            )
        current = (current - deact) | act
        changes.append((tick, current))
    return changes


def scenario_from_mapping(
    data: Mapping, *, seed: int | None = None, name: str | None = None
) -> Scenario:
    """Assemble a scenario from a parsed config mapping.

    ``seed`` overrides the config's root seed, re-realizing every random
    choice (topology growth, churn subsets, signal tables) under the new one.
    """
    if not isinstance(data, Mapping):
        raise ScenarioError("the scenario config must be a mapping at the top level")
    data = dict(data)

    cfg_name = data.pop("name", None)
    scenario_name = str(cfg_name if cfg_name is not None else (name or "scenario"))
    kind = data.pop("kind", None)
    if kind not in ("consensus", "size_estimation"):
        raise ScenarioError(
            f"kind must be 'consensus' or 'size_estimation', got {kind!r}"
        )
    root_seed = seed if seed is not None else data.pop("seed", None)
    data.pop("seed", None)
    if root_seed is None:
        raise ScenarioError("the scenario needs a root seed (or a --seed override)")
    root_seed = _as_int(root_seed, "seed")
    horizon = _as_int(data.pop("horizon", None), "horizon")
    dwell = data.pop("dwell", None)

    proto = _section(data, "protocol", required=True)
    data.pop("protocol")
    try:
        params = ProtocolParams(
            mode=proto.pop("mode", "max"),
            variant=proto.pop("variant", None),
            alpha=proto.pop("alpha", None),
            delta=proto.pop("delta", None),
            read_departing=bool(proto.pop("read_departing", True)),
        )
    except ValueError as exc:
        raise ScenarioError(f"protocol: {exc}") from exc
    _reject_unknown("protocol", proto)

    topo = _section(data, "topology", required=True)
    data.pop("topology")
    reference, order = _build_topology(topo, root_seed)

    churn_raw = _section(data, "churn")
    data.pop("churn", None)
    changes: list[tuple[int, frozenset[int]]] = []
    if churn_raw:
        churn_kind = churn_raw.pop("kind", None)
        if churn_kind == "pool_random":
            changes = _realize_pool_churn(churn_raw, reference, order, root_seed, horizon)
        elif churn_kind == "explicit":
            changes = _realize_explicit_churn(churn_raw, reference)
        else:
            raise ScenarioError(f"unknown churn kind {churn_kind!r}")

    bank: SignalBank | None = None
    declared_slope: float | None = None
    dse: DseConfig | None = None
    if kind == "consensus":
        sig = _section(data, "signals", required=True)
        data.pop("signals")
        bank, declared_slope = _build_bank(sig, reference.sorted_nodes, root_seed, horizon)
        if "dse" in data:
            raise ScenarioError("a consensus scenario cannot carry a 'dse' section")
    else:
        dse_raw = _section(data, "dse", required=True)
        data.pop("dse")
        p = dse_raw.pop("p", None)
        if p is None:
            raise ScenarioError("the dse section needs the coordinate count p")
        dse = DseConfig(p=_as_int(p, "p"), mc_trials=_as_int(dse_raw.pop("mc_trials", 2000), "mc_trials"))
        _reject_unknown("dse", dse_raw)
        if "signals" in data:
            raise ScenarioError("size estimation generates its own inputs; drop the signals")

    initial_states: dict[int, float] | None = None
    raw_states = data.pop("initial_states", None)
    if raw_states is not None:
        if isinstance(raw_states, Mapping):
            initial_states = {int(i): float(v) for i, v in raw_states.items()}
        elif isinstance(raw_states, (list, tuple)):
            nodes = reference.sorted_nodes
            if len(raw_states) != len(nodes):
                raise ScenarioError(
                    f"initial_states lists {len(raw_states)} values for "
                    f"{len(nodes)} starting agents"
                )
            initial_states = {i: float(v) for i, v in zip(nodes, raw_states)}
        else:
            raise ScenarioError("initial_states must be a list or a mapping")

    trace_raw = _section(data, "trace")
    data.pop("trace", None)
    trace = TraceOptions(
        csv=bool(trace_raw.pop("csv", True)),
        plotdata=bool(trace_raw.pop("plotdata", True)),
    )
    _reject_unknown("trace", trace_raw)
    _reject_unknown("the scenario config", data)

    return make_scenario(
        name=scenario_name,
        kind=kind,
        params=params,
        reference=reference,
        horizon=horizon,
        seed=root_seed,
        changes=changes,
        dwell=dwell,
        bank=bank,
        dse=dse,
        initial_states=initial_states,
        insertion_order=order,
        trace=trace,
        declared_slope=declared_slope,
    )


def load_scenario(text: str, *, seed: int | None = None, name: str | None = None) -> Scenario:
    """Parse and validate a scenario config from its text form."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"could not parse the scenario config: {exc}") from exc
    return scenario_from_mapping(data, seed=seed, name=name)


def load_scenario_file(path: str | Path, *, seed: int | None = None) -> Scenario:
    path = Path(path)
    return load_scenario(path.read_text(), seed=seed, name=path.stem)


def list_presets() -> tuple[str, ...]:
    """Names of the scenario configs shipped with the package."""
    root = resources.files("openmax") / "presets"
    return tuple(sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml")))


def load_preset(name: str, *, seed: int | None = None) -> Scenario:
    ref = resources.files("openmax") / "presets" / f"{name}.yaml"
    if not ref.is_file():
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}"
        )
    return load_scenario(ref.read_text(), seed=seed, name=name)


# ---------------------------------------------------------------------------
# execution


def _graph_by_tick(scenario: Scenario) -> list[NetworkSnapshot]:
    graphs: list[NetworkSnapshot] = []
    for w in scenario.windows:
        graphs.extend([w.graph] * (w.end - w.start + 1))
    return graphs


def _check_finite(values: Iterable[float], tick: int) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise RunExecutionError(
                f"non-finite state encountered at tick {tick}; aborting the run"
            )


def _verify_connected(g: NetworkSnapshot, tick: int) -> None:
    if not is_connected(g):
        raise ConnectivityLost(
            f"the snapshot in effect from tick {tick} is disconnected; aborting the run"
        )


def run(scenario: Scenario) -> RunResult:
    """Execute a consensus scenario tick by tick and summarize each window."""
    if scenario.kind != "consensus":
        raise ScenarioError("run() expects a consensus scenario; use run_size_estimation()")
    params = scenario.params
    bank = scenario.bank
    graphs = _graph_by_tick(scenario)
    window_starts = {w.start for w in scenario.windows}
    sign = 1.0 if params.mode == "max" else -1.0

    g = graphs[0]
    u_now = {i: sample(bank, i, 0) for i in g.sorted_nodes}
    if scenario.initial_states is not None:
        states = {i: resume_agent(params, scenario.initial_states[i], u_now[i]) for i in g.sorted_nodes}
    else:
        states = {i: init_agent(params, u_now[i]) for i in g.sorted_nodes}

    errors, targets, counts = [], [], []
    outputs_by_tick: list[dict[int, float]] = []
    inputs_by_tick: list[dict[int, float]] = []
    for k in range(scenario.horizon + 1):
        g = graphs[k]
        if k in window_starts:
            _verify_connected(g, k)
        outs = {i: float(output(params, states[i])) for i in g.sorted_nodes}
        _check_finite(outs.values(), k)
        target = sign * max(sign * v for v in u_now.values())
        errors.append(max(abs(outs[i] - target) for i in g.sorted_nodes))
        targets.append(target)
        counts.append(g.n)
        outputs_by_tick.append(outs)
        inputs_by_tick.append(dict(u_now))

        if k < scenario.horizon:
            g_next = graphs[k + 1]
            u_next = {i: sample(bank, i, k + 1) for i in g_next.sorted_nodes}
            states = open_step(params, g, g_next, states, u_now, u_next)
            u_now = u_next

    trace = ErrorTrace(
        ticks=np.arange(scenario.horizon + 1),
        errors=np.asarray(errors),
        targets=np.asarray(targets),
        n_active=np.asarray(counts),
        outputs=tuple(outputs_by_tick),
        inputs=tuple(inputs_by_tick),
    )
    summary = _consensus_summary(scenario, trace)
    return RunResult(scenario, trace, summary)


def _window_bounds(
    scenario: Scenario,
    w: Window,
    d: int,
    x_at_change: Sequence[object],
    target_at_change: float | np.ndarray,
    slope: float,
) -> BoundsReport:
    params = scenario.params
    if params.variant == "exact":
        return edmc_bounds(params.delta, slope, diameter=d, dwell=scenario.dwell)
    if params.mode == "max":
        return admc_bounds(d, params.alpha, slope, x_at_change, target_at_change, dwell=scenario.dwell)
    return admc_min_bounds(d, params.alpha, slope, x_at_change, target_at_change, dwell=scenario.dwell)


def _empirical_dict(errs: Sequence[float], report: BoundsReport) -> dict:
    audit = audit_window(errs, report)
    det = audit.detected
    return {
        "transient_time": det.transient_time,
        "convergence_time": det.convergence_time,
        "converged": det.converged,
        "max_error": float(max(errs)),
        "final_error": float(errs[-1]),
        "max_error_after_convergence": (
            None
            if audit.max_error_after_convergence is None
            else float(audit.max_error_after_convergence)
        ),
        "decrease_violations": audit.decrease_violations,
        "containment_violations": audit.containment_violations,
        "containment_audited": audit.audited_containment,
    }


def _protocol_dict(params: ProtocolParams) -> dict:
    return {
        "mode": params.mode,
        "variant": params.variant,
        "alpha": params.alpha,
        "delta": params.delta,
        "read_departing": params.read_departing,
    }


def _consensus_summary(scenario: Scenario, trace: ErrorTrace) -> dict:
    windows = []
    for w in scenario.windows:
        d = int(diameter(w.graph))
        outs = [trace.outputs[w.start][i] for i in w.graph.sorted_nodes]
        report = _window_bounds(
            scenario, w, d, outs, trace.targets[w.start], scenario.slope_bound
        )
        errs = trace.errors[w.start : w.end + 1]
        windows.append(
            {
                "start": w.start,
                "end": w.end,
                "n_active": w.graph.n,
                "diameter": d,
                "bounds": report.to_dict(),
                "empirical": _empirical_dict(errs, report),
            }
        )
    return {
        "scenario": scenario.name,
        "kind": scenario.kind,
        "seed": scenario.seed,
        "protocol": _protocol_dict(scenario.params),
        "horizon": scenario.horizon,
        "dwell": scenario.dwell,
        "slope_bound": scenario.slope_bound,
        "max_error": float(np.max(trace.errors)),
        "windows": windows,
    }


def run_size_estimation(scenario: Scenario) -> RunResult:
    """Execute a size-estimation scenario: consensus over per-agent maxima vectors."""
    if scenario.kind != "size_estimation":
        raise ScenarioError("run_size_estimation() expects a size-estimation scenario")
    params = scenario.params
    p = scenario.dse.p
    graphs = _graph_by_tick(scenario)
    window_starts = {w.start for w in scenario.windows}
    draw_rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, 2)))

    g = graphs[0]
    personal = {i: dse_generate(p, draw_rng) for i in g.sorted_nodes}
    states = {i: init_agent(params, personal[i]) for i in g.sorted_nodes}

    errors, sizes, target_ests = [], [], []
    estimates_by_tick: list[dict[int, float]] = []
    window_gaps: list[float] = []
    for k in range(scenario.horizon + 1):
        g = graphs[k]
        if k in window_starts:
            _verify_connected(g, k)
        maxima = np.max(np.stack([personal[i] for i in g.sorted_nodes]), axis=0)
        outs = {i: np.asarray(output(params, states[i]), dtype=float) for i in g.sorted_nodes}
        _check_finite(outs.values(), k)
        errors.append(max(float(np.max(np.abs(outs[i] - maxima))) for i in g.sorted_nodes))
        sizes.append(g.n)
        target_ests.append(mle_estimate(maxima))
        estimates_by_tick.append({i: mle_estimate(outs[i]) for i in g.sorted_nodes})
        if k in window_starts:
            # how far stale states overshoot the fresh maxima; feeds the
            # convergence-time bound of the window
            overshoot = max(float(np.max(outs[i] - maxima)) for i in g.sorted_nodes)
            window_gaps.append(max(overshoot, 0.0))

        if k < scenario.horizon:
            g_next = graphs[k + 1]
            if g_next.nodes == g.nodes:
                u_now = u_next = personal
            else:
                u_now = dict(personal)  # departing agents stay readable this tick
                for i in sorted(g_next.nodes - g.nodes):
                    personal[i] = dse_generate(p, draw_rng)  # fresh draw on (re)arrival
                for i in g.nodes - g_next.nodes:
                    del personal[i]
                u_next = personal
            states = open_step(params, g, g_next, states, u_now, u_next)

    trace = DseTrace(
        ticks=np.arange(scenario.horizon + 1),
        errors=np.asarray(errors),
        true_sizes=np.asarray(sizes),
        target_estimates=np.asarray(target_ests),
        estimates=tuple(estimates_by_tick),
    )
    summary = _dse_summary(scenario, trace, window_gaps)
    return RunResult(scenario, trace, summary)


def _dse_summary(scenario: Scenario, trace: DseTrace, window_gaps: Sequence[float]) -> dict:
    params = scenario.params
    p = scenario.dse.p
    windows = []
    eps = 0.0
    expected = None
    for w, gap in zip(scenario.windows, window_gaps):
        d = int(diameter(w.graph))
        eps = params.alpha * d if params.variant == "approximate" else 0.0
        n_true = w.graph.n
        expected = (
            expected_estimate_admc(n_true, p, eps)
            if params.variant == "approximate"
            else expected_estimate_edmc(n_true, p)
        )
        errs = trace.errors[w.start : w.end + 1]
        if params.variant == "exact":
            report = edmc_bounds(params.delta, 0.0, diameter=d, dwell=scenario.dwell)
        else:
            # inputs are constant within a window, so the slope bound is zero
            # and the realized overshoot at the change sets the gap
            report = admc_bounds(d, params.alpha, 0.0, [gap], 0.0, dwell=scenario.dwell)
        ests = trace.estimates[w.end]
        values = [ests[i] for i in w.graph.sorted_nodes]
        spread = float(max(values) - min(values))
        windows.append(
            {
                "start": w.start,
                "end": w.end,
                "n_true": n_true,
                "diameter": d,
                "epsilon": eps,
                "expected_closed_form": expected,
                "bounds": report.to_dict(),
                "empirical": _empirical_dict(errs, report),
                "steady": {
                    "mean_estimate": float(np.mean(values)),
                    "min_estimate": float(min(values)),
                    "max_estimate": float(max(values)),
                    "spread": spread,
                    "target_estimate": float(trace.target_estimates[w.end]),
                    "agree_exactly": spread <= 1e-12,
                },
            }
        )
    last = scenario.windows[-1]
    mc_seed = int(np.random.SeedSequence((scenario.seed, 4)).generate_state(1, np.uint64)[0])
    mc = dse_worst_case_monte_carlo(
        last.graph.n, p, eps, scenario.dse.mc_trials, mc_seed
    )
    return {
        "scenario": scenario.name,
        "kind": scenario.kind,
        "seed": scenario.seed,
        "protocol": _protocol_dict(params),
        "horizon": scenario.horizon,
        "dwell": scenario.dwell,
        "p": p,
        "epsilon": eps,
        "expected_closed_form": expected,
        "monte_carlo_mean": mc.mean,
        "ci99": mc.ci99,
        "std_error": mc.std_error,
        "mc_trials": mc.trials,
        "floored_coordinates": mc.floored_coordinates,
        "windows": windows,
    }


# ---------------------------------------------------------------------------
# artifact writing


def _write_consensus_csv(path: Path, trace: ErrorTrace) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "agent", "x", "u", "e", "n_active"])
        for k in range(len(trace.ticks)):
            e = float(trace.errors[k])
            n = int(trace.n_active[k])
            for agent in sorted(trace.outputs[k]):
                writer.writerow(
                    [k, agent, trace.outputs[k][agent], trace.inputs[k][agent], e, n]
                )


def _write_dse_csv(path: Path, trace: DseTrace) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "agent", "n_hat"])
        for k in range(len(trace.ticks)):
            for agent in sorted(trace.estimates[k]):
                writer.writerow([k, agent, trace.estimates[k][agent]])


def _write_state_plot(path: Path, scenario: Scenario, trace: ErrorTrace) -> None:
    nodes = scenario.reference.sorted_nodes
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "target"] + [f"x_{i}" for i in nodes])
        for k in range(len(trace.ticks)):
            row: list[object] = [k, float(trace.targets[k])]
            row.extend(trace.outputs[k].get(i, "") for i in nodes)
            writer.writerow(row)


def _write_estimate_plot(path: Path, scenario: Scenario, trace: DseTrace) -> None:
    nodes = scenario.reference.sorted_nodes
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "n_true", "target_estimate"] + [f"nhat_{i}" for i in nodes])
        for k in range(len(trace.ticks)):
            row: list[object] = [k, int(trace.true_sizes[k]), float(trace.target_estimates[k])]
            row.extend(trace.estimates[k].get(i, "") for i in nodes)
            writer.writerow(row)


def write_outputs(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write the trace CSV, summary JSON, and plot data for one finished run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = result.scenario
    paths: dict[str, Path] = {}

    summary_path = out / "summary.json"
    with summary_path.open("w") as fh:
        json.dump(result.summary, fh, indent=2)
        fh.write("\n")
    paths["summary"] = summary_path

    if scenario.trace.csv:
        trace_path = out / "trace.csv"
        if scenario.kind == "consensus":
            _write_consensus_csv(trace_path, result.trace)
        else:
            _write_dse_csv(trace_path, result.trace)
        paths["trace"] = trace_path

    if scenario.trace.plotdata:
        plot_dir = out / "plotdata"
        plot_dir.mkdir(exist_ok=True)
        if scenario.kind == "consensus":
            _write_state_plot(plot_dir / "state_trajectories.csv", scenario, result.trace)
        else:
            _write_estimate_plot(plot_dir / "size_estimates.csv", scenario, result.trace)
        for w in scenario.windows:
            (plot_dir / f"graph_window_{w.start}.txt").write_text(snapshot_to_text(w.graph))
        paths["plotdata"] = plot_dir
    return paths
