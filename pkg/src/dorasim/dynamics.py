"""Discrete-time network dynamics: modes, net inputs, inhibitors, integration.

One tick is one synchronous sweep in fixed order: P modes from last tick's
activations, then net inputs, then inhibitor charging (with resets and the
refresh signals), then leaky integration. Binding is carried by timing: the
driver clamps one PO at a time in surface order and everything else phases
itself around that clamp.

All equations live in compute_net_inputs and are written termwise on
purpose; the shapes are small enough that clarity beats cleverness here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np


@dataclass
class DynamicsParams:
    gamma: float = 0.3  # growth rate
    delta: float = 0.1  # decay rate
    ceiling: float = 1.1
    gain_pred: float = 2.0
    gain_obj: float = 1.0
    inhibitor_return: float = 10.0
    active_threshold: float = 0.5
    phase_set_repeats: int = 3
    max_ticks_per_po: int = 110  # safety bound on a clamp window
    inhibitor_threshold: float = 1.0
    # yoke weights are calibrated jointly so that over a three-pass phase set
    # on a two-binding proposition the PO inhibitors fire exactly twice per RB
    # inhibitor firing, role/filler windows stay non-overlapping, and in the
    # settled passes the RB inhibitor fires on the same tick as its filler PO
    # (the handoff is inhibitor-driven; a late RB lets the old role re-surge)
    yoke_po: float = 0.0525
    yoke_rb: float = 0.075

    def __post_init__(self):
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")
        if self.phase_set_repeats < 1 or self.max_ticks_per_po < 1:
            raise ValueError("phase_set_repeats and max_ticks_per_po must be >= 1")

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown dynamics parameter(s): {sorted(unknown)}")
        return cls(**mapping)


class _NoFeedback:
    """Stands in for MappingState when no mapping connections exist yet."""

    def net_feedback(self, banks):
        return (
            np.zeros(banks.n_p),
            np.zeros(banks.n_rb),
            np.zeros(banks.n_po),
        )


NO_FEEDBACK = _NoFeedback()


def update_p_modes(banks):
    """Parent when its own bindings outdrive the ones above, child when the
    reverse holds, neutral on a tie."""
    above = banks.p_above_rb @ banks.a_rb
    below = banks.p_child_rb @ banks.a_rb
    banks.mode_p = np.sign(below - above)
    return banks


def compute_net_inputs(banks, params, mapping=None):
    """Net inputs for every P, RB, PO, and semantic unit, from last tick's
    activations. Returns (net_p, net_rb, net_po, sem_in)."""
    a_p, a_rb, a_po = banks.a_p, banks.a_rb, banks.a_po
    d_p, d_rb, d_po = banks.driver_p, banks.driver_rb, banks.driver_po
    o_p, o_rb, o_po = banks.outside_p, banks.outside_rb, banks.outside_po
    parent = banks.mode_p > 0
    child = banks.mode_p < 0
    m_p, m_rb, m_po = (mapping or NO_FEEDBACK).net_feedback(banks)

    rb_below = banks.p_child_rb @ a_rb
    rb_above = banks.p_above_rb @ a_rb
    p_share_po = banks.po_child_p.T  # (n_p, n_po)

    def p_form(bank_p, bank_po, extra):
        a_parent = np.where(bank_p & parent, a_p, 0.0)
        a_child = np.where(bank_p & child, a_p, 0.0)
        a_po_bank = np.where(bank_po, a_po, 0.0)
        lateral_parent = a_parent.sum() - a_parent
        lateral_child = a_child.sum() - a_child
        shared_po = p_share_po @ a_po_bank
        unshared_po = a_po_bank.sum() - shared_po
        net_parent = rb_below - 3.0 * lateral_parent
        net_child = rb_above - lateral_child - unshared_po - 3.0 * shared_po
        return np.where(child, net_child, net_parent) + extra

    net_p = np.where(
        d_p,
        p_form(d_p, d_po, 0.0),
        p_form(o_p, o_po, m_p - banks.tau_g),
    )

    # both Ps touching a binding (owner above, filler below) can excite it,
    # gated by mode: drivers listen to parents only, the outside adds children
    owner_act = a_p[banks.rb_owner_p]
    owner_parent = owner_act * parent[banks.rb_owner_p]
    owner_child = owner_act * child[banks.rb_owner_p]
    has_filler_p = banks.rb_filler_p >= 0
    filler_idx = np.where(has_filler_p, banks.rb_filler_p, 0)
    filler_act = np.where(has_filler_p, a_p[filler_idx], 0.0)
    filler_parent = filler_act * parent[filler_idx] * has_filler_p
    filler_child = filler_act * child[filler_idx] * has_filler_p
    p_parent_in = owner_parent + filler_parent
    p_child_in = owner_child + filler_child
    own_po = banks.rb_po @ a_po

    a_rb_d = np.where(d_rb, a_rb, 0.0)
    a_rb_o = np.where(o_rb, a_rb, 0.0)
    lateral_rb_d = a_rb_d.sum() - a_rb_d
    lateral_rb_o = a_rb_o.sum() - a_rb_o
    net_rb_driver = (
        p_parent_in + own_po - 3.0 * lateral_rb_d
        - params.inhibitor_return * banks.fired_rb
    )
    net_rb_outside = p_parent_in + p_child_in + own_po + m_rb - 3.0 * lateral_rb_o - banks.tau_g
    net_rb = np.where(d_rb, net_rb_driver, net_rb_outside)

    gain = np.where(banks.po_is_pred, params.gain_pred, params.gain_obj)
    own_rb = banks.rb_po.T @ a_rb
    a_child_d = np.where(d_p & child, a_p, 0.0)
    a_child_o = np.where(o_p & child, a_p, 0.0)
    shared_child_d = banks.po_child_p @ a_child_d
    shared_child_o = banks.po_child_p @ a_child_o
    a_po_d = np.where(d_po, a_po, 0.0)
    a_po_o = np.where(o_po, a_po, 0.0)
    shared_po_d = banks.po_share @ a_po_d
    shared_po_o = banks.po_share @ a_po_o
    unshared_po_d = a_po_d.sum() - a_po_d - shared_po_d
    unshared_po_o = a_po_o.sum() - a_po_o - shared_po_o
    unconn_rb_d = a_rb_d.sum() - own_rb
    unconn_rb_o = a_rb_o.sum() - own_rb
    sem_feedback = banks.links @ banks.sem

    net_po_driver = (
        gain * own_rb
        + (a_child_d.sum() - shared_child_d)
        - unshared_po_d
        - 3.0 * shared_po_d
        - unconn_rb_d
        - params.inhibitor_return * banks.fired_po
    )
    net_po_outside = (
        own_rb
        + sem_feedback
        + m_po
        - unshared_po_o
        + (a_child_o.sum() - shared_child_o)
        - 3.0 * shared_po_o
        - unconn_rb_o
        - banks.tau_g
        - banks.tau_l
    )
    net_po = np.where(d_po, net_po_driver, net_po_outside)

    sem_in = banks.links.T @ a_po
    return net_p, net_rb, net_po, sem_in


def step_inhibitors(banks, params):
    """Charge yoked inhibitors from last tick's activations, fire and reset
    on threshold, then set the refresh signals.

    PO inhibitors draw from their PO plus its binding(s), so they cross
    threshold about twice as often as RB inhibitors, which draw from the
    binding alone. tau_l drops to 0 while any driver PO is active; tau_g
    drops to 0 while any driver RB is active; both return to 10 otherwise.
    """
    banks.inhib_rb += params.yoke_rb * banks.a_rb
    po_rb_act = banks.rb_po.T @ banks.a_rb
    banks.inhib_po += params.yoke_po * (banks.a_po + po_rb_act)

    fired_rb = banks.inhib_rb >= params.inhibitor_threshold
    fired_po = banks.inhib_po >= params.inhibitor_threshold
    banks.a_rb[fired_rb] = 0.0
    banks.inhib_rb[fired_rb] = 0.0
    banks.a_po[fired_po] = 0.0
    banks.inhib_po[fired_po] = 0.0
    banks.fired_rb = fired_rb
    banks.fired_po = fired_po

    thr = params.active_threshold
    driver_po_active = np.any(banks.a_po[banks.driver_po] > thr)
    driver_rb_active = np.any(banks.a_rb[banks.driver_rb] > thr)
    banks.tau_l = 0.0 if driver_po_active else 10.0
    banks.tau_g = 0.0 if driver_rb_active else 10.0
    return fired_rb, fired_po


def integrate_activations(net, banks, params, clamped_po=-1):
    """Leaky-integrator step on all unclamped, not-just-fired units.

    da = gamma * n * (ceiling - a) - delta * a, clipped to [0, 1]. Semantic
    activations are memoryless: set from their input, then clipped.
    """
    net_p, net_rb, net_po, sem_in = net

    da_p = params.gamma * net_p * (params.ceiling - banks.a_p) - params.delta * banks.a_p
    banks.a_p = np.clip(banks.a_p + da_p, 0.0, 1.0)

    da_rb = params.gamma * net_rb * (params.ceiling - banks.a_rb) - params.delta * banks.a_rb
    new_rb = np.clip(banks.a_rb + da_rb, 0.0, 1.0)
    banks.a_rb = np.where(banks.fired_rb, banks.a_rb, new_rb)

    da_po = params.gamma * net_po * (params.ceiling - banks.a_po) - params.delta * banks.a_po
    new_po = np.clip(banks.a_po + da_po, 0.0, 1.0)
    skip = banks.fired_po.copy()
    if clamped_po >= 0:
        skip[clamped_po] = True
    banks.a_po = np.where(skip, banks.a_po, new_po)

    banks.sem = np.clip(sem_in, 0.0, 1.0)
    return banks


def run_tick(banks, params, mapping=None, clamped_po=-1):
    """One full synchronous update; returns the fired masks."""
    if clamped_po >= 0:
        banks.a_po[clamped_po] = 1.0
    update_p_modes(banks)
    net = compute_net_inputs(banks, params, mapping)
    fired_rb, fired_po = step_inhibitors(banks, params)
    integrate_activations(net, banks, params, clamped_po=clamped_po)
    return fired_rb, fired_po


@dataclass
class ActivationTrace:
    """Dense per-tick record of every non-semantic unit, plus the signals
    that structure a phase set (refresh levels and inhibitor firings)."""

    p: list = field(default_factory=list)
    rb: list = field(default_factory=list)
    po: list = field(default_factory=list)
    tau_l: list = field(default_factory=list)
    tau_g: list = field(default_factory=list)
    fired_rb: list = field(default_factory=list)
    fired_po: list = field(default_factory=list)

    def append(self, banks):
        self.p.append(banks.a_p.copy())
        self.rb.append(banks.a_rb.copy())
        self.po.append(banks.a_po.copy())
        self.tau_l.append(banks.tau_l)
        self.tau_g.append(banks.tau_g)
        self.fired_rb.append(banks.fired_rb.copy())
        self.fired_po.append(banks.fired_po.copy())

    @property
    def ticks(self):
        return len(self.p)

    def stacked(self, layer):
        series = {"P": self.p, "RB": self.rb, "PO": self.po}[layer]
        return np.asarray(series)

    def layer_totals(self):
        return {layer: float(self.stacked(layer).sum()) for layer in ("P", "RB", "PO")}

    def first_crossing(self, layer, unit, threshold=0.5):
        series = self.stacked(layer)[:, unit]
        hits = np.flatnonzero(series > threshold)
        return int(hits[0]) if hits.size else None

    def write_csv(self, path, banks):
        from .network import Bank

        bank_name = {Bank.DRIVER: "driver", Bank.RECIPIENT: "recipient", Bank.LTM: "ltm"}
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("tick,unit_id,layer,bank,activation\n")
            for t in range(self.ticks):
                for layer, ids, analog_of, row in (
                    ("P", banks.p_ids, banks.analog_of_p, self.p[t]),
                    ("RB", banks.rb_ids, banks.analog_of_rb, self.rb[t]),
                    ("PO", banks.po_ids, banks.analog_of_po, self.po[t]),
                ):
                    for i, uid in enumerate(ids):
                        bank = bank_name[Bank(int(banks.bank_of_analog[analog_of[i]]))]
                        fh.write(f"{t},{uid},{layer},{bank},{row[i]:.6f}\n")


def run_phase_set(banks, params, mapping=None, observer=None, repeats=None, record=False):
    """Sequence the driver's firing order with clamping, repeated to form a
    phase set.

    Each PO in the firing order is clamped to 1 until its yoked inhibitor
    fires (bounded by max_ticks_per_po), followed by one unclamped tick so
    the local refresh signal can pulse before the next word. The whole pass
    repeats phase_set_repeats times unless overridden. An observer sees the
    banks after every tick; mapping (when given) both feeds activation back
    through committed connections and accumulates hypotheses via observer
    hooks the caller wires up.
    """
    trace = ActivationTrace() if record else None
    repeats = params.phase_set_repeats if repeats is None else repeats
    if not banks.firing_order:
        return banks, trace

    def one_tick(clamped):
        run_tick(banks, params, mapping, clamped_po=clamped)
        if observer is not None:
            observer.on_tick(banks)
        if record:
            trace.append(banks)

    for _ in range(repeats):
        for po_idx in banks.firing_order:
            for _ in range(params.max_ticks_per_po):
                one_tick(po_idx)
                if banks.fired_po[po_idx]:
                    break
            one_tick(-1)  # gap tick: the refresh between words
        if observer is not None and hasattr(observer, "on_pass_end"):
            observer.on_pass_end(banks)
    return banks, trace


def present_words(banks, params, slot_ticks, mapping=None, record_trace=False):
    """Fixed-rate word presentation for spectral probes.

    Every PO in the firing order gets exactly slot_ticks ticks; the word is
    clamped from its slot onset until its yoked inhibitor fires, then runs
    free for the rest of the slot. Onsets are strictly periodic, which is
    what licenses reading the tick axis as a uniform sample clock. Returns
    per-tick driver-layer activation sums (and a full trace on request).
    """
    if slot_ticks < 2:
        raise ValueError("slot_ticks must be at least 2")
    sums = {"P": [], "RB": [], "PO": []}
    trace = ActivationTrace() if record_trace else None
    for po_idx in banks.firing_order:
        released = False
        for t in range(slot_ticks):
            clamped = po_idx if not released else -1
            run_tick(banks, params, mapping, clamped_po=clamped)
            if banks.fired_po[po_idx]:
                released = True
            sums["P"].append(float(banks.a_p[banks.driver_p].sum()))
            sums["RB"].append(float(banks.a_rb[banks.driver_rb].sum()))
            sums["PO"].append(float(banks.a_po[banks.driver_po].sum()))
            if record_trace:
                trace.append(banks)
    layer_series = {k: np.asarray(v) for k, v in sums.items()}
    return (layer_series, trace) if record_trace else (layer_series, None)


def present_trials(banks, analogs, params, slot_ticks):
    """Present every analog as one fixed-rate word trial, in corpus order,
    with the network settled to rest between trials. Concatenates the
    per-layer driver sums into one uniformly clocked series per layer."""
    from .network import load_driver, return_to_ltm

    series = {"P": [], "RB": [], "PO": []}
    for analog in analogs:
        load_driver(banks, analogs, analog=analog.name)
        chunk, _ = present_words(banks, params, slot_ticks)
        for layer in series:
            series[layer].append(chunk[layer])
        return_to_ltm(banks)
    return {layer: np.concatenate(parts) for layer, parts in series.items()}
