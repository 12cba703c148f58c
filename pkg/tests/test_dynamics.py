"""Tick dynamics: net-input anchors, integrator fixed point, inhibitor
timing, and the structure of a whole phase set at the shipped parameters."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dorasim.corpus import parse_proposition_file
from dorasim.embeddings import EmbeddingTable, Stage, normalize_for_links
from dorasim.dynamics import (
    ActivationTrace,
    DynamicsParams,
    compute_net_inputs,
    integrate_activations,
    present_trials,
    present_words,
    run_phase_set,
    run_tick,
    step_inhibitors,
    update_p_modes,
)
from dorasim.network import instantiate_network, load_driver

TOKENS = ["big", "dogs", "bite", "cats", "small", "mice"]

DOC = {"analogs": [
    {"name": "a1", "propositions": [{"id": "p1", "rbs": [
        {"pred": {"token": "big"}, "obj": {"token": "dogs"}},
        {"pred": {"token": "bite"}, "obj": {"token": "cats"}},
    ]}]},
    {"name": "a2", "propositions": [{"id": "q1", "rbs": [
        {"pred": {"token": "small"}, "obj": {"token": "mice"}},
    ]}]},
]}


def fresh_banks():
    analogs = parse_proposition_file(DOC)
    rng = np.random.default_rng(0)
    raw = EmbeddingTable(TOKENS, rng.uniform(0.1, 1.0, size=(len(TOKENS), 8)), Stage.RAW)
    banks = instantiate_network(analogs, normalize_for_links(raw))
    return load_driver(banks, analogs, analog="a1")


def po_idx(banks, token, pred=True):
    kind = "pred" if pred else "obj"
    return banks.po_ids.index(f"a1/po/{kind}:{token}")


# ------------------------------------------------------------- parameters

def test_params_reject_nonpositive_rates():
    with pytest.raises(ValueError):
        DynamicsParams(gamma=0.0)
    with pytest.raises(ValueError):
        DynamicsParams(delta=-0.1)


def test_params_from_mapping_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown dynamics parameter"):
        DynamicsParams.from_mapping({"gamma": 0.3, "gama": 0.2})
    p = DynamicsParams.from_mapping({"gamma": 0.2, "yoke_rb": 0.07})
    assert p.gamma == 0.2 and p.yoke_rb == 0.07


# ------------------------------------------------------------ net inputs

def test_p_modes_follow_binding_balance():
    banks = fresh_banks()
    banks.a_rb[0] = 0.8  # a1/p1 owns rb0: below > above -> parent
    update_p_modes(banks)
    assert banks.mode_p[0] == 1.0
    banks.a_rb[:] = 0.0
    update_p_modes(banks)
    assert banks.mode_p[0] == 0.0


def test_net_anchor_single_clamped_pred():
    # big clamped at rest: its binding sees exactly the clamp, its partner
    # object is fully suppressed, unshared POs mildly suppressed
    banks = fresh_banks()
    banks.a_po[po_idx(banks, "big")] = 1.0
    update_p_modes(banks)
    _, net_rb, net_po, sem_in = compute_net_inputs(banks, DynamicsParams())
    d_rb = net_rb[banks.driver_rb]
    assert d_rb[0] == pytest.approx(1.0)
    assert d_rb[1] == pytest.approx(0.0)
    assert net_po[po_idx(banks, "big")] == pytest.approx(0.0)
    assert net_po[po_idx(banks, "dogs", pred=False)] == pytest.approx(-3.0)
    assert net_po[po_idx(banks, "bite")] == pytest.approx(-1.0)
    assert net_po[po_idx(banks, "cats", pred=False)] == pytest.approx(-1.0)
    assert np.allclose(sem_in, banks.links[po_idx(banks, "big")])


def test_net_at_rest_outside_units_held_down():
    # nothing active: driver nets are all zero, units outside the driver sit
    # under the full refresh signals
    banks = fresh_banks()
    update_p_modes(banks)
    net_p, net_rb, net_po, sem_in = compute_net_inputs(banks, DynamicsParams())
    assert np.all(net_p[banks.driver_p] == 0)
    assert np.all(net_rb[banks.driver_rb] == 0)
    assert np.all(net_po[banks.driver_po] == 0)
    assert np.all(net_p[banks.outside_p] == -10.0)
    assert np.all(net_rb[banks.outside_rb] == -10.0)
    assert np.all(net_po[banks.outside_po] == -20.0)
    assert np.all(sem_in == 0)


def test_fired_units_take_return_inhibition():
    banks = fresh_banks()
    banks.fired_po[po_idx(banks, "big")] = True
    banks.fired_rb[0] = True
    update_p_modes(banks)
    _, net_rb, net_po, _ = compute_net_inputs(banks, DynamicsParams())
    assert net_po[po_idx(banks, "big")] == pytest.approx(-10.0)
    assert net_rb[0] == pytest.approx(-10.0)


# ------------------------------------------------------------- integrator

def zero_net(banks):
    return (
        np.zeros(banks.n_p),
        np.zeros(banks.n_rb),
        np.zeros(banks.n_po),
        np.zeros(banks.n_sem),
    )


def test_integration_first_step_from_rest():
    banks = fresh_banks()
    net = zero_net(banks)
    net[2][0] = 1.0
    integrate_activations(net, banks, DynamicsParams())
    # 0.3 * 1 * (1.1 - 0) - 0.1 * 0
    assert banks.a_po[0] == pytest.approx(0.33)


def test_integration_fixed_point_under_unit_drive():
    # a <- 0.33 + 0.6 a contracts to 0.825; the engine must hit it exactly
    banks = fresh_banks()
    params = DynamicsParams()
    net = zero_net(banks)
    net[2][0] = 1.0
    for _ in range(600):
        integrate_activations(net, banks, params)
    assert banks.a_po[0] == pytest.approx(0.825, abs=1e-9)


def test_integration_skips_clamped_and_fired_units():
    banks = fresh_banks()
    banks.a_po[0] = 1.0
    banks.a_po[1] = 0.6
    banks.fired_po[1] = True
    net = zero_net(banks)
    net[2][:2] = -5.0
    integrate_activations(net, banks, DynamicsParams(), clamped_po=0)
    assert banks.a_po[0] == 1.0
    assert banks.a_po[1] == 0.6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_property_activations_stay_in_bounds(seed):
    banks = fresh_banks()
    rng = np.random.default_rng(seed)
    banks.a_p = rng.uniform(0, 1, banks.n_p)
    banks.a_rb = rng.uniform(0, 1, banks.n_rb)
    banks.a_po = rng.uniform(0, 1, banks.n_po)
    net = (
        rng.uniform(-5, 5, banks.n_p),
        rng.uniform(-5, 5, banks.n_rb),
        rng.uniform(-5, 5, banks.n_po),
        rng.uniform(-5, 5, banks.n_sem),
    )
    integrate_activations(net, banks, DynamicsParams())
    for a in (banks.a_p, banks.a_rb, banks.a_po, banks.sem):
        assert np.all(a >= 0) and np.all(a <= 1)


# ------------------------------------------------------------- inhibitors

def test_inhibitor_charge_rates():
    banks = fresh_banks()
    params = DynamicsParams()
    banks.a_po[po_idx(banks, "big")] = 1.0
    banks.a_rb[0] = 0.5
    step_inhibitors(banks, params)
    # PO inhibitor draws from its own unit and its binding; RB from itself
    assert banks.inhib_po[po_idx(banks, "big")] == pytest.approx(params.yoke_po * 1.5)
    assert banks.inhib_po[po_idx(banks, "dogs", pred=False)] == pytest.approx(params.yoke_po * 0.5)
    assert banks.inhib_rb[0] == pytest.approx(params.yoke_rb * 0.5)


def test_inhibitor_fire_resets_unit_and_charge():
    banks = fresh_banks()
    i = po_idx(banks, "big")
    banks.a_po[i] = 1.0
    banks.inhib_po[i] = 0.999
    _, fired_po = step_inhibitors(banks, DynamicsParams())
    assert fired_po[i]
    assert banks.a_po[i] == 0.0
    assert banks.inhib_po[i] == 0.0


def test_refresh_signals_track_driver_activity():
    banks = fresh_banks()
    params = DynamicsParams()
    step_inhibitors(banks, params)
    assert banks.tau_l == 10.0 and banks.tau_g == 10.0
    banks.a_po[po_idx(banks, "big")] = 1.0
    banks.a_rb[0] = 0.9
    step_inhibitors(banks, params)
    assert banks.tau_l == 0.0 and banks.tau_g == 0.0


def test_refresh_ignores_non_driver_activity():
    banks = fresh_banks()
    outside = int(np.flatnonzero(banks.outside_po)[0])
    banks.a_po[outside] = 1.0
    step_inhibitors(banks, DynamicsParams())
    assert banks.tau_l == 10.0


# -------------------------------------------------------------- phase set

@pytest.fixture(scope="module")
def canonical_run():
    banks = fresh_banks()
    banks, trace = run_phase_set(banks, DynamicsParams(), record=True)
    return banks, trace


def fire_ticks(trace, layer, unit):
    fired = np.asarray({"RB": trace.fired_rb, "PO": trace.fired_po}[layer])
    return list(np.flatnonzero(fired[:, unit]))


def test_phase_set_firing_counts_two_to_one(canonical_run):
    banks, trace = canonical_run
    po_fires = int(np.asarray(trace.fired_po)[:, banks.driver_po].sum())
    rb_fires = int(np.asarray(trace.fired_rb)[:, banks.driver_rb].sum())
    assert rb_fires == 3 * 2  # three passes, two bindings
    assert po_fires == 2 * rb_fires


def test_phase_set_every_word_fires_once_per_pass(canonical_run):
    banks, trace = canonical_run
    for tok, pred in (("big", True), ("dogs", False), ("bite", True), ("cats", False)):
        assert len(fire_ticks(trace, "PO", po_idx(banks, tok, pred))) == 3


def test_phase_set_bindings_never_coactive(canonical_run):
    banks, trace = canonical_run
    rb = trace.stacked("RB")[:, banks.driver_rb]
    both = (rb[:, 0] > 0.5) & (rb[:, 1] > 0.5)
    assert not both.any()


def test_phase_set_role_fires_before_its_filler(canonical_run):
    banks, trace = canonical_run
    for role_tok, filler_tok in (("big", "dogs"), ("bite", "cats")):
        role = fire_ticks(trace, "PO", po_idx(banks, role_tok))
        filler = fire_ticks(trace, "PO", po_idx(banks, filler_tok, pred=False))
        assert all(r < f for r, f in zip(role, filler))


def test_phase_set_word_refresh_pulses_at_every_word_end(canonical_run):
    # driver words only: memory units firing off semantic feedback are part
    # of retrieval, not of the driver's word rhythm
    banks, trace = canonical_run
    tau_l = np.asarray(trace.tau_l)
    fired = np.asarray(trace.fired_po)[:, banks.driver_po]
    for t in np.flatnonzero(fired.any(axis=1)):
        assert tau_l[t] == 10.0
    # and the signal is held down mid-window
    mid = trace.first_crossing("PO", po_idx(banks, "big")) + 1
    assert tau_l[mid] == 0.0


def test_phase_set_binding_refresh_frames_the_stretch(canonical_run):
    # the global refresh pulses when a binding's inhibitor fires, within one
    # tick of the filler's own firing, and stays down while the binding holds
    banks, trace = canonical_run
    tau_g = np.asarray(trace.tau_g)
    for rb_unit, filler_tok in ((0, "dogs"), (1, "cats")):
        rb_fires = fire_ticks(trace, "RB", rb_unit)
        filler_fires = fire_ticks(trace, "PO", po_idx(banks, filler_tok, pred=False))
        assert len(rb_fires) == 3
        for rb_t, f_t in zip(rb_fires, filler_fires):
            assert abs(rb_t - f_t) <= 1
            assert tau_g[rb_t] == 10.0
    # recorded tau reflects pre-integration activity, so skip the tick on
    # which the binding first crosses threshold
    rb_act = trace.stacked("RB")[:, banks.driver_rb].max(axis=1)
    held = np.flatnonzero((rb_act > 0.5) & (np.roll(rb_act, 1) > 0.5))
    assert np.all(tau_g[held] == 0.0)


def test_phase_set_settled_pass_event_grammar(canonical_run):
    # second pass, first stretch: role rises, word refresh, filler rises,
    # word refresh + binding refresh together, then the next role
    banks, trace = canonical_run
    big = po_idx(banks, "big")
    dogs = po_idx(banks, "dogs", pred=False)
    bite = po_idx(banks, "bite")
    t_big = fire_ticks(trace, "PO", big)[1]
    t_dogs = fire_ticks(trace, "PO", dogs)[1]
    t_rb = fire_ticks(trace, "RB", 0)[1]
    po = trace.stacked("PO")
    t_dogs_rise = int(np.flatnonzero(po[:, dogs] > 0.5)[np.searchsorted(
        np.flatnonzero(po[:, dogs] > 0.5), t_big)])
    t_bite_rise = min(t for t in np.flatnonzero(po[:, bite] > 0.5) if t > t_dogs)
    assert t_big < t_dogs_rise < t_dogs == t_rb < t_bite_rise


def test_phase_set_deterministic(canonical_run):
    _, first = canonical_run
    banks = fresh_banks()
    _, second = run_phase_set(banks, DynamicsParams(), record=True)
    assert first.ticks == second.ticks
    for layer in ("P", "RB", "PO"):
        assert np.array_equal(first.stacked(layer), second.stacked(layer))


def test_phase_set_length_pinned(canonical_run):
    _, trace = canonical_run
    assert trace.ticks == 109
    assert fire_ticks(trace, "PO", 0) == [11, 47, 82]


def test_phase_set_empty_firing_order_is_noop():
    banks = fresh_banks()
    banks.firing_order = []
    banks, trace = run_phase_set(banks, DynamicsParams(), record=True)
    assert trace.ticks == 0
    assert np.all(banks.a_po == 0)


def test_phase_set_observer_hooks():
    banks = fresh_banks()

    class Counter:
        ticks = 0
        passes = 0

        def on_tick(self, banks):
            self.ticks += 1

        def on_pass_end(self, banks):
            self.passes += 1

    obs = Counter()
    banks, trace = run_phase_set(banks, DynamicsParams(), observer=obs, record=True)
    assert obs.ticks == trace.ticks
    assert obs.passes == 3


def test_run_tick_clamp_holds_through_integration():
    banks = fresh_banks()
    i = banks.firing_order[0]
    run_tick(banks, DynamicsParams(), clamped_po=i)
    assert banks.a_po[i] == 1.0


# ------------------------------------------------------------ trace + csv

def test_trace_first_crossing_and_totals():
    trace = ActivationTrace()

    class Stub:
        a_p = np.array([0.0])
        a_rb = np.array([0.0])
        tau_l = 10.0
        tau_g = 10.0
        fired_rb = np.array([False])
        fired_po = np.array([False, False])

    stub = Stub()
    for v in (0.2, 0.4, 0.7, 0.9):
        stub.a_po = np.array([v, 0.0])
        trace.append(stub)
    assert trace.first_crossing("PO", 0) == 2
    assert trace.first_crossing("PO", 1) is None
    assert trace.layer_totals()["PO"] == pytest.approx(2.2)


def test_trace_csv_layout(tmp_path, canonical_run):
    banks, trace = canonical_run
    path = tmp_path / "trace.csv"
    trace.write_csv(path, banks)
    lines = path.read_text().splitlines()
    assert lines[0] == "tick,unit_id,layer,bank,activation"
    assert len(lines) == 1 + trace.ticks * (banks.n_p + banks.n_rb + banks.n_po)
    cells = lines[1].split(",")
    assert cells[0] == "0" and cells[2] in {"P", "RB", "PO"}
    assert cells[3] in {"driver", "recipient", "ltm"}
    float(cells[4])


# ---------------------------------------------------------- fixed slots

def test_present_words_slot_structure():
    banks = fresh_banks()
    series, trace = present_words(banks, DynamicsParams(), 20, record_trace=True)
    assert trace.ticks == 20 * 4
    assert set(series) == {"P", "RB", "PO"}
    assert all(len(v) == 80 for v in series.values())
    fired = np.asarray(trace.fired_po)
    for s, word in enumerate(banks.firing_order):
        assert fired[s * 20:(s + 1) * 20, word].sum() == 1


def test_present_words_rejects_tiny_slots():
    banks = fresh_banks()
    with pytest.raises(ValueError, match="slot_ticks"):
        present_words(banks, DynamicsParams(), 1)


def test_present_words_deterministic():
    a, _ = present_words(fresh_banks(), DynamicsParams(), 12)
    b, _ = present_words(fresh_banks(), DynamicsParams(), 12)
    for layer in ("P", "RB", "PO"):
        assert np.array_equal(a[layer], b[layer])


def test_present_trials_concatenates_settled_runs():
    from dorasim.datagen import spectral_corpus
    from dorasim.network import instantiate_network

    doc, table = spectral_corpus(n_sentences=2)
    analogs = parse_proposition_file(doc)
    banks = instantiate_network(analogs, table)
    series = present_trials(banks, analogs, DynamicsParams(), slot_ticks=10)
    # 2 sentences x 4 words x 10 ticks
    assert all(len(series[k]) == 80 for k in ("P", "RB", "PO"))
    # settled between trials: both sentences have identical structure and
    # identical semantics, so their halves match exactly
    for k in ("P", "RB", "PO"):
        assert np.allclose(series[k][:40], series[k][40:])
    assert banks.firing_order == []  # everything returned to memory
