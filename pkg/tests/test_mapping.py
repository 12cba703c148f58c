"""Retrieval and mapping: Luce choice, hypothesis accumulation, commit
competition, mapping feedback, and the learning loop."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dorasim.corpus import parse_proposition_file
from dorasim.datagen import generate_corpus, generate_embeddings
from dorasim.dynamics import DynamicsParams, compute_net_inputs, run_phase_set, update_p_modes
from dorasim.embeddings import EmbeddingTable, Stage, normalize_for_links, reduce_dimensions
from dorasim.mapping import (
    HypothesisObserver,
    MappingError,
    MappingState,
    SimulationConfig,
    child_correlation_bonus,
    commit_mapping_connections,
    luce_retrieve,
    run_simulation,
    structural_truth,
    top_level_p_indices,
    update_mapping_hypotheses,
    write_mapping_csv,
    write_precision_csv,
)
from dorasim.network import Bank, instantiate_network, load_driver, move_to_recipient


def twin_pair_setup(seed=7):
    doc = {"analogs": [
        {"name": "a1", "propositions": [{"id": "p1", "rbs": [
            {"pred": {"token": "big"}, "obj": {"token": "dogs"}},
            {"pred": {"token": "bite"}, "obj": {"token": "men"}},
        ]}]},
        {"name": "a2", "propositions": [{"id": "q1", "rbs": [
            {"pred": {"token": "huge"}, "obj": {"token": "wolves"}},
            {"pred": {"token": "snap"}, "obj": {"token": "hunters"}},
        ]}]},
    ]}
    analogs = parse_proposition_file(doc)
    toks = ["big", "dogs", "bite", "men", "huge", "wolves", "snap", "hunters"]
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(4, 30))
    rows = np.vstack([
        base + 0.08 * rng.normal(size=(4, 30)),
        base + 0.08 * rng.normal(size=(4, 30)),
    ])
    raw = EmbeddingTable(toks, rows, Stage.RAW)
    table = normalize_for_links(reduce_dimensions(raw, 6)[0])
    return analogs, table


def bare_state(n_p=3, n_rb=3, n_po=4):
    shell = type("Shell", (), {"n_p": n_p, "n_rb": n_rb, "n_po": n_po})()
    return MappingState.for_banks(shell)


# ----------------------------------------------------------------- commit

def test_commit_zero_hypotheses_leaves_weights():
    state = bare_state()
    state.w_po[0, 1] = 0.4
    commit_mapping_connections(state)
    assert state.w_po[0, 1] == 0.4


def test_commit_single_hypothesis_relaxes_toward_one():
    state = bare_state()
    state.h_po[1, 2] = 7.0
    commit_mapping_connections(state)
    assert state.w_po[1, 2] == pytest.approx(0.9)
    assert state.w_po[2, 1] == pytest.approx(0.9)  # symmetric store
    assert state.h_po[1, 2] == 0.0  # hypotheses reset
    state.h_po[1, 2] = 3.0
    commit_mapping_connections(state)
    assert state.w_po[1, 2] == pytest.approx(0.99)


def test_commit_equal_rivals_cancel():
    state = bare_state()
    state.h_po[0, 1] = 5.0
    state.h_po[0, 2] = 5.0
    commit_mapping_connections(state)
    assert state.w_po[0, 1] == 0.0
    assert state.w_po[0, 2] == 0.0


def test_commit_unequal_rivals_leave_only_winner():
    state = bare_state()
    state.h_po[0, 1] = 10.0
    state.h_po[0, 2] = 4.0
    commit_mapping_connections(state)
    assert state.w_po[0, 1] == pytest.approx(0.9 * 0.6)
    assert state.w_po[0, 2] == 0.0


def test_commit_normalizes_by_global_max_across_layers():
    state = bare_state()
    state.h_po[0, 1] = 2.0
    state.h_rb[0, 0] = 8.0  # the global maximum lives in another layer
    commit_mapping_connections(state)
    assert state.w_po[0, 1] == pytest.approx(0.9 * 0.25)
    assert state.w_rb[0, 0] == pytest.approx(0.9)


def test_commit_scoped_to_driver_recipient_block():
    # weights between analogs not in the current driver/recipient pairing
    # survive a commit untouched
    analogs, table = twin_pair_setup()
    banks = instantiate_network(analogs, table)
    banks = load_driver(banks, analogs, analog="a1")
    move_to_recipient(banks, ["a2"])
    state = MappingState.for_banks(banks)
    outside = (2, 3)
    state.w_po[outside] = 0.7
    state.w_po[outside[::-1]] = 0.7
    d = int(np.flatnonzero(banks.driver_po)[0])
    r = int(np.flatnonzero(banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT)[0])
    state.h_po[d, r] = 1.0
    commit_mapping_connections(state, banks=banks)
    assert state.w_po[d, r] == pytest.approx(0.9)
    assert state.w_po[outside] == 0.7


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_property_commit_keeps_weights_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    state = bare_state(4, 4, 5)
    for h, w in state.weight_pairs():
        h += rng.uniform(0, 3, h.shape) * (rng.uniform(size=h.shape) < 0.5)
        w += rng.uniform(0, 1, w.shape)
    commit_mapping_connections(state)
    for _, w in state.weight_pairs():
        assert np.all(w >= 0) and np.all(w <= 1)


# ------------------------------------------------------------- hypotheses

def mapping_ready_banks():
    analogs, table = twin_pair_setup()
    banks = instantiate_network(analogs, table)
    banks = load_driver(banks, analogs, analog="a1")
    move_to_recipient(banks, ["a2"])
    return banks


def test_hypothesis_update_is_product_of_activations():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    d = int(np.flatnonzero(banks.driver_po)[0])
    r = int(np.flatnonzero(banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT)[0])
    banks.a_po[d] = 0.8
    banks.a_po[r] = 0.5
    update_mapping_hypotheses(state, banks)
    assert state.h_po[d, r] == pytest.approx(0.4)
    update_mapping_hypotheses(state, banks)
    assert state.h_po[d, r] == pytest.approx(0.8)


def test_hypothesis_update_needs_both_sides():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    banks.a_po[np.flatnonzero(banks.driver_po)] = 1.0  # recipient silent
    update_mapping_hypotheses(state, banks)
    assert np.all(state.h_po == 0)


def test_p_hypotheses_gated_by_mode():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    banks.a_p[:] = 1.0
    banks.mode_p[0] = 1.0
    banks.mode_p[1] = -1.0  # opposite modes: no hypothesis
    update_mapping_hypotheses(state, banks)
    assert state.h_p[0, 1] == 0.0
    banks.mode_p[1] = 1.0
    update_mapping_hypotheses(state, banks)
    assert state.h_p[0, 1] == pytest.approx(1.0)


def test_hypothesis_monotone_within_phase_set():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    seen = []

    class Watch(HypothesisObserver):
        def on_tick(self, banks):
            super().on_tick(banks)
            seen.append(self.state.h_po.copy())

    run_phase_set(banks, DynamicsParams(), mapping=state, observer=Watch(state), repeats=1)
    for before, after in zip(seen, seen[1:]):
        assert np.all(after >= before - 1e-12)


def test_child_correlation_aligned_and_reversed():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    ticks = 12
    pred = np.zeros((ticks, banks.n_rb))
    fill = np.zeros((ticks, banks.n_rb))
    d, r = 0, 2  # a1 rb0 drives, a2 rb0 receives (driver rbs 0,1; a2 rbs 2..)
    # identical temporal order: pred early, filler late, on both bindings
    pred[:4, d] = 1.0
    fill[6:10, d] = 1.0
    pred[:4, r] = 1.0
    fill[6:10, r] = 1.0
    child_correlation_bonus(state, banks, pred, fill)
    assert state.h_rb[d, r] == pytest.approx(1.0)

    state2 = MappingState.for_banks(banks)
    rev_pred, rev_fill = fill.copy(), pred.copy()  # reversed roles
    child_correlation_bonus(state2, banks, np.where([i == r for i in range(banks.n_rb)], rev_pred, pred),
                            np.where([i == r for i in range(banks.n_rb)], rev_fill, fill))
    # anti-aligned series correlate negatively; the floor keeps h at 0
    assert state2.h_rb[d, r] == 0.0


def test_child_correlation_constant_series_contributes_zero():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    pred = np.zeros((6, banks.n_rb))
    fill = np.zeros((6, banks.n_rb))
    pred[:, 0] = 0.5  # driver binding flat the whole set: zero variance
    fill[:, 0] = 0.5
    pred[:3, 2] = 1.0  # recipient binding varies
    child_correlation_bonus(state, banks, pred, fill)
    assert state.h_rb[0, 2] == 0.0
    assert np.all(np.isfinite(state.h_rb)) and np.all(state.h_rb >= 0)


def test_observer_rejects_unknown_variant():
    with pytest.raises(MappingError, match="variant"):
        HypothesisObserver(bare_state(), "fancy")


# ------------------------------------------------------------ feedback

def test_mapping_feedback_single_committed_pair():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    d = int(np.flatnonzero(banks.driver_po)[0])
    r = int(np.flatnonzero(banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT)[0])
    state.w_po[d, r] = state.w_po[r, d] = 1.0
    banks.a_po[d] = 1.0
    _, _, m_po = state.net_feedback(banks)
    assert m_po[r] == pytest.approx(3.0 * 1.0 * 1.0 - 1.0 - 1.0)
    assert m_po[d] == 0.0  # no connection of d points into the driver


def test_mapping_feedback_raises_recipient_net():
    banks = mapping_ready_banks()
    state = MappingState.for_banks(banks)
    d = int(np.flatnonzero(banks.driver_po)[0])
    r = int(np.flatnonzero(banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT)[0])
    banks.a_po[d] = 1.0
    update_p_modes(banks)
    _, _, base, _ = compute_net_inputs(banks, DynamicsParams(), mapping=state)
    state.w_po[d, r] = state.w_po[r, d] = 1.0
    _, _, mapped, _ = compute_net_inputs(banks, DynamicsParams(), mapping=state)
    assert mapped[r] > base[r]


# ------------------------------------------------------------- retrieval

class FakeTrace:
    def __init__(self, p, rb, po):
        self._d = {"P": np.asarray(p), "RB": np.asarray(rb), "PO": np.asarray(po)}

    def stacked(self, layer):
        return self._d[layer]


class FixedRng:
    def __init__(self, value):
        self.value = value

    def uniform(self, size=None):
        return np.full(size, self.value)


def test_luce_three_to_one_with_half_threshold():
    analogs, table = twin_pair_setup()
    doc_banks = instantiate_network(analogs, table)
    # a1, a2 both in memory; craft peaks so scores are 3 and 1
    p = np.zeros((2, doc_banks.n_p))
    rb = np.zeros((2, doc_banks.n_rb))
    po = np.zeros((2, doc_banks.n_po))
    p_idx, rb_idx, po_idx = doc_banks.units_of_analog("a1")
    po[1, po_idx[0]] = 1.0
    po[1, po_idx[1]] = 1.0
    po[1, po_idx[2]] = 1.0
    q_idx = doc_banks.units_of_analog("a2")[2]
    po[1, q_idx[0]] = 1.0
    chosen = luce_retrieve(doc_banks, FakeTrace(p, rb, po), FixedRng(0.5))
    # probabilities 0.75 and 0.25; only the first clears r=0.5
    assert chosen == ["a1"]
    assert doc_banks.bank_of("a1") is Bank.RECIPIENT
    assert doc_banks.bank_of("a2") is Bank.LTM


def test_luce_all_zero_scores_retrieve_nothing():
    analogs, table = twin_pair_setup()
    banks = instantiate_network(analogs, table)
    z = FakeTrace(np.zeros((1, banks.n_p)), np.zeros((1, banks.n_rb)), np.zeros((1, banks.n_po)))
    assert luce_retrieve(banks, z, FixedRng(0.5)) == []
    assert banks.analogs_in(Bank.LTM) == ["a1", "a2"]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2))
def test_property_luce_zero_threshold_retrieves_every_scorer(scores):
    # choice probabilities normalize over the pool, so with r_i = 0 any
    # analog with positive peak mass must clear its draw
    analogs, table = twin_pair_setup()
    banks = instantiate_network(analogs, table)
    p = np.zeros((1, banks.n_p))
    rb = np.zeros((1, banks.n_rb))
    po = np.zeros((1, banks.n_po))
    for name, s in zip(["a1", "a2"], scores):
        p[0, banks.units_of_analog(name)[0][0]] = s
    chosen = luce_retrieve(banks, FakeTrace(p, rb, po), FixedRng(0.0))
    assert chosen == [n for n, s in zip(["a1", "a2"], scores) if s > 0]


# ---------------------------------------------------------- learning loop

def test_simulation_requires_two_analogs():
    analogs, table = twin_pair_setup()
    with pytest.raises(MappingError, match="2 analogs"):
        run_simulation(analogs[:1], table, SimulationConfig(iterations=1, repetitions=1))


def test_config_validation():
    with pytest.raises(MappingError):
        SimulationConfig(iterations=0)
    with pytest.raises(MappingError):
        SimulationConfig(hebbian_variant="fast")
    with pytest.raises(MappingError):
        SimulationConfig(eta=0.0)


@pytest.fixture(scope="module")
def small_run():
    analogs, table = twin_pair_setup()
    cfg = SimulationConfig(iterations=10, repetitions=2, seed=3, hebbian_variant="plain")
    return run_simulation(analogs, table, cfg)


def test_simulation_learns_the_twin(small_run):
    finals = small_run.precision_series[:, -1]
    assert np.nanmax(finals) == pytest.approx(1.0)
    assert small_run.prop_mapping.shape == (2, 2)


def test_simulation_deterministic(small_run):
    analogs, table = twin_pair_setup()
    cfg = SimulationConfig(iterations=10, repetitions=2, seed=3, hebbian_variant="plain")
    again = run_simulation(analogs, table, cfg)
    assert np.array_equal(small_run.precision_series, again.precision_series, equal_nan=True)
    assert np.array_equal(small_run.prop_mapping, again.prop_mapping)


def test_exclusivity_on_structural_twins(small_run):
    # each driver proposition's strongest connection is its counterpart
    m = small_run.prop_mapping
    assert m[0, 1] > 0
    assert np.argmax(m[0]) == 1 and np.argmax(m[1]) == 0


def test_structural_truth_matches_template_twins():
    corpus, cats = generate_corpus()
    analogs = parse_proposition_file(corpus)
    table = normalize_for_links(reduce_dimensions(generate_embeddings(cats, dim=40, seed=1), 6)[0])
    banks = instantiate_network(analogs, table)
    idx, truth = structural_truth(banks, analogs)
    assert truth.shape == (32, 32)
    assert truth.sum() == 32  # one twin each, both orientations
    assert np.array_equal(truth, truth.T)
    # twins pair only across the matching themed analog
    names = [banks.p_ids[i] for i in idx]
    for i, j in zip(*np.nonzero(truth)):
        a, b = names[i].split("/")[0], names[j].split("/")[0]
        assert {a, b} in ({"yard", "wild"}, {"sea", "sky"})


def test_top_level_p_indices_order():
    analogs, table = twin_pair_setup()
    banks = instantiate_network(analogs, table)
    idx = top_level_p_indices(banks, analogs)
    assert [banks.p_ids[i] for i in idx] == ["a1/p1", "a2/q1"]


# ---------------------------------------------------------------- exports

def test_csv_exports(tmp_path, small_run):
    mpath = tmp_path / "mapping.csv"
    write_mapping_csv(mpath, small_run.prop_ids, small_run.prop_mapping)
    lines = mpath.read_text().splitlines()
    assert lines[0] == "driver_prop,recipient_prop,weight"
    assert len(lines) == 2  # one unordered pair
    ppath = tmp_path / "precision.csv"
    write_precision_csv(ppath, small_run.mean_precision())
    lines = ppath.read_text().splitlines()
    assert lines[0] == "iteration,precision"
    assert len(lines) == 11
    assert lines[1].startswith("0,")
