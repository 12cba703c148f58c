"""Retrieval and mapping: Luce-choice retrieval from memory, Hebbian
mapping-hypothesis accumulation, competitive connection commitment, and the
outer self-supervised learning loop.

Mapping connections live in one symmetric store per layer, indexed by global
unit index on both axes. Hypotheses are directed (driver row, recipient
column) while a phase set runs and are folded into the symmetric store at
commit time. Connected units support each other across banks on later
iterations, which is what makes retrieval increasingly biased toward
already-mapped analogs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsParams, run_phase_set
from .evaluation import precision
from .network import Bank, instantiate_network, load_driver, move_to_recipient, return_to_ltm


class MappingError(ValueError):
    pass


LAYERS = ("P", "RB", "PO")


@dataclass
class MappingState:
    """Per-layer symmetric connection weights plus in-flight hypotheses."""

    w_p: np.ndarray
    w_rb: np.ndarray
    w_po: np.ndarray
    h_p: np.ndarray
    h_rb: np.ndarray
    h_po: np.ndarray

    @classmethod
    def for_banks(cls, banks):
        def sq(n):
            return np.zeros((n, n))

        return cls(
            w_p=sq(banks.n_p), w_rb=sq(banks.n_rb), w_po=sq(banks.n_po),
            h_p=sq(banks.n_p), h_rb=sq(banks.n_rb), h_po=sq(banks.n_po),
        )

    def weight_pairs(self):
        return ((self.h_p, self.w_p), (self.h_rb, self.w_rb), (self.h_po, self.w_po))

    def reset_hypotheses(self):
        self.h_p[:] = 0.0
        self.h_rb[:] = 0.0
        self.h_po[:] = 0.0

    def net_feedback(self, banks):
        """Mapping term per unit: sum over connected driver units j of
        3*a_j*w_ij - Max(Map(i)) - Max(Map(j)). Zero wherever no connection
        crosses into the driver."""
        return (
            _feedback_layer(self.w_p, banks.a_p, banks.driver_p),
            _feedback_layer(self.w_rb, banks.a_rb, banks.driver_rb),
            _feedback_layer(self.w_po, banks.a_po, banks.driver_po),
        )


def _feedback_layer(w, a, driver_mask):
    conn = (w > 0) & driver_mask[np.newaxis, :]
    if not conn.any():
        return np.zeros(a.shape)
    max_map = w.max(axis=1)
    support = 3.0 * (np.where(conn, w, 0.0) @ (a * driver_mask))
    n_conn = conn.sum(axis=1)
    partner_penalty = conn @ max_map
    return support - n_conn * max_map - partner_penalty


def update_mapping_hypotheses(state, banks):
    """One tick of plain Hebbian accumulation: h[i,j] += a_i * a_j for every
    same-layer (driver unit, recipient unit) pair. P pairs only count while
    the two Ps are in the same mode."""
    recip = banks.bank_of_analog[banks.analog_of_p] == Bank.RECIPIENT
    drive_p = np.where(banks.driver_p, banks.a_p, 0.0)
    recip_p = np.where(recip, banks.a_p, 0.0)
    for m in (-1.0, 0.0, 1.0):
        sel = banks.mode_p == m
        state.h_p += np.outer(drive_p * sel, recip_p * sel)

    recip_rb = banks.bank_of_analog[banks.analog_of_rb] == Bank.RECIPIENT
    state.h_rb += np.outer(
        np.where(banks.driver_rb, banks.a_rb, 0.0),
        np.where(recip_rb, banks.a_rb, 0.0),
    )
    recip_po = banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT
    state.h_po += np.outer(
        np.where(banks.driver_po, banks.a_po, 0.0),
        np.where(recip_po, banks.a_po, 0.0),
    )
    return state


def rb_children_activations(banks):
    """Current activation of each binding's two children: (pred, filler)."""
    pred = banks.a_po[banks.rb_pred_po]
    filler = np.where(
        banks.rb_filler_po >= 0,
        banks.a_po[np.maximum(banks.rb_filler_po, 0)],
        banks.a_p[np.maximum(banks.rb_filler_p, 0)],
    )
    return pred, filler


def child_correlation_bonus(state, banks, pred_series, filler_series):
    """Correlation-modified Hebbian term: each (driver RB, recipient RB)
    hypothesis additionally receives Pearson's correlation of the bindings'
    child activation series over the completed phase set, computed on the
    pred and filler series laid end to end. Degenerate (constant) series
    contribute 0; the hypothesis store stays floored at 0."""
    series = np.concatenate([np.asarray(pred_series), np.asarray(filler_series)], axis=0)
    sd = series.std(axis=0)
    centered = series - series.mean(axis=0)
    recip_rb = banks.bank_of_analog[banks.analog_of_rb] == Bank.RECIPIENT
    for i in np.flatnonzero(banks.driver_rb):
        if sd[i] == 0:
            continue
        for j in np.flatnonzero(recip_rb):
            if sd[j] == 0:
                continue
            r = float(centered[:, i] @ centered[:, j]) / (len(series) * sd[i] * sd[j])
            state.h_rb[i, j] += r
    np.maximum(state.h_rb, 0.0, out=state.h_rb)
    return state


class HypothesisObserver:
    """run_phase_set observer that does the per-tick Hebbian update and, for
    the correlation variant, buffers child activations for the set-end
    bonus."""

    def __init__(self, state, variant="plain"):
        if variant not in ("plain", "child_corr"):
            raise MappingError(f"unknown hebbian variant {variant!r}")
        self.state = state
        self.variant = variant
        self.pred_series = []
        self.filler_series = []

    def on_tick(self, banks):
        update_mapping_hypotheses(self.state, banks)
        if self.variant == "child_corr":
            pred, filler = rb_children_activations(banks)
            self.pred_series.append(pred)
            self.filler_series.append(filler)

    def finalize(self, banks):
        if self.variant == "child_corr" and self.pred_series:
            child_correlation_bonus(self.state, banks, self.pred_series, self.filler_series)
        return self.state


def commit_mapping_connections(state, eta=0.9, banks=None):
    """Fold hypotheses into connection weights.

    Hypotheses are normalized by the single largest hypothesis anywhere in
    the store, each pair is penalized by its strongest rival in the same row
    or column (clipped at 0), and weights relax toward the result:
    w += eta*(h' - w), clipped to [0,1]. The hypothesis/connection index
    space is (driver unit, recipient unit) pairs, so with banks given the
    relaxation touches exactly that block, in both orientations of the
    symmetric store; connections between uninvolved analogs keep their
    weights. Without banks the update covers pairs holding hypothesis mass.
    Hypotheses reset afterwards.
    """
    h_max = max(h.max() for h, _ in state.weight_pairs())
    if h_max <= 0:
        state.reset_hypotheses()
        return state
    blocks = _commit_blocks(state, banks)
    for (h, w), (rows, cols) in zip(state.weight_pairs(), blocks):
        if rows.size == 0 or cols.size == 0:
            continue
        norm = h / h_max
        # strongest rival sharing the row or the column; a pair that is
        # itself the maximum competes with the runner-up, not itself
        rival = np.maximum(_runner_up(norm, axis=1), _runner_up(norm, axis=0))
        contender = np.clip(norm - rival, 0.0, None)
        updated = np.clip(w + eta * (contender - w), 0.0, 1.0)
        block = np.ix_(rows, cols)
        w[block] = updated[block]
        w[np.ix_(cols, rows)] = updated[block].T
    state.reset_hypotheses()
    return state


def _commit_blocks(state, banks):
    if banks is None:
        return [
            (np.flatnonzero(h.any(axis=1)), np.flatnonzero(h.any(axis=0)))
            for h, _ in state.weight_pairs()
        ]
    recip_p = banks.bank_of_analog[banks.analog_of_p] == Bank.RECIPIENT
    recip_rb = banks.bank_of_analog[banks.analog_of_rb] == Bank.RECIPIENT
    recip_po = banks.bank_of_analog[banks.analog_of_po] == Bank.RECIPIENT
    return [
        (np.flatnonzero(banks.driver_p), np.flatnonzero(recip_p)),
        (np.flatnonzero(banks.driver_rb), np.flatnonzero(recip_rb)),
        (np.flatnonzero(banks.driver_po), np.flatnonzero(recip_po)),
    ]


def _runner_up(matrix, axis):
    """Largest value along axis excluding each entry itself."""
    if matrix.shape[axis] < 2:
        return np.zeros_like(matrix)
    top2 = np.sort(matrix, axis=axis)
    if axis == 1:
        first, second = top2[:, -1:], top2[:, -2:-1]
    else:
        first, second = top2[-1:, :], top2[-2:-1, :]
    return np.where(matrix == first, second, first)


def luce_retrieve(banks, trace, rng):
    """Probabilistic retrieval from memory by the Luce choice rule.

    Each memory analog scores the sum over its units of the peak activation
    they reached during the driver pass. Scores normalize to choice
    probabilities; analog i moves into the recipient iff p_i > r_i with r_i
    drawn uniform per analog. All-zero scores retrieve nothing.
    """
    pool = banks.analogs_in(Bank.LTM)
    if not pool:
        return []
    peaks = {
        "P": trace.stacked("P").max(axis=0),
        "RB": trace.stacked("RB").max(axis=0),
        "PO": trace.stacked("PO").max(axis=0),
    }
    scores = np.empty(len(pool))
    for k, name in enumerate(pool):
        p_idx, rb_idx, po_idx = banks.units_of_analog(name)
        scores[k] = peaks["P"][p_idx].sum() + peaks["RB"][rb_idx].sum() + peaks["PO"][po_idx].sum()
    total = scores.sum()
    if total <= 0:
        return []
    probs = scores / total
    draws = rng.uniform(size=len(pool))
    chosen = [name for name, p, r in zip(pool, probs, draws) if p > r]
    if chosen:
        move_to_recipient(banks, chosen)
    return chosen


# ------------------------------------------------------------- learning loop

@dataclass
class SimulationConfig:
    iterations: int = 100
    repetitions: int = 10
    seed: int = 0
    hebbian_variant: str = "plain"
    eta: float = 0.9
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    retrieval_repeats: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.repetitions < 1:
            raise MappingError("iterations and repetitions must be >= 1")
        if self.hebbian_variant not in ("plain", "child_corr"):
            raise MappingError(f"unknown hebbian variant {self.hebbian_variant!r}")
        if not 0 < self.eta <= 1:
            raise MappingError("eta must lie in (0, 1]")


@dataclass
class SimulationResult:
    precision_series: np.ndarray  # (repetitions, iterations), nan where undefined
    prop_ids: list
    prop_mapping: np.ndarray  # final proposition-level matrix, last repetition
    per_rep_mapping: list
    retrieved_per_iteration: np.ndarray

    def mean_precision(self):
        return np.nanmean(self.precision_series, axis=0)


def top_level_p_indices(banks, analogs):
    """Global P indices of every top-level proposition, corpus order."""
    lookup = {uid: i for i, uid in enumerate(banks.p_ids)}
    out = []
    for analog in analogs:
        out.extend(lookup[uid] for uid in analog.top_level)
    return out


def _shape_signature(analog, p_uid):
    by_uid = {p.uid: p for p in analog.p_units}
    rb_by_uid = {r.uid: r for r in analog.rb_units}
    po_by_uid = {o.uid: o for o in analog.po_units}

    def sig(uid):
        parts = []
        for rb_uid in by_uid[uid].rbs:
            rb = rb_by_uid[rb_uid]
            pred = "t" if not po_by_uid[rb.pred].is_empty else "-"
            if rb.filler_is_prop:
                obj = sig(rb.filler)
            elif po_by_uid[rb.filler].is_empty:
                obj = "-"
            else:
                obj = "t"
            parts.append((pred, obj))
        return tuple(parts)

    return sig(p_uid)


def structural_truth(banks, analogs):
    """Reference counterpart matrix over top-level propositions: 1 where two
    propositions from different analogs share their full structural shape
    (binding count, slot kinds, embedding pattern), else 0."""
    idx = top_level_p_indices(banks, analogs)
    sigs = []
    owner = []
    for ai, analog in enumerate(analogs):
        for uid in analog.top_level:
            sigs.append(_shape_signature(analog, uid))
            owner.append(ai)
    n = len(sigs)
    truth = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and owner[i] != owner[j] and sigs[i] == sigs[j]:
                truth[i, j] = 1.0
    return idx, truth


def proposition_mapping_matrix(state, prop_indices):
    return state.w_p[np.ix_(prop_indices, prop_indices)]


def run_simulation(analogs, table, config):
    """The outer loop: repeatedly drive one analog, retrieve from memory,
    map against whatever was retrieved, commit, and score the
    proposition-level mapping against the structural reference."""
    if len(analogs) < 2:
        raise MappingError("mapping requires at least 2 analogs")
    seeds = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    probe = instantiate_network(analogs, table)
    prop_idx, truth = structural_truth(probe, analogs)
    prop_ids = [probe.p_ids[i] for i in prop_idx]

    all_precision = np.full((config.repetitions, config.iterations), np.nan)
    retrieved_counts = np.zeros((config.repetitions, config.iterations), dtype=int)
    final_maps = []

    for rep, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        banks = instantiate_network(analogs, table)
        state = MappingState.for_banks(banks)
        for it in range(config.iterations):
            load_driver(banks, analogs, rng=rng)
            banks, trace = run_phase_set(
                banks, config.dynamics, mapping=state,
                repeats=config.retrieval_repeats, record=True,
            )
            chosen = luce_retrieve(banks, trace, rng)
            retrieved_counts[rep, it] = len(chosen)
            if chosen:
                banks.reset_state()  # mapping set starts from rest
                observer = HypothesisObserver(state, config.hebbian_variant)
                banks, _ = run_phase_set(banks, config.dynamics, mapping=state, observer=observer)
                observer.finalize(banks)
                commit_mapping_connections(state, config.eta, banks=banks)
            return_to_ltm(banks)
            pred = proposition_mapping_matrix(state, prop_idx)
            score = precision(pred, truth)
            if score is not None:
                all_precision[rep, it] = score
        final_maps.append(proposition_mapping_matrix(state, prop_idx).copy())

    return SimulationResult(
        precision_series=all_precision,
        prop_ids=prop_ids,
        prop_mapping=final_maps[-1],
        per_rep_mapping=final_maps,
        retrieved_per_iteration=retrieved_counts,
    )


# ---------------------------------------------------------------- exports

def write_mapping_csv(path, prop_ids, matrix):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("driver_prop,recipient_prop,weight\n")
        for i in range(len(prop_ids)):
            for j in range(i + 1, len(prop_ids)):
                fh.write(f"{prop_ids[i]},{prop_ids[j]},{matrix[i, j]:.6f}\n")


def write_precision_csv(path, mean_series):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,precision\n")
        for it, value in enumerate(mean_series):
            text = "" if np.isnan(value) else f"{value:.6f}"
            fh.write(f"{it},{text}\n")
