"""Unit graph assembly: memory banks, adjacency structure, link weights.

State is array-backed: one index space per layer (P, RB, PO) spanning every
analog, with bank membership tracked per analog and derived masks rebuilt
when an analog moves. Adjacency is precomputed once as 0/1 float matrices so
the tick update is a handful of matrix-vector products; moving analogs
between banks never touches structure, only the masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .embeddings import EmbeddingTable, Stage


class NetworkError(ValueError):
    pass


class Bank(IntEnum):
    DRIVER = 0
    RECIPIENT = 1
    LTM = 2


TAU_RETURN = 10.0


@dataclass
class MemoryBanks:
    # identities
    analog_names: list
    p_ids: list
    rb_ids: list
    po_ids: list
    po_tokens: list
    analog_of_p: np.ndarray
    analog_of_rb: np.ndarray
    analog_of_po: np.ndarray

    # structure, fixed after construction
    p_child_rb: np.ndarray  # (n_p, n_rb) P's own role bindings
    p_above_rb: np.ndarray  # (n_p, n_rb) bindings taking P as filler
    rb_owner_p: np.ndarray  # (n_rb,) index of the owning P
    rb_pred_po: np.ndarray  # (n_rb,) index of the predicate PO
    rb_filler_po: np.ndarray  # (n_rb,) object PO index, -1 when the filler is a P
    rb_filler_p: np.ndarray  # (n_rb,) filler P index, -1 when the filler is a PO
    rb_po: np.ndarray  # (n_rb, n_po) membership in either slot
    po_share: np.ndarray  # (n_po, n_po) shares a binding, zero diagonal
    po_child_p: np.ndarray  # (n_po, n_p) P fills a binding the PO belongs to
    po_is_pred: np.ndarray
    po_is_empty: np.ndarray
    links: np.ndarray  # (n_po, n_sem)

    # mutable state
    bank_of_analog: np.ndarray
    a_p: np.ndarray
    a_rb: np.ndarray
    a_po: np.ndarray
    mode_p: np.ndarray  # +1 parent, -1 child, 0 neutral
    inhib_rb: np.ndarray
    inhib_po: np.ndarray
    # inhibitor output seen by the next tick's net inputs: true only on the
    # tick following a threshold crossing
    fired_rb: np.ndarray = None
    fired_po: np.ndarray = None
    sem: np.ndarray = None
    tau_l: float = TAU_RETURN
    tau_g: float = TAU_RETURN
    firing_order: list = field(default_factory=list)

    # bank masks, derived; rebuilt by refresh_masks after any move
    driver_p: np.ndarray = None
    driver_rb: np.ndarray = None
    driver_po: np.ndarray = None
    outside_p: np.ndarray = None
    outside_rb: np.ndarray = None
    outside_po: np.ndarray = None

    def __post_init__(self):
        if self.fired_rb is None:
            self.fired_rb = np.zeros(len(self.rb_ids), dtype=bool)
        if self.fired_po is None:
            self.fired_po = np.zeros(len(self.po_ids), dtype=bool)
        if self.sem is None:
            self.sem = np.zeros(self.links.shape[1])
        self.refresh_masks()

    @property
    def n_p(self):
        return len(self.p_ids)

    @property
    def n_rb(self):
        return len(self.rb_ids)

    @property
    def n_po(self):
        return len(self.po_ids)

    @property
    def n_sem(self):
        return self.links.shape[1]

    def refresh_masks(self):
        in_driver = self.bank_of_analog == Bank.DRIVER
        # recipient and LTM units follow the same update rules; "outside"
        # masks cover both so the lateral terms compete across them
        self.driver_p = in_driver[self.analog_of_p]
        self.driver_rb = in_driver[self.analog_of_rb]
        self.driver_po = in_driver[self.analog_of_po]
        outside = ~in_driver
        self.outside_p = outside[self.analog_of_p]
        self.outside_rb = outside[self.analog_of_rb]
        self.outside_po = outside[self.analog_of_po]

    def analog_index(self, name):
        try:
            return self.analog_names.index(name)
        except ValueError:
            raise NetworkError(f"unknown analog {name!r}") from None

    def bank_of(self, name):
        return Bank(int(self.bank_of_analog[self.analog_index(name)]))

    def analogs_in(self, bank):
        return [n for n, b in zip(self.analog_names, self.bank_of_analog) if b == bank]

    def units_of_analog(self, name):
        """(p indices, rb indices, po indices) belonging to one analog."""
        ai = self.analog_index(name)
        return (
            np.flatnonzero(self.analog_of_p == ai),
            np.flatnonzero(self.analog_of_rb == ai),
            np.flatnonzero(self.analog_of_po == ai),
        )

    def reset_state(self):
        self.a_p[:] = 0.0
        self.a_rb[:] = 0.0
        self.a_po[:] = 0.0
        self.mode_p[:] = 0.0
        self.inhib_rb[:] = 0.0
        self.inhib_po[:] = 0.0
        self.fired_rb[:] = False
        self.fired_po[:] = False
        self.sem[:] = 0.0
        self.tau_l = TAU_RETURN
        self.tau_g = TAU_RETURN


def instantiate_network(analogs, table):
    """Build banks from parsed analogs plus a link-ready embedding table.

    Every analog starts in long-term memory with zero activations and
    inhibitors. PO link weights are the embedding row of the unit's token;
    empty-slot POs keep all-zero links.
    """
    if not isinstance(table, EmbeddingTable) or table.stage is not Stage.LINK_READY:
        raise NetworkError("need a link-ready embedding table (run normalize_for_links)")
    names = [a.name for a in analogs]

    p_ids, rb_ids, po_ids, po_tokens = [], [], [], []
    analog_of_p, analog_of_rb, analog_of_po = [], [], []
    po_kind_pred, po_empty = [], []
    p_index, po_index = {}, {}

    for ai, analog in enumerate(analogs):
        for p in analog.p_units:
            p_index[p.uid] = len(p_ids)
            p_ids.append(p.uid)
            analog_of_p.append(ai)
        for o in analog.po_units:
            po_index[o.uid] = len(po_ids)
            po_ids.append(o.uid)
            po_tokens.append(o.token)
            po_kind_pred.append(o.kind.value == "pred")
            po_empty.append(o.is_empty)
            analog_of_po.append(ai)

    n_p, n_po = len(p_ids), len(po_ids)
    rb_owner, rb_pred, rb_fpo, rb_fp = [], [], [], []
    for ai, analog in enumerate(analogs):
        rb_lookup = {r.uid: r for r in analog.rb_units}
        for p in analog.p_units:
            for rb_uid in p.rbs:
                rb = rb_lookup[rb_uid]
                rb_ids.append(rb.uid)
                analog_of_rb.append(ai)
                rb_owner.append(p_index[p.uid])
                rb_pred.append(po_index[rb.pred])
                if rb.filler_is_prop:
                    rb_fp.append(p_index[rb.filler])
                    rb_fpo.append(-1)
                else:
                    rb_fpo.append(po_index[rb.filler])
                    rb_fp.append(-1)
    n_rb = len(rb_ids)

    p_child_rb = np.zeros((n_p, n_rb))
    p_above_rb = np.zeros((n_p, n_rb))
    rb_po = np.zeros((n_rb, n_po))
    for r in range(n_rb):
        p_child_rb[rb_owner[r], r] = 1.0
        rb_po[r, rb_pred[r]] = 1.0
        if rb_fp[r] >= 0:
            p_above_rb[rb_fp[r], r] = 1.0
        else:
            rb_po[r, rb_fpo[r]] = 1.0

    po_share = (rb_po.T @ rb_po > 0).astype(float)
    np.fill_diagonal(po_share, 0.0)
    # P fills binding r and PO o sits in r as well -> o and the P share r
    po_child_p = (rb_po.T @ p_above_rb.T > 0).astype(float)

    n_sem = table.dim
    links = np.zeros((n_po, n_sem))
    for idx, token in enumerate(po_tokens):
        if token is None:
            continue
        if token not in table:
            raise NetworkError(f"token {token!r} has no embedding row")
        links[idx] = table.vector(token)

    return MemoryBanks(
        analog_names=names,
        p_ids=p_ids,
        rb_ids=rb_ids,
        po_ids=po_ids,
        po_tokens=po_tokens,
        analog_of_p=np.asarray(analog_of_p, dtype=int),
        analog_of_rb=np.asarray(analog_of_rb, dtype=int),
        analog_of_po=np.asarray(analog_of_po, dtype=int),
        p_child_rb=p_child_rb,
        p_above_rb=p_above_rb,
        rb_owner_p=np.asarray(rb_owner, dtype=int),
        rb_pred_po=np.asarray(rb_pred, dtype=int),
        rb_filler_po=np.asarray(rb_fpo, dtype=int),
        rb_filler_p=np.asarray(rb_fp, dtype=int),
        rb_po=rb_po,
        po_share=po_share,
        po_child_p=po_child_p,
        po_is_pred=np.asarray(po_kind_pred, dtype=bool),
        po_is_empty=np.asarray(po_empty, dtype=bool),
        links=links,
        bank_of_analog=np.full(len(names), Bank.LTM, dtype=int),
        a_p=np.zeros(n_p),
        a_rb=np.zeros(n_rb),
        a_po=np.zeros(n_po),
        mode_p=np.zeros(n_p),
        inhib_rb=np.zeros(n_rb),
        inhib_po=np.zeros(n_po),
        sem=np.zeros(n_sem),
    )


def _surface_po_indices(banks, analogs_by_name, name):
    """Driver firing order: surface-order POs of each top-level proposition."""
    analog = analogs_by_name[name]
    lookup = {uid: i for i, uid in enumerate(banks.po_ids)}
    order = []
    for p_uid in analog.top_level:
        for po_uid in analog.surface_pos(p_uid):
            order.append(lookup[po_uid])
    return order


def load_driver(banks, analogs, analog=None, rng=None):
    """Move one LTM analog into the driver and set the firing order.

    analog names the choice explicitly; otherwise rng picks uniformly from
    LTM. The whole network state is zeroed: a fresh driver pass starts from
    rest, with no carried-over inhibitor charge.
    """
    if analog is None:
        pool = banks.analogs_in(Bank.LTM)
        if not pool:
            raise NetworkError("no analog in long-term memory to load")
        if rng is None:
            raise NetworkError("need an rng when no analog is named")
        analog = pool[int(rng.integers(len(pool)))]
    if banks.bank_of(analog) is not Bank.LTM:
        raise NetworkError(f"analog {analog!r} is not in long-term memory")
    banks.bank_of_analog[banks.analog_index(analog)] = Bank.DRIVER
    banks.refresh_masks()
    banks.reset_state()
    by_name = {a.name: a for a in analogs}
    banks.firing_order = _surface_po_indices(banks, by_name, analog)
    return banks


def move_to_recipient(banks, names):
    for name in names:
        if banks.bank_of(name) is not Bank.LTM:
            raise NetworkError(f"analog {name!r} is not in long-term memory")
        banks.bank_of_analog[banks.analog_index(name)] = Bank.RECIPIENT
    banks.refresh_masks()
    return banks


def return_to_ltm(banks, banks_to_clear=(Bank.DRIVER, Bank.RECIPIENT)):
    for bank in banks_to_clear:
        for name in banks.analogs_in(bank):
            banks.bank_of_analog[banks.analog_index(name)] = Bank.LTM
    banks.firing_order = []
    banks.refresh_masks()
    return banks
