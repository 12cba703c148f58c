"""Symbolic proposition corpus: JSON schema, validation, unit construction.

A corpus is a list of analogs; an analog is a list of propositions; a
proposition binds up to two role-filler pairs. Each pair has a predicate
slot (a token or empty) and an object slot (a token, empty, or a reference
to another proposition of the same analog, which is how embedding works).
The subject of a clause sits in a pair with an empty predicate slot.

This module builds the symbolic unit inventory (P, RB, PO records) per
analog. Tokens are deduplicated within an analog and kept separate across
analogs; empty slots get their own PO unit per pair so that no two pairs
share an empty unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class CorpusError(ValueError):
    pass


class POKind(str, Enum):
    PRED = "pred"
    OBJ = "obj"


@dataclass
class POUnit:
    uid: str
    kind: POKind
    token: str | None  # None marks an empty slot
    # reserved: some encodings let an object unit stand proxy for an embedded
    # proposition instead of referencing the P unit directly; the loader here
    # always references the P unit, so this stays None
    higher_prop: str | None = None

    @property
    def is_empty(self):
        return self.token is None


@dataclass
class RBUnit:
    uid: str
    pred: str  # PO uid
    filler: str  # PO uid or P uid
    filler_is_prop: bool


@dataclass
class PUnit:
    uid: str
    prop_id: str
    rbs: list = field(default_factory=list)  # RB uids, order preserved, length 1 or 2


@dataclass
class Analog:
    """One analog's full symbolic inventory in deterministic order."""

    name: str
    p_units: list
    rb_units: list
    po_units: list
    prop_order: list  # P uids in corpus order
    top_level: list  # P uids never used as fillers

    def _index(self):
        ps = {p.uid: p for p in self.p_units}
        rbs = {r.uid: r for r in self.rb_units}
        pos = {o.uid: o for o in self.po_units}
        return ps, rbs, pos

    def surface_pos(self, p_uid):
        """PO uids of a proposition in surface order, empty slots skipped.

        Embedded propositions contribute their own surface sequence in place
        of the object slot that references them.
        """
        ps, rbs, pos = self._index()
        out = []

        def walk(uid):
            for rb_uid in ps[uid].rbs:
                rb = rbs[rb_uid]
                if not pos[rb.pred].is_empty:
                    out.append(rb.pred)
                if rb.filler_is_prop:
                    walk(rb.filler)
                elif not pos[rb.filler].is_empty:
                    out.append(rb.filler)

        walk(p_uid)
        return out

    def surface_words(self, p_uid):
        _, _, pos = self._index()
        return [pos[uid].token for uid in self.surface_pos(p_uid)]


def _fail(path, message):
    raise CorpusError(f"{path}: {message}")


def _require(cond, path, message):
    if not cond:
        _fail(path, message)


def _parse_slot(slot, path, allow_prop):
    """null | {"token": str} | {"prop": id} (object slots only)."""
    if slot is None:
        return ("empty", None)
    _require(isinstance(slot, dict), path, f"expected null or object, got {type(slot).__name__}")
    keys = set(slot)
    if keys == {"token"}:
        token = slot["token"]
        _require(isinstance(token, str) and token, path, "token must be a non-empty string")
        return ("token", token)
    if keys == {"prop"}:
        _require(allow_prop, path, "predicate slots cannot reference a proposition")
        ref = slot["prop"]
        _require(isinstance(ref, str) and ref, path, "prop reference must be a non-empty string")
        return ("prop", ref)
    _fail(path, f"expected exactly one of 'token' or 'prop', got keys {sorted(keys)}")


def _build_analog(entry, path):
    _require(isinstance(entry, dict), path, "analog must be an object")
    name = entry.get("name")
    _require(isinstance(name, str) and name, f"{path}.name", "analog name must be a non-empty string")
    props = entry.get("propositions")
    _require(isinstance(props, list), f"{path}.propositions", "must be a list")

    parsed = {}  # prop id -> list of parsed rb slots
    order = []
    for i, prop in enumerate(props):
        ppath = f"{path}.propositions[{i}]"
        _require(isinstance(prop, dict), ppath, "proposition must be an object")
        pid = prop.get("id")
        _require(isinstance(pid, str) and pid, f"{ppath}.id", "id must be a non-empty string")
        _require(pid not in parsed, f"{ppath}.id", f"duplicate proposition id {pid!r}")
        rbs = prop.get("rbs")
        _require(isinstance(rbs, list), f"{ppath}.rbs", "must be a list")
        _require(1 <= len(rbs) <= 2, f"{ppath}.rbs", f"need 1 or 2 role bindings, got {len(rbs)}")
        slots = []
        for k, rb in enumerate(rbs):
            rpath = f"{ppath}.rbs[{k}]"
            _require(isinstance(rb, dict), rpath, "role binding must be an object")
            _require(set(rb) == {"pred", "obj"}, rpath, "role binding needs exactly 'pred' and 'obj'")
            pred = _parse_slot(rb["pred"], f"{rpath}.pred", allow_prop=False)
            obj = _parse_slot(rb["obj"], f"{rpath}.obj", allow_prop=True)
            slots.append((pred, obj))
        parsed[pid] = slots
        order.append(pid)

    # resolve references, then reject cycles by depth-first walk
    referenced = set()
    for pid, slots in parsed.items():
        for k, (_, obj) in enumerate(slots):
            if obj[0] == "prop":
                _require(
                    obj[1] in parsed,
                    f"{path}.propositions[{pid}].rbs[{k}].obj",
                    f"reference to unknown proposition {obj[1]!r}",
                )
                referenced.add(obj[1])

    state = {}  # 1 = on stack, 2 = done

    def check_cycle(pid, trail):
        if state.get(pid) == 2:
            return
        if state.get(pid) == 1:
            _fail(f"{path}.propositions[{pid}]", f"cyclic embedding via {' -> '.join(trail + [pid])}")
        state[pid] = 1
        for _, obj in parsed[pid]:
            if obj[0] == "prop":
                check_cycle(obj[1], trail + [pid])
        state[pid] = 2

    for pid in order:
        check_cycle(pid, [])

    # assemble units; token POs deduplicated per (kind, token) within the analog
    po_units = []
    po_by_key = {}
    rb_units = []
    p_units = {pid: PUnit(uid=f"{name}/{pid}", prop_id=pid) for pid in order}

    def token_po(kind, token):
        key = (kind, token)
        if key in po_by_key:
            return po_by_key[key]
        unit = POUnit(uid=f"{name}/po/{kind.value}:{token}", kind=kind, token=token)
        po_by_key[key] = unit
        po_units.append(unit)
        return unit

    for pid in order:
        for k, (pred, obj) in enumerate(parsed[pid]):
            rb_uid = f"{name}/{pid}/rb{k}"
            if pred[0] == "token":
                pred_uid = token_po(POKind.PRED, pred[1]).uid
            else:
                empty = POUnit(uid=f"{rb_uid}/pred:-", kind=POKind.PRED, token=None)
                po_units.append(empty)
                pred_uid = empty.uid
            if obj[0] == "prop":
                filler_uid, filler_is_prop = p_units[obj[1]].uid, True
            elif obj[0] == "token":
                filler_uid, filler_is_prop = token_po(POKind.OBJ, obj[1]).uid, False
            else:
                empty = POUnit(uid=f"{rb_uid}/obj:-", kind=POKind.OBJ, token=None)
                po_units.append(empty)
                filler_uid, filler_is_prop = empty.uid, False
            rb = RBUnit(uid=rb_uid, pred=pred_uid, filler=filler_uid, filler_is_prop=filler_is_prop)
            rb_units.append(rb)
            p_units[pid].rbs.append(rb_uid)

    return Analog(
        name=name,
        p_units=[p_units[pid] for pid in order],
        rb_units=rb_units,
        po_units=po_units,
        prop_order=[p_units[pid].uid for pid in order],
        top_level=[p_units[pid].uid for pid in order if pid not in referenced],
    )


def parse_proposition_file(document):
    """Parse a corpus document (JSON text or decoded dict) into analogs."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"not valid JSON: {exc}") from None
    _require(isinstance(document, dict), "$", "corpus root must be an object")
    analogs = document.get("analogs")
    _require(isinstance(analogs, list), "$.analogs", "must be a list")
    out = []
    seen = set()
    for i, entry in enumerate(analogs):
        analog = _build_analog(entry, f"$.analogs[{i}]")
        _require(analog.name not in seen, f"$.analogs[{i}].name", f"duplicate analog name {analog.name!r}")
        seen.add(analog.name)
        out.append(analog)
    return out


def load_corpus(path):
    with open(path, encoding="utf-8") as fh:
        return parse_proposition_file(fh.read())
