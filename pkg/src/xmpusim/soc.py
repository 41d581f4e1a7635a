"""Bus fabric: masters, protection-unit routing, interrupts, memory path.

Every transaction is routed to the unique unit guarding its address.
A denied read returns the poison word to the master, a denied write is
dropped; either way the unit raises its interrupt line and the denial
is appended to the interrupt log.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import Misaligned, UnmappedAddress
from .mem import PhysMemory, check_word_aligned
from .xmpu import (CTRL_ISOLATE, CTRL_RESET, Op, RegResult, SMID_MASK,
                   XmpuInstance)

POISON_WORD = 0xDEADBEEF


class _Sentinel:
    def __init__(self, label):
        self._label = label

    def __repr__(self):
        return self._label


DENIED = _Sentinel("DENIED")
WRITE_OK = _Sentinel("WRITE_OK")


@dataclass
class Master:
    """One bus master.  `secure_master` is the scenario-phase capability
    flag deciding whether it may currently program protection units."""

    name: str
    smid: int
    secure_master: bool = False

    def __post_init__(self):
        if not 0 <= self.smid <= SMID_MASK:
            raise ValueError(f"{self.name}: SMID 0x{self.smid:x} exceeds 10 bits")


@dataclass(frozen=True)
class Transaction:
    master: Master
    op: Op
    addr: int
    data: int | None = None

    def __post_init__(self):
        if (self.data is not None) != (self.op is Op.WRITE):
            raise ValueError("data must be present exactly when op is WRITE")

    @property
    def smid(self) -> int:
        return self.master.smid


@dataclass(frozen=True)
class Interrupt:
    unit: str
    cause: str
    detail: str


@dataclass
class SlotUpdate:
    """Partial region-slot programming; None fields keep the current value.

    Supplying only `smid` rebinds ownership while the address bounds
    persist untouched, which is the pivot the reassignment attack uses.
    """

    index: int
    start: int | None = None
    end: int | None = None
    smid: int | None = None
    smid_mask: int | None = None
    read_en: bool | None = None
    write_en: bool | None = None
    valid: bool | None = None


class SoC:
    """One simulator instance: memory, masters and protection units."""

    def __init__(self, memory: PhysMemory):
        self.memory = memory
        self.masters: dict[str, Master] = {}
        self.units: list[XmpuInstance] = []
        self._secure_smids: set[int] = set()
        self._interrupts: list[Interrupt] = []
        self.total_denials = 0
        self._validated = False

    # -- construction ------------------------------------------------------

    def add_master(self, name: str, smid: int, secure: bool = False) -> Master:
        if name in self.masters:
            raise ValueError(f"duplicate master {name}")
        if any(m.smid == smid for m in self.masters.values()):
            raise ValueError(f"duplicate SMID 0x{smid:x}")
        master = Master(name, smid, secure)
        self.masters[name] = master
        if secure:
            self._secure_smids.add(smid)
        return master

    def set_secure_master(self, name: str, flag: bool) -> None:
        master = self.masters[name]
        master.secure_master = flag
        if flag:
            self._secure_smids.add(master.smid)
        else:
            self._secure_smids.discard(master.smid)

    def add_xmpu(self, name: str, window_base: int, window_size: int,
                 slot_count: int | None = None) -> XmpuInstance:
        kwargs = {} if slot_count is None else {"slot_count": slot_count}
        unit = XmpuInstance(name, window_base, window_size,
                            secure_writers=self._secure_smids, **kwargs)
        for other in self.units:
            if unit.window_base <= other.window_end and other.window_base <= unit.window_end:
                raise ValueError(f"window of {name} overlaps {other.name}")
        self.units.append(unit)
        self._validated = False
        return unit

    def unit(self, name: str) -> XmpuInstance:
        for unit in self.units:
            if unit.name == name:
                return unit
        raise KeyError(name)

    def validate(self) -> None:
        """Check the routing invariant: every declared region is guarded by
        exactly one unit (windows are disjoint by construction)."""
        for decl in self.memory.regions:
            for addr in (decl.base, decl.end):
                if not any(u.guards(addr) for u in self.units):
                    raise ValueError(
                        f"region {decl.name} is not covered by any unit window")
            covering = [u for u in self.units if u.guards(decl.base)]
            if not covering[0].guards(decl.end):
                raise ValueError(
                    f"region {decl.name} straddles the edge of {covering[0].name}'s window")
        self._validated = True

    def route(self, addr: int) -> XmpuInstance:
        for unit in self.units:
            if unit.guards(addr):
                return unit
        raise UnmappedAddress(f"no protection unit guards 0x{addr:x}")

    # -- interrupt log -------------------------------------------------------

    def _raise_interrupt(self, unit_name: str, cause: str, detail: str) -> None:
        self._interrupts.append(Interrupt(unit_name, cause, detail))
        self.total_denials += 1

    def pending_interrupts(self) -> tuple[Interrupt, ...]:
        return tuple(self._interrupts)

    def clear_interrupts(self) -> None:
        self._interrupts.clear()

    # -- transaction path ------------------------------------------------------

    def issue(self, txn: Transaction):
        """Arbitrate and perform one access.

        Returns the read word, WRITE_OK, or DENIED.  Misaligned or
        unmapped addresses are caller errors and raise instead.
        """
        if not self._validated:
            self.validate()
        check_word_aligned(txn.addr)
        if self.memory.region_at(txn.addr) is None:
            raise UnmappedAddress(f"address 0x{txn.addr:x} is in no declared region")
        unit = self.route(txn.addr)
        decision = unit.evaluate(txn.smid, txn.op, txn.addr)
        if decision.interrupt_raised:
            self._raise_interrupt(
                unit.name, decision.cause.name,
                f"{txn.op.value} 0x{txn.addr:x} smid=0x{txn.smid:03x}")
            return DENIED
        if txn.op is Op.READ:
            return self.memory.read(txn.addr)
        self.memory.write(txn.addr, txn.data, writer=txn.master.name)
        return WRITE_OK

    def read(self, master: Master, addr: int):
        return self.issue(Transaction(master, Op.READ, addr))

    def write(self, master: Master, addr: int, value: int):
        return self.issue(Transaction(master, Op.WRITE, addr, value))

    # -- register programming ---------------------------------------------------

    def reg_write(self, master: Master, unit_name: str, reg_id: str, value: int) -> RegResult:
        unit = self.unit(unit_name)
        result = unit.reg_write(master.smid, reg_id, value)
        if result is RegResult.FAILED:
            cause = "LOCKED" if unit.locked else "UNAUTHORIZED_WRITER"
            self._raise_interrupt(unit.name, cause,
                                  f"reg_write {reg_id} by {master.name}")
        return result

    def reg_read(self, master: Master, unit_name: str, reg_id: str):
        return self.unit(unit_name).reg_read(master.smid, reg_id)

    def program_isolation(self, requester: Master, unit_name: str,
                          updates: list[SlotUpdate], enable: bool) -> RegResult:
        """Program region slots and flip the unit's CTRL in one brokered step.

        Only fields supplied in each update are written; in particular a
        SMID-only update leaves the slot's address bounds as-is.
        """
        unit = self.unit(unit_name)
        if not requester.secure_master or unit.locked:
            cause = "LOCKED" if unit.locked else "UNAUTHORIZED_WRITER"
            self._raise_interrupt(unit.name, cause,
                                  f"program_isolation by {requester.name}")
            return RegResult.FAILED
        for upd in updates:
            slot = unit.slots[upd.index]
            if upd.start is not None:
                unit.reg_write(requester.smid, f"R{upd.index}_START_LO", upd.start & 0xFFFFFFFF)
                unit.reg_write(requester.smid, f"R{upd.index}_START_HI", upd.start >> 32)
            if upd.end is not None:
                unit.reg_write(requester.smid, f"R{upd.index}_END_LO", upd.end & 0xFFFFFFFF)
                unit.reg_write(requester.smid, f"R{upd.index}_END_HI", upd.end >> 32)
            if upd.smid is not None or upd.smid_mask is not None:
                smid = slot.smid if upd.smid is None else upd.smid
                mask = slot.smid_mask if upd.smid_mask is None else upd.smid_mask
                unit.reg_write(requester.smid, f"R{upd.index}_SMID", (mask << 16) | smid)
            if upd.read_en is not None or upd.write_en is not None:
                r_en = slot.read_en if upd.read_en is None else upd.read_en
                w_en = slot.write_en if upd.write_en is None else upd.write_en
                unit.reg_write(requester.smid, f"R{upd.index}_PERM",
                               (int(w_en) << 1) | int(r_en))
            if upd.valid is not None:
                unit.reg_write(requester.smid, f"R{upd.index}_VALID", int(upd.valid))
        unit.reg_write(requester.smid, "CTRL", CTRL_ISOLATE if enable else CTRL_RESET)
        return RegResult.PASS
