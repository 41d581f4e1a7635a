"""Register-accurate model of one memory protection unit.

Each unit arbitrates one physical address window and carries a control
register, a lock register and a fixed table of region slots.  Register
encodings are documented in docs/registers.md:

    CTRL   bit0 = default read allowed, bit1 = default write allowed,
           bit4 retained (reserved, set at reset), others reserved-zero.
           Reset value 0x00000013; isolation value 0x00000010.
    LOCK   bit0 = locked.  While locked every register write is rejected
           until a power-on reset.
    Rn_*   region slot n: START_LO/START_HI and END_LO/END_HI hold a
           44-bit inclusive bound pair (HI[11:0] ++ LO[31:0]); SMID holds
           the 10-bit master id in [9:0] and the ignore mask in [25:16];
           PERM bit0/bit1 enable reads/writes; VALID bit0 arms the slot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import UnknownRegister

SMID_BITS = 10
SMID_MASK = 0x3FF

CTRL_RESET = 0x00000013
CTRL_ISOLATE = 0x00000010
CTRL_DEFAULT_RD = 0x00000001
CTRL_DEFAULT_WR = 0x00000002
CTRL_RETAINED = 0x00000010

DEFAULT_SLOT_COUNT = 16

_REGION_REG = re.compile(
    r"^R(\d+)_(START_LO|START_HI|END_LO|END_HI|SMID|PERM|VALID)$")


class Op(Enum):
    READ = "READ"
    WRITE = "WRITE"


class Verdict(Enum):
    ALLOW = "ALLOW"
    DENY = "DENY"


class Cause(Enum):
    REGION_MATCH = "REGION_MATCH"
    DEFAULT_ALLOW = "DEFAULT_ALLOW"
    SMID_MISMATCH = "SMID_MISMATCH"
    PERM_DENIED = "PERM_DENIED"
    DEFAULT_DENY = "DEFAULT_DENY"


class RegResult(Enum):
    PASS = "PASS"
    FAILED = "FAILED"


@dataclass(frozen=True)
class AccessDecision:
    """Outcome of arbitrating one transaction; DENY always raises the IRQ line."""

    verdict: Verdict
    cause: Cause
    interrupt_raised: bool
    slot: int | None = None


def assemble_addr(hi: int, lo: int) -> int:
    """Join HI[11:0] and LO[31:0] into a 44-bit physical address."""
    return ((hi & 0xFFF) << 32) | (lo & 0xFFFFFFFF)


class RegionSlot:
    """One region table entry.  Bounds are inclusive byte addresses."""

    __slots__ = ("start", "end", "smid", "smid_mask", "read_en", "write_en", "valid")

    def __init__(self):
        self.reset()

    def reset(self):
        self.start = 0
        self.end = 0
        self.smid = 0
        self.smid_mask = 0
        self.read_en = False
        self.write_en = False
        self.valid = False

    def smid_matches(self, smid: int) -> bool:
        # Mask bit set = that id bit is ignored during comparison.
        return ((smid ^ self.smid) & (~self.smid_mask & SMID_MASK)) == 0


class XmpuInstance:
    """One protection unit guarding a contiguous physical window.

    `secure_writers` is the live set of SMIDs currently allowed to
    program this unit; the bus fabric shares one set across all units
    and mutates it when configuration ownership changes.
    """

    def __init__(self, name: str, window_base: int, window_size: int,
                 secure_writers: set[int] | None = None,
                 slot_count: int = DEFAULT_SLOT_COUNT):
        if window_size <= 0:
            raise ValueError(f"{name}: window size must be positive")
        self.name = name
        self.window_base = window_base
        self.window_size = window_size
        self.secure_writers = secure_writers if secure_writers is not None else set()
        self.slots = [RegionSlot() for _ in range(slot_count)]
        self.ctrl = CTRL_RESET
        self.locked = False

    # -- window -----------------------------------------------------------

    @property
    def window_end(self) -> int:
        return self.window_base + self.window_size - 1

    def guards(self, addr: int) -> bool:
        return self.window_base <= addr <= self.window_end

    # -- register file ------------------------------------------------------

    def _slot_for(self, reg_id: str) -> tuple[RegionSlot, str]:
        m = _REGION_REG.match(reg_id)
        if not m:
            raise UnknownRegister(f"{self.name}: no register named {reg_id!r}")
        index = int(m.group(1))
        if index >= len(self.slots):
            raise UnknownRegister(f"{self.name}: slot {index} out of range")
        return self.slots[index], m.group(2)

    def reg_write(self, writer: int, reg_id: str, value: int) -> RegResult:
        """Program one register.  Returns FAILED (state untouched) unless the
        writer is a configured secure master and the unit is unlocked."""
        if reg_id not in ("CTRL", "LOCK"):
            self._slot_for(reg_id)  # raises UnknownRegister early
        if self.locked or writer not in self.secure_writers:
            return RegResult.FAILED
        value &= 0xFFFFFFFF
        if reg_id == "CTRL":
            self.ctrl = (value & (CTRL_DEFAULT_RD | CTRL_DEFAULT_WR)) | (self.ctrl & CTRL_RETAINED)
        elif reg_id == "LOCK":
            self.locked = bool(value & 1)
        else:
            slot, field = self._slot_for(reg_id)
            if field == "START_LO":
                slot.start = assemble_addr(slot.start >> 32, value)
            elif field == "START_HI":
                slot.start = assemble_addr(value, slot.start & 0xFFFFFFFF)
            elif field == "END_LO":
                slot.end = assemble_addr(slot.end >> 32, value)
            elif field == "END_HI":
                slot.end = assemble_addr(value, slot.end & 0xFFFFFFFF)
            elif field == "SMID":
                slot.smid = value & SMID_MASK
                slot.smid_mask = (value >> 16) & SMID_MASK
            elif field == "PERM":
                slot.read_en = bool(value & 1)
                slot.write_en = bool(value & 2)
            elif field == "VALID":
                slot.valid = bool(value & 1)
        return RegResult.PASS

    def _reg_value(self, reg_id: str) -> int:
        if reg_id == "CTRL":
            return self.ctrl
        if reg_id == "LOCK":
            return int(self.locked)
        slot, field = self._slot_for(reg_id)
        if field == "START_LO":
            return slot.start & 0xFFFFFFFF
        if field == "START_HI":
            return slot.start >> 32
        if field == "END_LO":
            return slot.end & 0xFFFFFFFF
        if field == "END_HI":
            return slot.end >> 32
        if field == "SMID":
            return (slot.smid_mask << 16) | slot.smid
        if field == "PERM":
            return (int(slot.write_en) << 1) | int(slot.read_en)
        return int(slot.valid)

    def reg_read(self, reader: int, reg_id: str):
        """Secure masters read the raw value; everyone else gets FAILED.

        Register state is hidden from user space, which is why the
        attack has to recover physical addresses via page maps instead.
        """
        if reg_id not in ("CTRL", "LOCK"):
            self._slot_for(reg_id)
        if reader not in self.secure_writers:
            return RegResult.FAILED
        return self._reg_value(reg_id)

    def raw_registers(self) -> dict[str, int]:
        """Full register file snapshot, for bitwise-stability assertions."""
        regs = {"CTRL": self.ctrl, "LOCK": int(self.locked)}
        for i in range(len(self.slots)):
            for field in ("START_LO", "START_HI", "END_LO", "END_HI", "SMID", "PERM", "VALID"):
                reg_id = f"R{i}_{field}"
                regs[reg_id] = self._reg_value(reg_id)
        return regs

    # -- arbitration ---------------------------------------------------------

    def evaluate(self, smid: int, op: Op, addr: int) -> AccessDecision:
        """Decide one transaction.  Pure function of unit state and inputs.

        Slots are scanned in ascending index order; the first valid slot
        whose inclusive bounds cover the address decides.  With no match
        the CTRL default bit for the operation decides.
        """
        if not self.guards(addr):
            raise ValueError(f"{self.name} does not guard 0x{addr:x}")
        for index, slot in enumerate(self.slots):
            if not slot.valid or not slot.start <= addr <= slot.end:
                continue
            if not slot.smid_matches(smid):
                return AccessDecision(Verdict.DENY, Cause.SMID_MISMATCH, True, index)
            permitted = slot.read_en if op is Op.READ else slot.write_en
            if permitted:
                return AccessDecision(Verdict.ALLOW, Cause.REGION_MATCH, False, index)
            return AccessDecision(Verdict.DENY, Cause.PERM_DENIED, True, index)
        default_bit = CTRL_DEFAULT_RD if op is Op.READ else CTRL_DEFAULT_WR
        if self.ctrl & default_bit:
            return AccessDecision(Verdict.ALLOW, Cause.DEFAULT_ALLOW, False)
        return AccessDecision(Verdict.DENY, Cause.DEFAULT_DENY, True)

    def por_reset(self) -> None:
        """Power-on reset: the only event that clears the lock.  Guarded
        memory content is never touched."""
        self.ctrl = CTRL_RESET
        self.locked = False
        for slot in self.slots:
            slot.reset()
