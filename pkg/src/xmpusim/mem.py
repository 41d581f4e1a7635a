"""Word-addressable physical memory covering the SoC's named regions.

Backing stores are per-region byte arrays holding 32-bit little-endian
words.  Content persists until explicitly overwritten or sanitized;
nothing is cleared by protection-unit resets or reconfiguration, which
is the substrate the residue scenarios rely on.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import Misaligned, RangeCrossesRegions, UnmappedAddress

PHYS_ADDR_BITS = 44
PHYS_ADDR_LIMIT = 1 << PHYS_ADDR_BITS
WORD_BYTES = 4
WORD_MASK = 0xFFFFFFFF

_WORD = struct.Struct("<I")


class RegionKind(Enum):
    DDR = "DDR"
    OCM = "OCM"
    ATCM = "ATCM"
    PERIPHERAL = "PERIPHERAL"


@dataclass(frozen=True)
class MemRegionDecl:
    """One named region of the physical memory map."""

    name: str
    base: int
    size: int
    kind: RegionKind

    def __post_init__(self):
        if self.base % WORD_BYTES:
            raise ValueError(f"{self.name}: base 0x{self.base:x} not word aligned")
        if self.size <= 0 or self.size % WORD_BYTES:
            raise ValueError(f"{self.name}: size 0x{self.size:x} not a positive word multiple")
        if self.base + self.size > PHYS_ADDR_LIMIT:
            raise ValueError(f"{self.name}: region exceeds the {PHYS_ADDR_BITS}-bit address space")

    @property
    def end(self) -> int:
        """Inclusive address of the last byte."""
        return self.base + self.size - 1

    def contains(self, addr: int) -> bool:
        return self.base <= addr <= self.end


def check_word_aligned(addr: int) -> None:
    if addr % WORD_BYTES:
        raise Misaligned(f"address 0x{addr:x} is not 32-bit word aligned")


class PhysMemory:
    """Sparse-by-region word store with a configurable background fill.

    Unwritten words read back as the background word.  Every mutation
    records a (range, writer) provenance event so reports can tell a
    prior tenant's residue apart from the reader's own data; provenance
    is metadata only and never affects read values.
    """

    def __init__(self, regions=(), background: int = 0x00000000):
        if not 0 <= background <= WORD_MASK:
            raise ValueError("background must be a 32-bit word")
        self.background = background
        self._regions: list[MemRegionDecl] = []
        self._bases: list[int] = []
        self._stores: dict[str, bytearray] = {}
        self._write_events: list[tuple[int, int, str | None]] = []
        for decl in regions:
            self.add_region(decl)

    # -- region management ----------------------------------------------

    def add_region(self, decl: MemRegionDecl) -> None:
        for other in self._regions:
            if decl.base <= other.end and other.base <= decl.end:
                raise ValueError(f"region {decl.name} overlaps {other.name}")
        idx = bisect_right(self._bases, decl.base)
        self._regions.insert(idx, decl)
        self._bases.insert(idx, decl.base)
        pattern = _WORD.pack(self.background)
        self._stores[decl.name] = bytearray(pattern * (decl.size // WORD_BYTES))

    @property
    def regions(self) -> tuple[MemRegionDecl, ...]:
        return tuple(self._regions)

    def region(self, name: str) -> MemRegionDecl:
        for decl in self._regions:
            if decl.name == name:
                return decl
        raise KeyError(name)

    def region_at(self, addr: int) -> MemRegionDecl | None:
        idx = bisect_right(self._bases, addr) - 1
        if idx >= 0 and self._regions[idx].contains(addr):
            return self._regions[idx]
        return None

    def _locate(self, addr: int) -> tuple[MemRegionDecl, int]:
        decl = self.region_at(addr)
        if decl is None:
            raise UnmappedAddress(f"address 0x{addr:x} is in no declared region")
        return decl, addr - decl.base

    # -- word access ------------------------------------------------------

    def read(self, addr: int) -> int:
        check_word_aligned(addr)
        decl, off = self._locate(addr)
        return _WORD.unpack_from(self._stores[decl.name], off)[0]

    def write(self, addr: int, value: int, writer: str | None = None) -> None:
        check_word_aligned(addr)
        if not 0 <= value <= WORD_MASK:
            raise ValueError(f"value 0x{value:x} exceeds 32 bits")
        decl, off = self._locate(addr)
        _WORD.pack_into(self._stores[decl.name], off, value)
        self._write_events.append((addr, addr + WORD_BYTES, writer))

    def fill(self, start: int, end: int, value: int, writer: str | None = None) -> int:
        """Fill every word of the inclusive range [start, end]; returns the word count.

        The range must lie inside a single declared region; sanitization
        policies use this as their explicit bulk-clear entry point.
        """
        check_word_aligned(start)
        check_word_aligned(end)
        if start > end:
            raise ValueError(f"fill range start 0x{start:x} > end 0x{end:x}")
        if not 0 <= value <= WORD_MASK:
            raise ValueError(f"value 0x{value:x} exceeds 32 bits")
        decl, off = self._locate(start)
        decl_end, _ = self._locate(end)
        if decl is not decl_end:
            raise RangeCrossesRegions(
                f"fill [0x{start:x}, 0x{end:x}] spans {decl.name} and {decl_end.name}")
        count = (end - start) // WORD_BYTES + 1
        self._stores[decl.name][off:off + count * WORD_BYTES] = _WORD.pack(value) * count
        self._write_events.append((start, end + WORD_BYTES, writer))
        return count

    def writer_at(self, addr: int) -> str | None:
        """Provenance of the last write covering addr, or None for background."""
        for start, stop, writer in reversed(self._write_events):
            if start <= addr < stop:
                return writer
        return None

    def snapshot(self) -> dict[str, bytes]:
        """Immutable copy of every region's content, keyed by region name."""
        return {name: bytes(store) for name, store in self._stores.items()}

    # -- hexdump ----------------------------------------------------------

    def hexdump(self, start: int, end: int) -> str:
        """Dump the inclusive word range [start, end], 16 bytes per line."""
        check_word_aligned(start)
        check_word_aligned(end)
        if start > end:
            raise ValueError(f"hexdump range start 0x{start:x} > end 0x{end:x}")
        data = bytearray()
        for addr in range(start, end + 1, WORD_BYTES):
            data += _WORD.pack(self.read(addr))
        return format_hexdump(start, bytes(data))


def format_hexdump(base: int, data: bytes) -> str:
    """Render bytes as `<addr>: <8 groups of 4 hex digits>  <ASCII gutter>` lines.

    Bytes appear in memory order (little-endian within words) and the
    gutter shows printable ASCII with dots elsewhere, 16 bytes per line.
    """
    lines = []
    for off in range(0, len(data), 16):
        chunk = data[off:off + 16]
        groups = [chunk[i:i + 2].hex() for i in range(0, len(chunk), 2)]
        gutter = "".join(chr(b) if 0x20 <= b <= 0x7E else "." for b in chunk)
        lines.append(f"{base + off:08x}: {' '.join(groups)}  {gutter}")
    return "\n".join(lines)


def parse_hexdump(text: str) -> list[tuple[int, int]]:
    """Invert format_hexdump back into (address, word) pairs."""
    words = []
    for line in text.splitlines():
        line = line.rstrip()
        if not line:
            continue
        head, _, rest = line.partition(":")
        addr = int(head, 16)
        hex_part = rest.split("  ")[0]
        raw = bytes.fromhex(hex_part.replace(" ", ""))
        for i in range(0, len(raw), WORD_BYTES):
            words.append((addr + i, _WORD.unpack_from(raw, i)[0]))
    return words


# -- memory map config files --------------------------------------------------

def parse_memory_map(text: str, source: str = "<memory map>") -> list[MemRegionDecl]:
    """Parse `name base size kind` lines; `#` starts a comment."""
    decls = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{source}:{lineno}: expected 'name base size kind', got {raw!r}")
        name, base_s, size_s, kind_s = parts
        try:
            kind = RegionKind(kind_s.upper())
        except ValueError:
            raise ValueError(f"{source}:{lineno}: unknown region kind {kind_s!r}") from None
        decls.append(MemRegionDecl(name, int(base_s, 0), int(size_s, 0), kind))
    return decls


def load_memory_map(path) -> list[MemRegionDecl]:
    path = Path(path)
    return parse_memory_map(path.read_text(), source=str(path))
