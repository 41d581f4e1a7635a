"""Embedded-OS model: process lifecycle, heap and page tables, isolation
brokering, and the sanitization policy with cost accounting.

The kernel is the PetaLinux stand-in.  It hands out monotonically
increasing pids (seedable so transcripts are reproducible), maps heap
pages onto the physical bounds already present in the protection-unit
slots, and, depending on policy, clears those bounds on termination or
on reassignment while accruing an abstract cycle cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (AlreadyTerminated, BrokerDenied, NoSuchPid,
                     OutOfPhysicalPages, RegionBusy, UnmappedVa)
from .soc import SlotUpdate, SoC
from .xmpu import RegResult

PAGE_SIZE = 4096
PAGE_MASK = PAGE_SIZE - 1
SANITIZE_WRITER = "sanitize"

DEFAULT_HEAP_VA_BASE = 0xAAAB0FCF1000
DEFAULT_PID_SEED = 1000


class ProcState(Enum):
    RUNNING = "RUNNING"
    TERMINATED = "TERMINATED"


class SanitizeMode(Enum):
    NONE = "NONE"
    ON_TERMINATE = "ON_TERMINATE"
    ON_REASSIGN = "ON_REASSIGN"


@dataclass(frozen=True)
class SanitizePolicy:
    mode: SanitizeMode = SanitizeMode.NONE
    fill: int = 0x00000000
    cost_per_word: int = 1


@dataclass(frozen=True)
class IsolationGrant:
    """A live isolation binding: fixed physical regions, one owner SMID."""

    pid: int
    regions: tuple[tuple[int, int], ...]  # (start, end) inclusive pairs
    smid: int


@dataclass(frozen=True)
class SanitizeEvent:
    trigger: str
    words: int
    cycles: int


@dataclass(frozen=True)
class OverheadReport:
    sanitized_words: int
    total_cycles: int
    events: tuple[SanitizeEvent, ...]


@dataclass
class Process:
    pid: int
    name: str
    owner_master: str
    ppid: int
    started: str
    state: ProcState = ProcState.RUNNING
    heap_base: int = 0
    heap_size: int = 0
    page_table: dict[int, int] = field(default_factory=dict)
    grant: IsolationGrant | None = None
    arena_pages: list[int] = field(default_factory=list)


class Kernel:
    """Process and memory manager bound to one SoC instance."""

    def __init__(self, soc: SoC, *, broker: str = "PMU",
                 grant_slots: tuple[tuple[str, int], ...] = (),
                 arena_region: str | None = None,
                 heap_va_base: int = DEFAULT_HEAP_VA_BASE,
                 pid_seed: int = DEFAULT_PID_SEED,
                 clock: str = "12:33"):
        self.soc = soc
        self.broker_name = broker
        self.grant_slots = list(grant_slots)
        self.arena_region = arena_region
        self.heap_va_base = heap_va_base
        self.clock = clock
        self.policy = SanitizePolicy()
        self._next_pid = pid_seed
        self._procs: dict[int, Process] = {}
        self._live_grant: IsolationGrant | None = None
        self._arena_free: list[int] = []
        self._arena_ready = False
        self._sanitize_events: list[SanitizeEvent] = []

    # -- pids and lifecycle ---------------------------------------------------

    def seed_pids(self, value: int) -> None:
        """Jump the pid counter forward; pids stay unique and increasing."""
        if value < self._next_pid:
            raise ValueError(
                f"pid seed {value} would move the counter backwards from {self._next_pid}")
        self._next_pid = value

    def spawn(self, name: str, owner_master: str, ppid: int = 1) -> int:
        if owner_master not in self.soc.masters:
            raise ValueError(f"unknown owner master {owner_master}")
        pid = self._next_pid
        self._next_pid += 1
        self._procs[pid] = Process(pid, name, owner_master, ppid, self.clock)
        return pid

    def _proc(self, pid: int) -> Process:
        proc = self._procs.get(pid)
        if proc is None:
            raise NoSuchPid(f"pid {pid} was never assigned")
        return proc

    def _running(self, pid: int) -> Process:
        proc = self._proc(pid)
        if proc.state is not ProcState.RUNNING:
            raise NoSuchPid(f"pid {pid} is terminated")
        return proc

    def process(self, pid: int) -> Process:
        return self._proc(pid)

    def find_pid(self, name: str) -> int | None:
        """Most recently spawned RUNNING process with this name, if any."""
        for pid in sorted(self._procs, reverse=True):
            proc = self._procs[pid]
            if proc.name == name and proc.state is ProcState.RUNNING:
                return pid
        return None

    def terminate(self, pid: int) -> None:
        proc = self._proc(pid)
        if proc.state is ProcState.TERMINATED:
            raise AlreadyTerminated(f"pid {pid} already terminated")
        proc.state = ProcState.TERMINATED
        proc.page_table.clear()
        if proc.arena_pages:
            self._arena_free.extend(proc.arena_pages)
            self._arena_free.sort()
            proc.arena_pages = []
        if self._live_grant is not None and self._live_grant.pid == pid:
            grant = self._live_grant
            self._live_grant = None
            if self.policy.mode is SanitizeMode.ON_TERMINATE:
                self._sanitize(grant.regions, f"terminate pid={pid}")

    def ps_listing(self) -> str:
        """Simplified `ps` output: pid, ppid, start time, command name."""
        lines = []
        for pid in sorted(self._procs):
            proc = self._procs[pid]
            if proc.state is ProcState.RUNNING:
                lines.append(f"{proc.pid:5d} {proc.ppid:7d} {proc.started:>6} {proc.name}")
        return "\n".join(lines)

    # -- heap and translation ---------------------------------------------------

    def _grant_page_pool(self, grant: IsolationGrant) -> list[int]:
        pages = []
        for start, end in grant.regions:
            first = (start + PAGE_MASK) & ~PAGE_MASK
            page = first
            while page + PAGE_SIZE - 1 <= end:
                pages.append(page)
                page += PAGE_SIZE
        return pages

    def _ensure_arena(self) -> None:
        if self._arena_ready:
            return
        if self.arena_region is not None:
            decl = self.soc.memory.region(self.arena_region)
            self._arena_free = list(range(decl.base, decl.end + 1, PAGE_SIZE))
        self._arena_ready = True

    def alloc_heap(self, pid: int, size: int) -> tuple[int, int]:
        """Grow the process heap by `size` bytes; returns the new heap's
        [base, end) virtual range.  Pages come from the live grant when the
        process holds it, otherwise from the general DDR arena."""
        proc = self._running(pid)
        if size % PAGE_SIZE:
            raise ValueError(f"heap size 0x{size:x} is not a multiple of {PAGE_SIZE}")
        if proc.heap_size == 0:
            proc.heap_base = self.heap_va_base
        va = proc.heap_base + proc.heap_size
        pages_needed = size // PAGE_SIZE
        grant = self._live_grant
        if grant is not None and grant.pid == pid:
            pool = self._grant_page_pool(grant)
            used = len(proc.page_table)
            if used + pages_needed > len(pool):
                raise OutOfPhysicalPages(
                    f"grant holds {len(pool)} pages, need {used + pages_needed}")
            new_pages = pool[used:used + pages_needed]
        else:
            self._ensure_arena()
            if pages_needed > len(self._arena_free):
                raise OutOfPhysicalPages(
                    f"arena holds {len(self._arena_free)} free pages, need {pages_needed}")
            new_pages = self._arena_free[:pages_needed]
            del self._arena_free[:pages_needed]
            proc.arena_pages.extend(new_pages)
        for i, pa_page in enumerate(new_pages):
            proc.page_table[va + i * PAGE_SIZE] = pa_page
        proc.heap_size += size
        return proc.heap_base, proc.heap_base + proc.heap_size

    def proc_maps(self, pid: int) -> str:
        proc = self._running(pid)
        lines = []
        if proc.heap_size:
            start = proc.heap_base
            end = proc.heap_base + proc.heap_size
            lines.append(f"{start:012x}-{end:012x} rw-p 00000000 00:00 0            [heap]")
        return "\n".join(lines)

    def pagemap_translate(self, pid: int, va: int) -> int:
        """Translate one virtual address; the low 12 bits carry over."""
        proc = self._running(pid)
        pa_page = proc.page_table.get(va & ~PAGE_MASK)
        if pa_page is None:
            raise UnmappedVa(f"va 0x{va:x} is not mapped for pid {pid}")
        return pa_page | (va & PAGE_MASK)

    # -- isolation brokering ------------------------------------------------------

    def _grant_regions(self) -> tuple[tuple[int, int], ...]:
        regions = []
        for unit_name, index in self.grant_slots:
            slot = self.soc.unit(unit_name).slots[index]
            regions.append((slot.start, slot.end))
        return tuple(regions)

    def request_isolation(self, pid: int) -> IsolationGrant:
        """Bind the fixed region set to this process's owner SMID.

        Only the SMID and VALID slot registers are written; the bounds
        already present in the slots are reused verbatim.  Under the
        ON_REASSIGN policy the regions are sanitized before the grant.
        """
        proc = self._running(pid)
        if self._live_grant is not None:
            holder = self._procs[self._live_grant.pid]
            if holder.state is ProcState.RUNNING:
                raise RegionBusy(
                    f"regions held by running pid {holder.pid} ({holder.name})")
            self._live_grant = None
        if not self.grant_slots:
            raise BrokerDenied("no grant slots configured for this scenario")
        broker = self.soc.masters.get(self.broker_name)
        if broker is None:
            raise BrokerDenied(f"broker master {self.broker_name} does not exist")
        regions = self._grant_regions()
        if self.policy.mode is SanitizeMode.ON_REASSIGN:
            self._sanitize(regions, f"grant pid={pid}")
        owner_smid = self.soc.masters[proc.owner_master].smid
        for unit_name, index in self.grant_slots:
            result = self.soc.program_isolation(
                broker, unit_name,
                [SlotUpdate(index, smid=owner_smid, valid=True)], enable=True)
            if result is RegResult.FAILED:
                raise BrokerDenied(f"{unit_name} rejected programming by {broker.name}")
        grant = IsolationGrant(pid, regions, owner_smid)
        self._live_grant = grant
        proc.grant = grant
        return grant

    @property
    def live_grant(self) -> IsolationGrant | None:
        return self._live_grant

    # -- sanitization policy ---------------------------------------------------

    def set_policy(self, policy: SanitizePolicy) -> None:
        self.policy = policy

    def _sanitize(self, regions, trigger: str) -> None:
        words = 0
        for start, end in regions:
            # Region bounds are inclusive byte addresses; clear whole words.
            first_word = (start + 3) & ~0x3
            last_word = ((end + 1) // 4) * 4 - 4
            if last_word < first_word:
                continue
            words += self.soc.memory.fill(first_word, last_word, self.policy.fill,
                                          writer=SANITIZE_WRITER)
        cycles = words * self.policy.cost_per_word
        self._sanitize_events.append(SanitizeEvent(trigger, words, cycles))

    def overhead_report(self) -> OverheadReport:
        events = tuple(self._sanitize_events)
        return OverheadReport(
            sanitized_words=sum(e.words for e in events),
            total_cycles=sum(e.cycles for e in events),
            events=events)
