"""Line-oriented scenario scripts: parsing, execution, reports.

A script is a sequence of `verb arg...` lines (`#` comments, blank lines
ignored).  `banner` and `say` keep the rest of the line verbatim so the
transcript shape is fully controlled by the script.  The verb catalog is
documented in docs/scenarios.md.  Execution is deterministic: two runs
of the same script produce byte-identical transcripts and reports.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from . import attack as atk
from .errors import (MissingGolden, ScenarioAssertionError, ScenarioParseError,
                     SimError)
from .kernel import (Kernel, SANITIZE_WRITER, SanitizeMode, SanitizePolicy)
from .mem import MemRegionDecl, PhysMemory, RegionKind, WORD_BYTES, load_memory_map
from .soc import DENIED, SlotUpdate, SoC, WRITE_OK
from .transcript import (FAILED, PASS, SKIPPED, Transcript, compare_transcript,
                         probe_line)
from .xmpu import Op, RegResult

_RAW_VERBS = ("banner", "say")

REPORT_KEYS = ("denials", "residue_words_disclosed", "sanitize_cycles",
               "profiles_matched")


@dataclass(frozen=True)
class Step:
    verb: str
    args: tuple[str, ...]
    raw: str
    source: str
    line: int


@dataclass
class RunOptions:
    pid_seed: int | None = None
    policy: str | None = None     # none | terminate | reassign
    fill: int = 0x00000000
    cost_per_word: int = 1


@dataclass
class RunResult:
    transcript: str
    report: dict
    exit_code: int
    error: str | None = None


def parse_scenario(text: str, source: str = "<script>",
                   base_dir: Path | None = None) -> list[Step]:
    base_dir = base_dir or Path(".")
    steps: list[Step] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        verb = stripped.split(None, 1)[0]
        if verb in _RAW_VERBS:
            idx = raw.index(verb) + len(verb)
            rest = raw[idx:]
            if rest.startswith(" "):
                rest = rest[1:]
            steps.append(Step(verb, (), rest, source, lineno))
            continue
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioParseError(str(exc), source, lineno, 1) from None
        if not tokens:
            continue
        if tokens[0] == "include":
            if len(tokens) != 2:
                raise ScenarioParseError("include takes one path", source, lineno, 1)
            inc_path = (base_dir / tokens[1]).resolve()
            if not inc_path.exists():
                raise ScenarioParseError(f"include target {tokens[1]} not found",
                                         source, lineno, len(verb) + 2)
            steps.extend(parse_scenario(inc_path.read_text(), str(inc_path),
                                        inc_path.parent))
            continue
        steps.append(Step(tokens[0], tuple(tokens[1:]), raw, source, lineno))
    return steps


def load_scenario(path) -> list[Step]:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path), path.parent)


class ScenarioRunner:
    """Executes parsed steps on a fresh simulator instance."""

    def __init__(self, options: RunOptions | None = None):
        self.options = options or RunOptions()
        self.mem = PhysMemory()
        self.soc = SoC(self.mem)
        pid_seed = self.options.pid_seed
        self.kernel = Kernel(self.soc, **({"pid_seed": pid_seed} if pid_seed else {}))
        self.transcript = Transcript()
        self.probe_word = 0x11223344
        self.adversary_master = "APU"
        self.adversary_pid: int | None = None
        self.procs: dict[str, int] = {}
        self.poll_trace: atk.PollTrace | None = None
        self.heap_ranges: list[tuple[int, int]] = []
        self.image: atk.MemoryImage | None = None
        self.profiles: list[atk.SignatureProfile] = []
        self.match_report: atk.MatchReport | None = None
        self._disclosed: set[int] = set()
        self._snapshots: dict[str, dict[str, bytes]] = {}
        self._reg_snapshots: dict[str, dict[str, dict[str, int]]] = {}
        self._policy_locked = False
        if self.options.policy is not None:
            self.kernel.set_policy(_policy_from_options(self.options))
            self._policy_locked = True
        self._step: Step | None = None

    # -- plumbing -----------------------------------------------------------

    def _fail(self, message: str):
        step = self._step
        raise ScenarioAssertionError(message, step.source if step else "<script>",
                                     step.line if step else 0)

    def _int(self, token: str) -> int:
        try:
            return int(token, 0)
        except ValueError:
            self._fail(f"expected an integer, got {token!r}")

    def _master(self, name: str):
        try:
            return self.soc.masters[name]
        except KeyError:
            self._fail(f"unknown master {name!r}")

    def _pid(self, name: str) -> int:
        if name.isdigit():
            return int(name)
        pid = self.procs.get(name)
        if pid is None:
            self._fail(f"no spawned process named {name!r}")
        return pid

    def _addr(self, token: str) -> int:
        name, plus, off = token.partition("+")
        base = None
        try:
            base = self.mem.region(name).base
        except KeyError:
            pass
        if base is None:
            base = self._int(name)
        return base + (self._int(off) if plus else 0)

    def _kv(self, args, allowed):
        out = {}
        for tok in args:
            key, eq, value = tok.partition("=")
            if not eq or key not in allowed:
                self._fail(f"expected key=value with key in {sorted(allowed)}, got {tok!r}")
            out[key] = value
        return out

    def _note_adversary_read(self, pa: int, denied: bool) -> None:
        if denied:
            return
        writer = self.mem.writer_at(pa)
        if writer is None or writer == SANITIZE_WRITER or writer == self.adversary_master:
            return
        self._disclosed.add(pa)

    def _adversary(self):
        return self._master(self.adversary_master)

    def _adversary_proc(self) -> int:
        if self.adversary_pid is None:
            self._fail("no adversary process bound; use the 'adversary' verb first")
        return self.adversary_pid

    # -- execution -----------------------------------------------------------

    def run(self, steps) -> None:
        for step in steps:
            self._step = step
            handler = getattr(self, f"_op_{step.verb}", None)
            if handler is None:
                raise ScenarioParseError(f"unknown verb {step.verb!r}",
                                         step.source, step.line, 1)
            try:
                handler(step.args, step.raw)
            except (ScenarioAssertionError, ScenarioParseError):
                raise
            except (SimError, ValueError, KeyError, IndexError) as exc:
                self._fail(f"{step.verb}: {exc}")

    def report(self) -> dict:
        overhead = self.kernel.overhead_report()
        return {
            "denials": self.soc.total_denials,
            "residue_words_disclosed": len(self._disclosed),
            "sanitize_cycles": overhead.total_cycles,
            "profiles_matched": self.match_report.matched_count if self.match_report else 0,
        }

    # -- setup verbs -----------------------------------------------------------

    def _op_memory_map(self, args, raw):
        path = Path(self._step.source).parent / args[0]
        for decl in load_memory_map(path):
            self.mem.add_region(decl)

    def _op_region(self, args, raw):
        name, base, size, kind = args
        self.mem.add_region(MemRegionDecl(name, self._int(base), self._int(size),
                                          RegionKind(kind.upper())))

    def _op_background(self, args, raw):
        if self.mem.regions:
            self._fail("background must be set before any region is declared")
        self.mem.background = self._int(args[0])

    def _op_master(self, args, raw):
        name, smid = args[0], self._int(args[1])
        secure = len(args) > 2 and args[2] == "secure"
        self.soc.add_master(name, smid, secure)

    def _op_xmpu(self, args, raw):
        kv = self._kv(args[3:], {"slots"})
        self.soc.add_xmpu(args[0], self._int(args[1]), self._int(args[2]),
                          slot_count=int(kv["slots"]) if "slots" in kv else None)

    def _op_slot(self, args, raw):
        # Boot-time slot state (FSBL phase), applied before the modeled
        # software runs; not a bus transaction.
        unit = self.soc.unit(args[0])
        slot = unit.slots[self._int(args[1])]
        kv = self._kv(args[2:], {"start", "end", "smid", "mask", "r", "w", "valid"})
        if "start" in kv:
            slot.start = self._int(kv["start"])
        if "end" in kv:
            slot.end = self._int(kv["end"])
        if "smid" in kv:
            slot.smid = self._int(kv["smid"])
        if "mask" in kv:
            slot.smid_mask = self._int(kv["mask"])
        if "r" in kv:
            slot.read_en = bool(self._int(kv["r"]))
        if "w" in kv:
            slot.write_en = bool(self._int(kv["w"]))
        if "valid" in kv:
            slot.valid = bool(self._int(kv["valid"]))

    def _op_grant_slot(self, args, raw):
        self.soc.unit(args[0])  # existence check
        self.kernel.grant_slots.append((args[0], self._int(args[1])))

    def _op_broker(self, args, raw):
        self.kernel.broker_name = args[0]

    def _op_arena(self, args, raw):
        self.kernel.arena_region = args[0]

    def _op_clock(self, args, raw):
        self.kernel.clock = args[0]

    # -- phase verbs -------------------------------------------------------------

    def _op_set_secure(self, args, raw):
        self.soc.set_secure_master(args[0], bool(self._int(args[1])))

    def _op_por_reset(self, args, raw):
        self.soc.unit(args[0]).por_reset()

    def _op_probe_word(self, args, raw):
        self.probe_word = self._int(args[0])

    def _op_adversary_master(self, args, raw):
        self._master(args[0])
        self.adversary_master = args[0]

    # -- transcript verbs -----------------------------------------------------------

    def _op_banner(self, args, raw):
        self.transcript.emit(raw)

    def _op_say(self, args, raw):
        self.transcript.emit(raw)

    def _op_probe(self, args, raw):
        direction, master_name, target = args
        master = self._master(master_name)
        addr = self._addr(target)
        if direction == "read":
            result = self.soc.read(master, addr)
            verdict = FAILED if result is DENIED else PASS
            if master_name == self.adversary_master:
                self._note_adversary_read(addr, result is DENIED)
            self.transcript.emit(probe_line("Reading", target, verdict))
        elif direction == "write":
            result = self.soc.write(master, addr, self.probe_word)
            self.transcript.emit(probe_line("Writing", target,
                                            FAILED if result is DENIED else PASS))
        else:
            self._fail(f"probe direction must be read or write, got {direction!r}")

    def _op_probe_skip(self, args, raw):
        direction, target = args
        verb = "Reading" if direction == "read" else "Writing"
        self.transcript.emit(probe_line(verb, target, SKIPPED))

    def _op_xmpu_write(self, args, raw):
        master_name, unit, reg, value = args
        result = self.soc.reg_write(self._master(master_name), unit, reg,
                                    self._int(value))
        self.transcript.emit(probe_line("Writing", f"{unit}_{reg}",
                                        PASS if result is RegResult.PASS else FAILED))

    def _op_report_reads(self, args, raw):
        master = self._master(args[0])
        template = args[1]
        values = []
        for token in args[2:]:
            addr = self._addr(token)
            result = self.soc.read(master, addr)
            if master.name == self.adversary_master:
                self._note_adversary_read(addr, result is DENIED)
            values.append("DENIED" if result is DENIED else f"0x{result:08x}")
        if template.count("{}") == len(values):
            line = template
            for value in values:
                line = line.replace("{}", value, 1)
        else:
            line = template.replace("{}", ", ".join(values))
        self.transcript.emit(line)

    def _op_hexdump(self, args, raw):
        self.transcript.emit_block(self.mem.hexdump(self._addr(args[0]),
                                                    self._addr(args[1])))

    def _op_hexdump_va(self, args, raw):
        pid = self._pid(args[0])
        va_start, va_end = self._int(args[1]), self._int(args[2])
        proc = self.kernel.process(pid)
        master = self._master(proc.owner_master)
        data = bytearray()
        for va in range(va_start, va_end + 1, WORD_BYTES):
            pa = self.kernel.pagemap_translate(pid, va)
            result = self.soc.read(master, pa)
            if master.name == self.adversary_master:
                self._note_adversary_read(pa, result is DENIED)
            word = atk.POISON_WORD if result is DENIED else result
            data += word.to_bytes(4, "little")
        from .mem import format_hexdump
        self.transcript.emit_block(format_hexdump(va_start, bytes(data)))

    def _op_emit_ps(self, args, raw):
        self.transcript.emit_block(self.kernel.ps_listing())

    def _op_emit_maps(self, args, raw):
        self.transcript.emit_block(self.kernel.proc_maps(self._pid(args[0])))

    def _op_emit_devmem(self, args, raw):
        pa = self._addr(args[0])
        result = atk.devmem(self.soc, self._adversary(), pa)
        self._note_adversary_read(pa, result is DENIED)
        shown = "DENIED" if result is DENIED else f"0x{result:08X}"
        self.transcript.emit(f"devmem 0x{pa:08x} -> {shown}")

    # -- raw bus / memory verbs ----------------------------------------------------

    def _op_issue(self, args, raw):
        master = self._master(args[0])
        if args[1] == "read":
            self.soc.read(master, self._addr(args[2]))
        else:
            self.soc.write(master, self._addr(args[2]), self._int(args[3]))

    def _op_mem_fill_as(self, args, raw):
        master = self._master(args[0])
        start, end, value = (self._addr(args[1]), self._addr(args[2]),
                             self._int(args[3]))
        for addr in range(start, end + 1, WORD_BYTES):
            if self.soc.write(master, addr, value) is DENIED:
                self._fail(f"fill by {master.name} denied at 0x{addr:x}")

    def _op_isolate(self, args, raw):
        master = self._master(args[0])
        unit = args[1]
        enable = {"on": True, "off": False}.get(args[2])
        if enable is None:
            self._fail("isolate takes on|off")
        updates = []
        expect = RegResult.PASS
        for spec in args[3:]:
            if spec.startswith("expect="):
                expect = RegResult.FAILED if spec.split("=")[1] == "failed" else RegResult.PASS
                continue
            index_s, _, kvs = spec.partition(":")
            upd = SlotUpdate(self._int(index_s))
            for kv in filter(None, kvs.split(",")):
                key, _, value = kv.partition("=")
                if key == "start":
                    upd.start = self._int(value)
                elif key == "end":
                    upd.end = self._int(value)
                elif key == "smid":
                    upd.smid = self._int(value)
                elif key == "mask":
                    upd.smid_mask = self._int(value)
                elif key == "r":
                    upd.read_en = bool(self._int(value))
                elif key == "w":
                    upd.write_en = bool(self._int(value))
                elif key == "valid":
                    upd.valid = bool(self._int(value))
                else:
                    self._fail(f"unknown slot field {key!r}")
            updates.append(upd)
        result = self.soc.program_isolation(master, unit, updates, enable)
        if result is not expect:
            self._fail(f"isolate {unit}: expected {expect.value}, got {result.value}")

    # -- OS verbs ---------------------------------------------------------------

    def _op_pid_seed(self, args, raw):
        self.kernel.seed_pids(self._int(args[0]))

    def _op_policy(self, args, raw):
        if self._policy_locked:
            return
        kv = self._kv(args[1:], {"fill", "cost"})
        mode = {"none": SanitizeMode.NONE,
                "terminate": SanitizeMode.ON_TERMINATE,
                "reassign": SanitizeMode.ON_REASSIGN}.get(args[0])
        if mode is None:
            self._fail(f"unknown policy {args[0]!r}")
        self.kernel.set_policy(SanitizePolicy(
            mode,
            fill=self._int(kv["fill"]) if "fill" in kv else 0,
            cost_per_word=self._int(kv["cost"]) if "cost" in kv else 1))

    def _op_spawn(self, args, raw):
        kv = self._kv(args[2:], {"ppid"})
        pid = self.kernel.spawn(args[0], args[1],
                                ppid=self._int(kv["ppid"]) if "ppid" in kv else 1)
        self.procs[args[0]] = pid

    def _op_terminate(self, args, raw):
        self.kernel.terminate(self._pid(args[0]))

    def _op_heap(self, args, raw):
        self.kernel.alloc_heap(self._pid(args[0]), self._int(args[1]))

    def _op_request_isolation(self, args, raw):
        self.kernel.request_isolation(self._pid(args[0]))

    def _op_fill_va(self, args, raw):
        pid = self._pid(args[0])
        proc = self.kernel.process(pid)
        master = self._master(proc.owner_master)
        va_start, va_end, value = (self._int(args[1]), self._int(args[2]),
                                   self._int(args[3]))
        for va in range(va_start, va_end + 1, WORD_BYTES):
            pa = self.kernel.pagemap_translate(pid, va)
            if self.soc.write(master, pa, value) is DENIED:
                self._fail(f"write by {master.name} denied at va 0x{va:x}")

    def _op_write_va(self, args, raw):
        self._op_fill_va((args[0], args[1], args[1], args[2]), raw)

    # -- attack verbs ---------------------------------------------------------------

    def _op_adversary(self, args, raw):
        pid = self._pid(args[0])
        self.adversary_pid = pid
        self.adversary_master = self.kernel.process(pid).owner_master

    def _op_attack_poll(self, args, raw):
        target = args[0]
        kv = self._kv(args[1:], {"terminate_at", "ticks"})
        terminate_at = self._int(kv["terminate_at"])
        ticks = self._int(kv.get("ticks", kv["terminate_at"]))
        target_pid = self.kernel.find_pid(target)
        if target_pid is None:
            self._fail(f"poll target {target!r} is not running")

        def noop():
            pass

        events = [noop] * (terminate_at - 1)
        events.append(lambda: self.kernel.terminate(target_pid))
        events.extend([noop] * max(0, ticks - terminate_at))
        self.poll_trace = atk.poll_until_terminated(self.kernel, target, events)

    def _op_attack_scrape_virtual(self, args, raw):
        self.heap_ranges = atk.scrape_virtual(self.kernel, self._adversary_proc())

    def _op_attack_scrape(self, args, raw):
        pid = self._adversary_proc()
        va_range = (self._int(args[0]), self._int(args[1]))
        pa_runs = atk.translate_range(self.kernel, pid, va_range)
        self.image = atk.scrape_image(self.soc, self._adversary(), pa_runs,
                                      scenario_id=Path(self._step.source).stem,
                                      grant_id=f"pid{pid}")
        for word in self.image.words:
            self._note_adversary_read(word.pa, word.denied)

    def _op_attack_profile(self, args, raw):
        kv = self._kv(args[3:], {"min_run"})
        plan = [(0, self._int(args[1]), self._int(args[2]))]
        profile = atk.profile_application(
            args[0], plan,
            min_run=self._int(kv["min_run"]) if "min_run" in kv else atk.DEFAULT_MIN_RUN,
            background=self.mem.background)
        self.profiles.append(profile)

    def _op_attack_reconstruct(self, args, raw):
        if self.image is None:
            self._fail("no scraped image; run attack_scrape first")
        self.match_report = atk.reconstruct(self.image, self.profiles)

    # -- snapshots ----------------------------------------------------------------

    def _op_snapshot(self, args, raw):
        self._snapshots[args[0]] = self.mem.snapshot()

    def _op_assert_snapshot_equal(self, args, raw):
        before = self._snapshots.get(args[0])
        if before is None:
            self._fail(f"no memory snapshot named {args[0]!r}")
        now = self.mem.snapshot()
        for name in before:
            if before[name] != now[name]:
                self._fail(f"memory region {name} changed since snapshot {args[0]!r}")

    def _op_snapshot_regs(self, args, raw):
        self._reg_snapshots[args[0]] = {u.name: u.raw_registers()
                                        for u in self.soc.units}

    def _op_assert_regs_equal(self, args, raw):
        before = self._reg_snapshots.get(args[0])
        if before is None:
            self._fail(f"no register snapshot named {args[0]!r}")
        kv = self._kv(args[1:], {"regs"})
        suffixes = tuple(kv["regs"].split(",")) if "regs" in kv else None
        for unit in self.soc.units:
            now = unit.raw_registers()
            for reg, value in before[unit.name].items():
                if suffixes is not None and not reg.endswith(suffixes):
                    continue
                if now[reg] != value:
                    self._fail(f"{unit.name}.{reg} changed: "
                               f"0x{value:08x} -> 0x{now[reg]:08x}")

    # -- assertions ------------------------------------------------------------------

    def _expect_token(self, args, index=0):
        if args[index] != "==":
            self._fail("assertion syntax is '<lhs...> == <value>'")
        return args[index + 1]

    def _op_assert_read(self, args, raw):
        master = self._master(args[0])
        addr = self._addr(args[1])
        expected = self._expect_token(args, 2)
        result = self.soc.read(master, addr)
        if expected == "DENIED":
            if result is not DENIED:
                self._fail(f"read 0x{addr:x}: expected DENIED, got 0x{result:08x}")
        else:
            want = self._int(expected)
            if result is DENIED or result != want:
                got = "DENIED" if result is DENIED else f"0x{result:08x}"
                self._fail(f"read 0x{addr:x}: expected 0x{want:08x}, got {got}")

    def _op_assert_reg(self, args, raw):
        unit = self.soc.unit(args[0])
        want = self._int(self._expect_token(args, 2))
        got = unit.raw_registers().get(args[1])
        if got is None:
            self._fail(f"{args[0]} has no register {args[1]!r}")
        if got != want:
            self._fail(f"{args[0]}.{args[1]}: expected 0x{want:08x}, got 0x{got:08x}")

    def _op_assert_interrupts(self, args, raw):
        want = self._int(args[0])
        got = len(self.soc.pending_interrupts())
        if got != want:
            self._fail(f"expected {want} pending interrupts, found {got}")

    def _op_clear_interrupts(self, args, raw):
        self.soc.clear_interrupts()

    def _op_assert_ps_contains(self, args, raw):
        if self.kernel.find_pid(args[0]) is None:
            self._fail(f"process listing does not contain {args[0]!r}")

    def _op_assert_ps_absent(self, args, raw):
        if self.kernel.find_pid(args[0]) is not None:
            self._fail(f"process listing still contains {args[0]!r}")

    def _op_assert_pid(self, args, raw):
        want = self._int(args[1])
        got = self.procs.get(args[0])
        if got != want:
            self._fail(f"{args[0]}: expected pid {want}, got {got}")

    def _op_assert_heap_range(self, args, raw):
        want = (self._int(args[0]), self._int(args[1]))
        if not self.heap_ranges:
            self._fail("no scraped heap ranges; run attack_scrape_virtual first")
        if self.heap_ranges[0] != want:
            got = self.heap_ranges[0]
            self._fail(f"heap range (0x{got[0]:x}, 0x{got[1]:x}) != "
                       f"expected (0x{want[0]:x}, 0x{want[1]:x})")

    def _op_assert_translation(self, args, raw):
        va, want = self._int(args[0]), self._int(args[1])
        got = self.kernel.pagemap_translate(self._adversary_proc(), va)
        if got != want:
            self._fail(f"va 0x{va:x} translated to 0x{got:x}, expected 0x{want:x}")

    def _op_assert_devmem(self, args, raw):
        pa = self._addr(args[0])
        expected = self._expect_token(args, 1)
        result = atk.devmem(self.soc, self._adversary(), pa)
        self._note_adversary_read(pa, result is DENIED)
        if expected == "DENIED":
            if result is not DENIED:
                self._fail(f"devmem 0x{pa:x}: expected DENIED, got 0x{result:08x}")
        else:
            want = self._int(expected)
            if result is DENIED or result != want:
                got = "DENIED" if result is DENIED else f"0x{result:08x}"
                self._fail(f"devmem 0x{pa:x}: expected 0x{want:08x}, got {got}")

    def _op_assert_poll_tick(self, args, raw):
        if self.poll_trace is None:
            self._fail("no poll trace recorded")
        want = self._int(args[0])
        if self.poll_trace.terminated_tick != want:
            self._fail(f"target vanished at tick {self.poll_trace.terminated_tick}, "
                       f"expected {want}")

    def _op_assert_match(self, args, raw):
        if self.match_report is None:
            self._fail("no reconstruction report; run attack_reconstruct first")
        kv = self._kv(args[1:], {"matched", "coverage"})
        try:
            match = self.match_report.for_profile(args[0])
        except KeyError:
            self._fail(f"no profile named {args[0]!r} in the report")
        if "matched" in kv and match.matched != bool(int(kv["matched"])):
            self._fail(f"profile {args[0]}: matched={match.matched}")
        if "coverage" in kv and abs(match.coverage - float(kv["coverage"])) > 1e-9:
            self._fail(f"profile {args[0]}: coverage={match.coverage}")

    def _op_assert_overhead(self, args, raw):
        kv = self._kv(args, {"words", "cycles"})
        report = self.kernel.overhead_report()
        if "words" in kv and report.sanitized_words != self._int(kv["words"]):
            self._fail(f"sanitized_words={report.sanitized_words}, "
                       f"expected {kv['words']}")
        if "cycles" in kv and report.total_cycles != self._int(kv["cycles"]):
            self._fail(f"sanitize cycles={report.total_cycles}, expected {kv['cycles']}")

    def _op_assert_report(self, args, raw):
        key = args[0]
        want = self._int(self._expect_token(args, 1))
        report = self.report()
        if key not in report:
            self._fail(f"no report field {key!r}")
        if report[key] != want:
            self._fail(f"report {key}={report[key]}, expected {want}")

    def _op_assert_transcript(self, args, raw):
        golden = Path(self._step.source).parent / args[0]
        try:
            diff = compare_transcript(self.transcript.text(), golden)
        except MissingGolden as exc:
            self._fail(str(exc))
        if diff is not None:
            head = "\n".join(diff.splitlines()[:24])
            self._fail(f"transcript differs from {golden}:\n{head}")

    def _op_expect_error(self, args, raw):
        error_name = args[0]
        inner = Step(args[1], tuple(args[2:]), raw, self._step.source, self._step.line)
        handler = getattr(self, f"_op_{inner.verb}", None)
        if handler is None:
            self._fail(f"unknown verb {inner.verb!r} inside expect_error")
        try:
            handler(inner.args, inner.raw)
        except SimError as exc:
            if type(exc).__name__ != error_name:
                self._fail(f"expected {error_name}, got {type(exc).__name__}: {exc}")
            return
        self._fail(f"expected {error_name}, but {inner.verb} succeeded")


def _policy_from_options(options: RunOptions) -> SanitizePolicy:
    mode = {"none": SanitizeMode.NONE,
            "terminate": SanitizeMode.ON_TERMINATE,
            "reassign": SanitizeMode.ON_REASSIGN}[options.policy]
    return SanitizePolicy(mode, fill=options.fill,
                          cost_per_word=options.cost_per_word)


def run_scenario(path, options: RunOptions | None = None) -> RunResult:
    """Parse and execute one script on a fresh simulator instance."""
    try:
        steps = load_scenario(path)
    except ScenarioParseError as exc:
        return RunResult("", {}, 2, str(exc))
    runner = ScenarioRunner(options)
    try:
        runner.run(steps)
    except ScenarioParseError as exc:
        return RunResult(runner.transcript.text(), runner.report(), 2, str(exc))
    except (ScenarioAssertionError, SimError) as exc:
        return RunResult(runner.transcript.text(), runner.report(), 1, str(exc))
    return RunResult(runner.transcript.text(), runner.report(), 0)


def report_text(report: dict, fmt: str = "text") -> str:
    if fmt == "structured":
        return "\n".join(f"{key}={report[key]}" for key in REPORT_KEYS) + "\n"
    return "\n".join(f"{key}: {report[key]}" for key in REPORT_KEYS) + "\n"
