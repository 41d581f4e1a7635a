"""Residue-disclosure pipeline: poll, scrape, translate, read, reconstruct.

The six steps run against a live kernel/SoC pair with ordinary user
privileges.  Profiling builds reference signatures in a private memory
instance so it can never perturb the scenario under attack; matching is
run-length and offset based over the scraped image.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyLayout, NoHeap, TargetNeverSeen, TargetStillRunning
from .kernel import Kernel, PAGE_MASK, PAGE_SIZE
from .mem import MemRegionDecl, PhysMemory, RegionKind, WORD_BYTES
from .soc import DENIED, Master, SoC, POISON_WORD

WILDCARD = "*"
DEFAULT_MIN_RUN = 16

_HEAP_LINE = re.compile(r"^([0-9a-f]+)-([0-9a-f]+)\s+\S+.*\[heap\]\s*$")


# -- step 1: polling -----------------------------------------------------------


@dataclass(frozen=True)
class PollTrace:
    """Outcome of polling a name out of the process listings.

    The target was present in listing `terminated_tick` and gone in the
    next one; `before` and `after` are those two listings.
    """

    target: str
    terminated_tick: int
    before: str
    after: str
    samples: int


def poll_until_terminated(kernel: Kernel, target_name: str, events) -> PollTrace:
    """Sample the process listing around each scripted event tick until the
    target vanishes."""

    def present(listing: str) -> bool:
        return any(line.split()[-1] == target_name for line in listing.splitlines())

    listing = kernel.ps_listing()
    if not present(listing):
        raise TargetNeverSeen(f"{target_name} not in the initial process listing")
    tick = 0
    for event in events:
        tick += 1
        event()
        sample = kernel.ps_listing()
        if not present(sample):
            return PollTrace(target_name, tick, listing, sample, tick + 1)
        listing = sample
    raise TargetStillRunning(f"{target_name} still listed after {tick} ticks")


# -- steps 3 and 4: address recovery ---------------------------------------------


def scrape_virtual(kernel: Kernel, pid: int) -> list[tuple[int, int]]:
    """Heap [start, end) virtual ranges parsed from the process maps."""
    ranges = []
    for line in kernel.proc_maps(pid).splitlines():
        m = _HEAP_LINE.match(line.strip())
        if m:
            ranges.append((int(m.group(1), 16), int(m.group(2), 16)))
    if not ranges:
        raise NoHeap(f"pid {pid} has no [heap] segment")
    return sorted(ranges)


def translate_range(kernel: Kernel, pid: int, va_range: tuple[int, int]) -> list[tuple[int, int]]:
    """Translate an inclusive virtual range into maximal physical runs.

    Adjacent physical pages coalesce; a gap in the backing produces a
    new run.  Bounds keep their page offsets.
    """
    va_start, va_end = va_range
    if va_start > va_end:
        raise ValueError(f"va range start 0x{va_start:x} > end 0x{va_end:x}")
    first_page = va_start & ~PAGE_MASK
    last_page = va_end & ~PAGE_MASK
    pa_pages = [kernel.pagemap_translate(pid, page)
                for page in range(first_page, last_page + 1, PAGE_SIZE)]
    runs: list[list[int]] = []
    for i, pa_page in enumerate(pa_pages):
        lo = pa_page if i > 0 else pa_page | (va_start & PAGE_MASK)
        hi = (pa_page + PAGE_SIZE - 1) if i < len(pa_pages) - 1 else pa_page | (va_end & PAGE_MASK)
        if runs and runs[-1][1] + 1 == lo:
            runs[-1][1] = hi
        else:
            runs.append([lo, hi])
    return [(lo, hi) for lo, hi in runs]


# -- step 5: residue scraping -----------------------------------------------------


@dataclass(frozen=True)
class ImageWord:
    pa: int
    value: int
    denied: bool


@dataclass(frozen=True)
class MemoryImage:
    """Scraped snapshot: strictly increasing word addresses plus provenance."""

    words: tuple[ImageWord, ...]
    scenario_id: str = ""
    grant_id: str = ""
    tick: int = 0

    def __post_init__(self):
        last = -1
        for w in self.words:
            if w.pa <= last:
                raise ValueError("image addresses must be strictly increasing")
            last = w.pa


def devmem(soc: SoC, master: Master, pa: int):
    """Raw physical read issued by `master`; the word, or DENIED."""
    return soc.read(master, pa)


def scrape_image(soc: SoC, master: Master, pa_ranges,
                 scenario_id: str = "", grant_id: str = "", tick: int = 0) -> MemoryImage:
    """devmem over every word of the given inclusive ranges.

    Denied words are recorded as the poison word with a denied marker so
    they stay distinguishable from an honestly read poison value.
    """
    words = []
    for start, end in pa_ranges:
        for pa in range(start & ~0x3, (end & ~0x3) + 1, WORD_BYTES):
            value = devmem(soc, master, pa)
            if value is DENIED:
                words.append(ImageWord(pa, POISON_WORD, True))
            else:
                words.append(ImageWord(pa, value, False))
    return MemoryImage(tuple(words), scenario_id, grant_id, tick)


def image_to_text(image: MemoryImage) -> str:
    lines = [f"image scenario={image.scenario_id or '-'} "
             f"grant={image.grant_id or '-'} tick={image.tick}"]
    for w in image.words:
        lines.append(f"{w.pa:011x}: {w.value:08x} {'DENIED' if w.denied else 'ALLOW'}")
    return "\n".join(lines)


def image_from_text(text: str) -> MemoryImage:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    scenario_id = grant_id = ""
    tick = 0
    if lines and lines[0].startswith("image "):
        meta = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
        scenario_id = "" if meta.get("scenario", "-") == "-" else meta["scenario"]
        grant_id = "" if meta.get("grant", "-") == "-" else meta["grant"]
        tick = int(meta.get("tick", "0"))
        lines = lines[1:]
    words = []
    for line in lines:
        addr_s, rest = line.split(":", 1)
        value_s, marker = rest.split()
        words.append(ImageWord(int(addr_s, 16), int(value_s, 16), marker == "DENIED"))
    return MemoryImage(tuple(words), scenario_id, grant_id, tick)


# -- step 6: profiling and reconstruction -------------------------------------------


@dataclass(frozen=True)
class SignaturePattern:
    """One expected run: `words` is the repeating unit, `expected` the run
    length in words seen during profiling, `offset` a byte offset relative
    to the image start or WILDCARD for match-anywhere."""

    words: tuple[int, ...]
    min_run: int
    expected: int
    offset: object = WILDCARD


@dataclass(frozen=True)
class SignatureProfile:
    name: str
    patterns: tuple[SignaturePattern, ...]

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("profile must carry at least one pattern")
        for p in self.patterns:
            if p.min_run < 1:
                raise ValueError("min_run must be >= 1")


@dataclass(frozen=True)
class ProfileMatch:
    profile: str
    matched: bool
    hits: tuple[tuple[int, int], ...]  # (pa, run length in words) per pattern hit
    coverage: float


@dataclass(frozen=True)
class MatchReport:
    matches: tuple[ProfileMatch, ...]

    def for_profile(self, name: str) -> ProfileMatch:
        for m in self.matches:
            if m.profile == name:
                return m
        raise KeyError(name)

    @property
    def matched_count(self) -> int:
        return sum(1 for m in self.matches if m.matched)


def profile_application(app_name: str, plan, min_run: int = DEFAULT_MIN_RUN,
                        background: int = 0x00000000) -> SignatureProfile:
    """Run the watermark plan in a private sandbox and extract signatures.

    `plan` is a sequence of (byte_offset, word, count) writes the target
    application is known to perform.  The sandbox memory is private to
    this call, so profiling can never disturb a live scenario.
    """
    plan = list(plan)
    if not plan or all(count <= 0 for _, _, count in plan):
        raise EmptyLayout(f"{app_name}: watermark plan declares no writes")
    span = max(off + count * WORD_BYTES for off, _, count in plan)
    size = (span + PAGE_MASK) & ~PAGE_MASK
    sandbox = PhysMemory([MemRegionDecl("SANDBOX", 0, size, RegionKind.DDR)],
                         background=background)
    for off, word, count in plan:
        if count > 0:
            sandbox.fill(off, off + (count - 1) * WORD_BYTES, word, writer=app_name)
    scraped = [sandbox.read(a) for a in range(0, size, WORD_BYTES)]
    patterns = []
    i = 0
    while i < len(scraped):
        value = scraped[i]
        j = i
        while j < len(scraped) and scraped[j] == value:
            j += 1
        if value != background and j - i >= min_run:
            patterns.append(SignaturePattern((value,), min_run, j - i))
        i = j
    if not patterns:
        raise EmptyLayout(f"{app_name}: no run reaches the {min_run}-word threshold")
    return SignatureProfile(app_name, tuple(patterns))


def _contiguous_segments(image: MemoryImage):
    """Split the image into runs of adjacent, successfully read words."""
    segments = []
    current: list[ImageWord] = []
    for w in image.words:
        if w.denied:
            if current:
                segments.append(current)
            current = []
            continue
        if current and current[-1].pa + WORD_BYTES != w.pa:
            segments.append(current)
            current = []
        current.append(w)
    if current:
        segments.append(current)
    return segments


def _pattern_hits(image: MemoryImage, pattern: SignaturePattern):
    image_base = image.words[0].pa if image.words else 0
    hits = []
    unit = pattern.words
    for segment in _contiguous_segments(image):
        i = 0
        while i < len(segment):
            length = 0
            while (i + length < len(segment)
                   and segment[i + length].value == unit[length % len(unit)]):
                length += 1
            if length >= pattern.min_run:
                start_pa = segment[i].pa
                if pattern.offset is WILDCARD or pattern.offset == start_pa - image_base:
                    hits.append((start_pa, length))
            i += max(length, 1)
    return hits


def reconstruct(image: MemoryImage, profiles) -> MatchReport:
    """Match every profile against the image; coverage is matched words over
    the words the profile expects, capped at 1.0."""
    if not image.words:
        raise ValueError("cannot reconstruct from an empty image")
    matches = []
    for profile in profiles:
        all_hits = []
        matched = True
        found_words = 0
        expected_words = 0
        for pattern in profile.patterns:
            hits = _pattern_hits(image, pattern)
            expected_words += pattern.expected
            if hits:
                all_hits.extend(hits)
                best = max(length for _, length in hits)
                found_words += min(best, pattern.expected)
            else:
                matched = False
        coverage = min(1.0, found_words / expected_words) if expected_words else 0.0
        matches.append(ProfileMatch(profile.name, matched, tuple(sorted(all_hits)), coverage))
    return MatchReport(tuple(matches))


# -- profile files -------------------------------------------------------------


def profile_to_text(profile: SignatureProfile) -> str:
    lines = [f"profile {profile.name}"]
    for p in profile.patterns:
        offset = "*" if p.offset is WILDCARD else f"0x{p.offset:x}"
        words = ",".join(f"{w:08x}" for w in p.words)
        lines.append(f"pattern offset={offset} min_run={p.min_run} "
                     f"expected={p.expected} words={words}")
    return "\n".join(lines)


def profile_from_text(text: str) -> SignatureProfile:
    name = None
    patterns = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("profile "):
            name = line.split(None, 1)[1]
            continue
        if not line.startswith("pattern "):
            raise ValueError(f"unrecognized profile line: {raw!r}")
        fields = dict(kv.split("=", 1) for kv in line.split()[1:])
        offset = WILDCARD if fields["offset"] == "*" else int(fields["offset"], 0)
        words = tuple(int(w, 16) for w in fields["words"].split(","))
        patterns.append(SignaturePattern(words, int(fields["min_run"]),
                                         int(fields["expected"]), offset))
    if name is None:
        raise ValueError("profile file is missing the 'profile <name>' header")
    return SignatureProfile(name, tuple(patterns))
