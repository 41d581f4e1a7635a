"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for every error raised by the simulator."""


# -- physical memory ---------------------------------------------------------

class UnmappedAddress(SimError):
    """Address falls outside every declared memory region."""


class Misaligned(SimError):
    """Word access with a non word-aligned address."""


class RangeCrossesRegions(SimError):
    """Fill range is not contained in a single declared region."""


# -- protection unit ---------------------------------------------------------

class UnknownRegister(SimError):
    """Register id does not name CTRL, LOCK or a region sub-register."""


# -- embedded OS model -------------------------------------------------------

class NoSuchPid(SimError):
    """Pid was never assigned or the process already terminated."""


class AlreadyTerminated(SimError):
    """Lifecycle operation on a process that is no longer running."""


class OutOfPhysicalPages(SimError):
    """Backing store cannot supply enough pages for a heap request."""


class UnmappedVa(SimError):
    """Virtual address is not covered by the process page table."""


class RegionBusy(SimError):
    """Isolation request while another live grant holds the region set."""


class BrokerDenied(SimError):
    """The brokering master could not program the protection unit."""


# -- attack pipeline ---------------------------------------------------------

class NoHeap(SimError):
    """Process maps contain no heap segment."""


class TargetNeverSeen(SimError):
    """Polled target was absent from the very first process listing."""


class TargetStillRunning(SimError):
    """Polling schedule ran out before the target terminated."""


class EmptyLayout(SimError):
    """Watermark plan produced nothing that can be profiled."""


# -- scenario harness --------------------------------------------------------

class ScenarioParseError(SimError):
    """Scenario script is malformed; carries file/line/column context."""

    def __init__(self, message, source="<script>", line=0, column=0):
        super().__init__(f"{source}:{line}:{column}: {message}")
        self.source = source
        self.line = line
        self.column = column


class ScenarioAssertionError(SimError):
    """An assert step in a scenario script failed."""

    def __init__(self, message, source="<script>", line=0):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


class MissingGolden(SimError):
    """Golden transcript file does not exist."""
