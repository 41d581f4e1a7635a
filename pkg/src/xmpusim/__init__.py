"""Register-level simulator of a Zynq-style memory-protection subsystem."""

from .kernel import Kernel, SanitizeMode, SanitizePolicy
from .mem import MemRegionDecl, PhysMemory, RegionKind
from .scenario import RunOptions, run_scenario
from .soc import DENIED, Master, SoC, Transaction, WRITE_OK
from .xmpu import Op, XmpuInstance

__version__ = "0.1.0"

__all__ = [
    "DENIED", "Kernel", "Master", "MemRegionDecl", "Op", "PhysMemory",
    "RegionKind", "RunOptions", "SanitizeMode", "SanitizePolicy", "SoC",
    "Transaction", "WRITE_OK", "XmpuInstance", "run_scenario",
]
