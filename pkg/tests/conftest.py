import pytest

from xmpusim.kernel import Kernel
from xmpusim.mem import MemRegionDecl, PhysMemory, RegionKind
from xmpusim.soc import SoC

APU_SMID = 0x060
RPU_SMID = 0x010
PMU_SMID = 0x080


def small_memory(background=0x00000000):
    return PhysMemory([
        MemRegionDecl("DDR_NS", 0x40000000, 0x10000, RegionKind.DDR),
        MemRegionDecl("DDR_S", 0x70000000, 0x10000, RegionKind.DDR),
        MemRegionDecl("OCM_S", 0xFFFC0000, 0x10000, RegionKind.OCM),
    ], background=background)


def small_soc(background=0x00000000):
    soc = SoC(small_memory(background))
    soc.add_master("APU", APU_SMID, secure=True)
    soc.add_master("RPU", RPU_SMID, secure=False)
    soc.add_master("PMU", PMU_SMID, secure=True)
    soc.add_xmpu("DDR_MPU", 0x40000000, 0x40000000)
    soc.add_xmpu("OCM_MPU", 0xFFFC0000, 0x10000)
    return soc


def small_kernel(background=0x00000000, **kwargs):
    soc = small_soc(background)
    ddr_s = soc.memory.region("DDR_S")
    slot = soc.unit("DDR_MPU").slots[0]
    slot.start = ddr_s.base
    slot.end = ddr_s.end
    slot.read_en = True
    slot.write_en = True
    kwargs.setdefault("grant_slots", (("DDR_MPU", 0),))
    kwargs.setdefault("arena_region", "DDR_NS")
    return Kernel(soc, **kwargs)


@pytest.fixture
def mem():
    return small_memory()


@pytest.fixture
def soc():
    return small_soc()


@pytest.fixture
def kernel():
    return small_kernel()
