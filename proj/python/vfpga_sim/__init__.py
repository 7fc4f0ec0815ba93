# SPDX-License-Identifier: Apache-2.0
"""Simulated Virtio-FPGA stack.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations: firmware containers, scenario loading, the booted system
state, and the DMA benchmark harness.
"""

from ._vfpga import (  # noqa: F401
    BenchRecord,
    BitstreamImage,
    DeviceRecord,
    DeviceType,
    DmaMode,
    Env,
    ProgramStatus,
    Scenario,
    SystemState,
    TimeModel,
    VfpgaError,
    XferParams,
    compute_overhead_pct,
    crc32_ieee,
    decode_image,
    emit_overhead_csv,
    emit_report_csv,
    emit_report_markdown,
    encode_image,
    parse_dts_roundtrip,
    selftest,
)

__version__ = "0.1.0"
