"""Cycle model for accelerator jobs, software execution, and block schedules.

An accelerator job runs three strictly sequential phases (a pipelined
overlap of stream-in with compute can be enabled as a sensitivity knob,
default off):

  stream-in   ceil(segment_bytes / (4 * n_load)) cycles per real segment;
              zero-fill segments cost nothing
  compute     ceil(t_array_ns * f / 1e9) cycles, fixed per array operation
  stream-out  ceil(output_bytes / (4 * n_store)) cycles

Jobs of a layer run back-to-back with a small per-job trigger/handshake,
and one configuration burst is charged per layer (multiple jobs pipeline
behind a single register-file setup). Handshake cycles are reported inside
the `config` bucket of the phase breakdown.

Software execution on the 8-core cluster is throughput-modeled:
macs / (n_cores * simd_macs_per_core_cycle * eta), with a high utilization
factor for standard/pointwise convolutions and a separate calibrated factor
for depthwise. A software depthwise additionally pays an HWC->CHW->HWC
marshalling pass (2 * h * w * c bytes at marshal_bytes_per_cycle); the
accelerator consumes HWC directly and never marshals.

The TCDM is modeled as an ideal word-interleaved scratchpad (segments are
contiguous and ports never exceed banks); `contention_factor` scales the
stream phases for sensitivity studies and defaults to 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .workload import (
    BottleneckDescriptor,
    DepthwiseConv,
    LayerDescriptor,
    PointwiseConv,
    TensorShape,
    macs,
    output_shape,
)
from . import mapper
from .mapper import JobStream, MappingStrategy

PORT_CHOICES = (1, 2, 4, 8, 16)
PORT_WIDTH_BYTES = 4


@dataclass(frozen=True, slots=True)
class PortConfig:
    n_load: int
    n_store: int

    def __post_init__(self):
        if self.n_load not in PORT_CHOICES or self.n_store not in PORT_CHOICES:
            raise ValueError(f"port counts must be one of {PORT_CHOICES}")
        if self.n_load + self.n_store > 2 * 16:
            raise ValueError("total ports exceed the bank count bound")

    @property
    def total(self) -> int:
        return self.n_load + self.n_store

    def __str__(self):
        return f"{self.n_load}/{self.n_store}"


@dataclass(frozen=True, slots=True)
class ClusterConfig:
    n_cores: int = 8
    f_hz: int = 250_000_000
    n_banks: int = 16
    bank_width: int = 4
    simd_macs_per_core_cycle: int = 4
    eta_conv: float = 0.55   # SIMD MAC utilization, standard/pointwise
    eta_dw: float = 0.1305   # calibrated, not measured (see calibration file)
    marshal_bytes_per_cycle: int = 8
    contention_factor: float = 1.0

    def __post_init__(self):
        if not (0 < self.eta_conv <= 1 and 0 < self.eta_dw <= 1):
            raise ValueError("utilization factors must be in (0, 1]")
        if self.contention_factor < 1.0:
            raise ValueError("contention factor must be >= 1.0")

    def sw_macs_per_cycle(self, eta: float) -> float:
        return self.n_cores * self.simd_macs_per_core_cycle * eta


@dataclass(frozen=True, slots=True)
class ImaTiming:
    t_array_ns: float = 70.0
    cfg_overhead_cycles: int = 32   # one register-file burst per layer
    job_handshake_cycles: int = 2
    overlap_streamin_compute: bool = False

    def __post_init__(self):
        if self.t_array_ns <= 0:
            raise ValueError("array operation time must be positive")


@dataclass(frozen=True, slots=True)
class PhaseBreakdown:
    streamin: int = 0
    compute: int = 0
    streamout: int = 0
    config: int = 0   # per-layer configuration + per-job handshakes
    sw: int = 0       # core execution (SW conv layers, residual adds)
    marshal: int = 0  # HWC<->CHW conversion, SW depthwise only

    @property
    def total(self) -> int:
        return (self.streamin + self.compute + self.streamout
                + self.config + self.sw + self.marshal)

    def __add__(self, other: "PhaseBreakdown") -> "PhaseBreakdown":
        return PhaseBreakdown(
            self.streamin + other.streamin,
            self.compute + other.compute,
            self.streamout + other.streamout,
            self.config + other.config,
            self.sw + other.sw,
            self.marshal + other.marshal)


class Plan(Enum):
    SW = "sw"           # everything on the cores
    IMA8 = "ima8"       # all layers on the accelerator, depthwise c_job=8
    IMA16 = "ima16"     # all layers on the accelerator, depthwise c_job=16
    HYBRID = "hybrid"   # pointwise on the accelerator, depthwise on the cores


PLAN_ORDER = (Plan.SW, Plan.IMA8, Plan.IMA16, Plan.HYBRID)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def streamin_cycles(segments, n_load: int) -> int:
    """Cycles to stream a job's input segments through n_load 32-bit ports."""
    beat = PORT_WIDTH_BYTES * n_load
    return sum(_ceil_div(s.length, beat) for s in segments if not s.zero_fill)


def streamout_cycles(out_bytes: int, n_store: int) -> int:
    return _ceil_div(out_bytes, PORT_WIDTH_BYTES * n_store)


def array_op_cycles(t_array_ns: float, f_hz: int) -> int:
    """Cycles spanned by an analog operation of t_array_ns at the cluster clock."""
    return _ceil_div(int(t_array_ns * f_hz), 1_000_000_000)


def compute_cycles(ima: ImaTiming, f_hz: int) -> int:
    """Cycles of one analog array operation at the cluster clock."""
    return array_op_cycles(ima.t_array_ns, f_hz)


def _scale_contention(cycles: int, cluster: ClusterConfig) -> int:
    if cluster.contention_factor == 1.0:
        return cycles
    return math.ceil(cycles * cluster.contention_factor)


def _stream_phase_totals(stream: JobStream, ports: PortConfig) -> tuple[int, int]:
    """(streamin, streamout) cycle totals over all jobs, vectorized."""
    lengths = np.array([s.length for job in stream.jobs for s in job.segments
                        if not s.zero_fill], dtype=np.int64)
    beat_in = PORT_WIDTH_BYTES * ports.n_load
    si = int(np.sum((lengths + beat_in - 1) // beat_in)) if lengths.size else 0
    outs = np.array([job.out_length for job in stream.jobs], dtype=np.int64)
    beat_out = PORT_WIDTH_BYTES * ports.n_store
    so = int(np.sum((outs + beat_out - 1) // beat_out))
    return si, so


def layer_cycles_ima(layer: LayerDescriptor, strategy: MappingStrategy,
                     in_shape: TensorShape, ports: PortConfig,
                     ima: ImaTiming, cluster: ClusterConfig) -> PhaseBreakdown:
    """Accelerator phase breakdown of one full layer."""
    stream = mapper.job_stream(layer, in_shape, strategy)
    return stream_cycles_ima(stream, ports, ima, cluster)


def stream_cycles_ima(stream: JobStream, ports: PortConfig,
                      ima: ImaTiming, cluster: ClusterConfig) -> PhaseBreakdown:
    """Phase breakdown of a prebuilt job stream (lets sweeps reuse streams)."""
    n_jobs = len(stream.jobs)
    si, so = _stream_phase_totals(stream, ports)
    si = _scale_contention(si, cluster)
    so = _scale_contention(so, cluster)
    comp = n_jobs * compute_cycles(ima, cluster.f_hz)
    if ima.overlap_streamin_compute:
        # idealized pipelining: stream-in hides behind compute where possible
        si = max(0, si - comp)
    cfg = ima.cfg_overhead_cycles + n_jobs * ima.job_handshake_cycles
    return PhaseBreakdown(streamin=si, compute=comp, streamout=so, config=cfg)


def layer_cycles_sw(layer: LayerDescriptor, in_shape: TensorShape,
                    cluster: ClusterConfig) -> PhaseBreakdown:
    """Software phase breakdown of one layer on the 8-core cluster."""
    n_macs = macs(layer, in_shape)
    if isinstance(layer, DepthwiseConv):
        eta = cluster.eta_dw
        elems = in_shape.height * in_shape.width * in_shape.channels
        marshal = _ceil_div(2 * elems, cluster.marshal_bytes_per_cycle)
    else:
        eta = cluster.eta_conv
        marshal = 0
    # scaled-integer ceiling: exact for calibration etas of <= 6 decimals
    rate_micro = round(cluster.sw_macs_per_cycle(eta) * 1_000_000)
    sw = _ceil_div(n_macs * 1_000_000, rate_micro)
    return PhaseBreakdown(sw=sw, marshal=marshal)


def residual_add_cycles(shape: TensorShape, cluster: ClusterConfig) -> int:
    """Elementwise residual addition on the cores (one byte lane per core)."""
    return _ceil_div(shape.size_bytes, cluster.n_cores * 4)


@dataclass(frozen=True, slots=True)
class ScheduleResult:
    plan: Plan
    ports: PortConfig
    layers: tuple[tuple[str, PhaseBreakdown], ...]
    totals: PhaseBreakdown
    macs: int
    bytes_streamed_in: int
    bytes_streamed_out: int
    ima_jobs: int
    f_hz: int

    @property
    def total_cycles(self) -> int:
        return self.totals.total

    @property
    def wall_time_s(self) -> float:
        return self.total_cycles / self.f_hz

    @property
    def sw_active_cycles(self) -> int:
        # cycles during which the cores do useful work
        return self.totals.sw + self.totals.marshal


_DW_CJOB = {Plan.IMA8: 8, Plan.IMA16: 16}


def plan_strategy(plan: Plan, layer: LayerDescriptor) -> MappingStrategy | None:
    """Strategy a plan assigns to a layer; None means software execution."""
    if plan is Plan.SW:
        return None
    if isinstance(layer, DepthwiseConv):
        c_job = _DW_CJOB.get(plan)
        if c_job is None:  # HYBRID runs depthwise on the cores
            return None
        return mapper.depthwise_block(min(c_job, layer.c))
    return mapper.default_strategy(layer)


def plan_allocations(b: BottleneckDescriptor, plan: Plan) -> list[mapper.CrossbarAllocation]:
    """Crossbar allocations a plan claims for a bottleneck (for area models)."""
    allocs = []
    shape = b.input_shape
    for layer in b.expand():
        strategy = plan_strategy(plan, layer)
        if strategy is not None:
            allocs.append(mapper.map_layer(layer, strategy))
        shape = output_shape(layer, shape)
    return allocs


def _layer_name(layer: LayerDescriptor, index: int) -> str:
    if isinstance(layer, DepthwiseConv):
        return f"l{index}.depthwise"
    if isinstance(layer, PointwiseConv):
        return f"l{index}.pointwise"
    return f"l{index}.conv"


def bottleneck_schedule(b: BottleneckDescriptor, plan: Plan, ports: PortConfig,
                        ima: ImaTiming, cluster: ClusterConfig) -> ScheduleResult:
    """Sequential execution of a bottleneck under a plan.

    Layers run one after another with no cross-layer overlap; the residual
    addition (when the block has one) is charged as a software elementwise
    pass at the end.
    """
    entries: list[tuple[str, PhaseBreakdown]] = []
    total_macs = 0
    bytes_in = 0
    bytes_out = 0
    n_jobs = 0
    shape = b.input_shape
    for i, layer in enumerate(b.expand()):
        name = _layer_name(layer, i)
        strategy = plan_strategy(plan, layer)
        if strategy is None:
            entries.append((name, layer_cycles_sw(layer, shape, cluster)))
        else:
            stream = mapper.job_stream(layer, shape, strategy)
            entries.append((name, stream_cycles_ima(stream, ports, ima, cluster)))
            bi, bo = mapper.stream_bytes(stream)
            bytes_in += bi
            bytes_out += bo
            n_jobs += len(stream.jobs)
        total_macs += macs(layer, shape)
        shape = output_shape(layer, shape)
    if b.residual:
        entries.append(("residual",
                        PhaseBreakdown(sw=residual_add_cycles(shape, cluster))))
    totals = PhaseBreakdown()
    for _, phases in entries:
        totals = totals + phases
    return ScheduleResult(plan=plan, ports=ports, layers=tuple(entries),
                          totals=totals, macs=total_macs,
                          bytes_streamed_in=bytes_in,
                          bytes_streamed_out=bytes_out,
                          ima_jobs=n_jobs, f_hz=cluster.f_hz)
