"""Throughput, energy-efficiency and area-efficiency models.

Area: each crossbar cell holds a differential pair, so PCM area is
weights_total * 2 * 18.2 um^2 summed over the claimed allocations,
padding included. The full-area variant adds the digital cluster and
accelerator periphery.

Energy: streamed bytes and array operations carry fixed per-unit dynamic
costs; the cores burn an active power while software phases run and an
idle power otherwise; a baseline static power covers the whole run, plus
a per-port term for the streamer/interconnect of the accelerator
subsystem (wider-port designs are physically larger, which is what makes
over-provisioned ports cost efficiency once the bandwidth has saturated).
The accelerator subsystem is treated as power-gated in software-only
schedules.

All energy parameters and the cluster area are calibration constants
fitted to reproduce endpoint metrics, not measurements; they ship in
calibration/default.json and every report labels them as fitted.

Throughput convention: 1 MAC = 2 OPs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .mapper import CrossbarAllocation
from .timing import ScheduleResult

UM2_PER_MM2 = 1e6


@dataclass(frozen=True, slots=True)
class AreaModel:
    pcm_device_um2: float = 18.2
    devices_per_weight: int = 2
    cluster_mm2: float = 0.2228       # calibrated, not measured
    ima_periphery_mm2: float = 0.0    # calibrated, not measured

    def __post_init__(self):
        if min(self.pcm_device_um2, self.cluster_mm2, self.ima_periphery_mm2) < 0:
            raise ValueError("area parameters must be nonnegative")


@dataclass(frozen=True, slots=True)
class EnergyModel:
    e_stream_in_pj_per_byte: float = 0.33
    e_stream_out_pj_per_byte: float = 0.33
    e_job_fixed_pj: float = 150.0       # DAC + array + ADC per operation
    p_core_active_mw: float = 2.0       # 8-core cluster, software phases
    p_core_idle_mw: float = 0.8
    p_cluster_static_mw: float = 2.8
    p_ima_port_mw: float = 0.04         # per 32-bit TCDM master port

    def __post_init__(self):
        vals = (self.e_stream_in_pj_per_byte, self.e_stream_out_pj_per_byte,
                self.e_job_fixed_pj, self.p_core_active_mw,
                self.p_core_idle_mw, self.p_cluster_static_mw,
                self.p_ima_port_mw)
        if min(vals) < 0:
            raise ValueError("energy parameters must be nonnegative")


def pcm_area_mm2(allocations: Iterable[CrossbarAllocation],
                 model: AreaModel) -> float:
    cells = sum(a.weights_total for a in allocations)
    return cells * model.devices_per_weight * model.pcm_device_um2 / UM2_PER_MM2


def area(allocations: Iterable[CrossbarAllocation], model: AreaModel,
         include_cluster: bool = False) -> float:
    """Silicon area in mm^2: PCM arrays, optionally plus cluster + periphery."""
    total = pcm_area_mm2(allocations, model)
    if include_cluster:
        total += model.cluster_mm2 + model.ima_periphery_mm2
    return total


def energy(schedule: ScheduleResult, model: EnergyModel) -> float:
    """Total energy of a schedule in joules."""
    t_total = schedule.wall_time_s
    t_active = schedule.sw_active_cycles / schedule.f_hz
    t_idle = t_total - t_active
    joules = (schedule.bytes_streamed_in * model.e_stream_in_pj_per_byte
              + schedule.bytes_streamed_out * model.e_stream_out_pj_per_byte
              + schedule.ima_jobs * model.e_job_fixed_pj) * 1e-12
    joules += (model.p_core_active_mw * t_active
               + model.p_core_idle_mw * t_idle
               + model.p_cluster_static_mw * t_total) * 1e-3
    if schedule.ima_jobs > 0:  # accelerator power-gated when unused
        joules += model.p_ima_port_mw * schedule.ports.total * t_total * 1e-3
    return joules


@dataclass(frozen=True, slots=True)
class MetricsReport:
    gops: float
    tops_per_w: float
    gops_per_mm2_pcm: float | None  # undefined when no PCM is allocated
    gops_per_mm2_full: float
    total_cycles: int
    wall_time_s: float
    energy_j: float
    macs: int

    def to_dict(self) -> dict:
        return {
            "gops": self.gops,
            "tops_per_w": self.tops_per_w,
            "gops_per_mm2_pcm": self.gops_per_mm2_pcm,
            "gops_per_mm2_full": self.gops_per_mm2_full,
            "total_cycles": self.total_cycles,
            "wall_time_s": self.wall_time_s,
            "energy_j": self.energy_j,
            "macs": self.macs,
        }


def report(schedule: ScheduleResult,
           allocations: Iterable[CrossbarAllocation],
           area_model: AreaModel,
           energy_model: EnergyModel) -> MetricsReport:
    """Combine a schedule with area/energy models into the headline metrics."""
    allocations = list(allocations)
    ops = 2 * schedule.macs
    gops = ops * schedule.f_hz / (schedule.total_cycles * 1e9)
    joules = energy(schedule, energy_model)
    tops_per_w = ops / joules / 1e12 if joules > 0 else 0.0
    a_pcm = pcm_area_mm2(allocations, area_model)
    a_full = area(allocations, area_model, include_cluster=True)
    return MetricsReport(
        gops=gops,
        tops_per_w=tops_per_w,
        gops_per_mm2_pcm=(gops / a_pcm) if a_pcm > 0 else None,
        gops_per_mm2_full=gops / a_full,
        total_cycles=schedule.total_cycles,
        wall_time_s=schedule.wall_time_s,
        energy_j=joules,
        macs=schedule.macs)
