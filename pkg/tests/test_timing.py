import dataclasses

import pytest

from imasim import mapper, timing
from imasim.mapper import Segment, depthwise_block
from imasim.timing import (
    ClusterConfig,
    ImaTiming,
    PhaseBreakdown,
    Plan,
    PortConfig,
    array_op_cycles,
)
from imasim.workload import (
    DepthwiseConv,
    PointwiseConv,
    StandardConv,
    TensorShape,
    default_bottleneck,
    macs,
)

BASELINE_CONV = StandardConv(k=3, c_in=32, c_out=64, stride=1, pad=1)
BASELINE_IN = TensorShape(16, 16, 32)


def segs(n, length):
    return [Segment(0, length) for _ in range(n)]


class TestPhaseArithmetic:
    def test_streamin_bandwidth(self):
        assert timing.streamin_cycles(segs(9, 32), n_load=1) == 72
        assert timing.streamin_cycles(segs(1, 192), n_load=4) == 12

    def test_streamin_saturates(self):
        # a 16-byte depthwise slice fits one beat at >= 4 load ports
        for n in (4, 8, 16):
            assert timing.streamin_cycles(segs(9, 16), n_load=n) == 9

    def test_zero_fill_costs_nothing(self):
        padded = segs(5, 32) + [Segment(0, 32, zero_fill=True)] * 4
        assert timing.streamin_cycles(padded, n_load=1) == 40

    def test_array_op_cycles(self):
        assert array_op_cycles(70, 250_000_000) == 18  # ceil(17.5)
        assert array_op_cycles(70, 100_000_000) == 7
        assert array_op_cycles(0, 250_000_000) == 0

    def test_compute_cycles_from_timing(self, cal):
        assert timing.compute_cycles(cal.ima, cal.cluster.f_hz) == 18

    def test_streamout(self):
        assert timing.streamout_cycles(64, 1) == 16
        assert timing.streamout_cycles(64, 16) == 1
        assert timing.streamout_cycles(0, 4) == 0


class TestPortConfig:
    def test_str(self):
        assert str(PortConfig(4, 4)) == "4/4"

    @pytest.mark.parametrize("bad", [(3, 3), (0, 1), (1, 32), (5, 4)])
    def test_invalid_counts_rejected(self, bad):
        with pytest.raises(ValueError):
            PortConfig(*bad)

    def test_all_supported(self):
        for n in (1, 2, 4, 8, 16):
            PortConfig(n, n)


class TestBaselineConvLayer:
    def test_sw_cycles_and_throughput(self, cal):
        phases = timing.layer_cycles_sw(BASELINE_CONV, BASELINE_IN, cal.cluster)
        assert phases.sw == 268_102  # ceil(4,718,592 / (8 * 4 * 0.55))
        assert phases.marshal == 0
        gops = 2 * macs(BASELINE_CONV, BASELINE_IN) * cal.cluster.f_hz \
            / (phases.total * 1e9)
        assert gops == pytest.approx(8.8, rel=0.01)

    def test_ima_1_1_total(self, cal):
        phases = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                         BASELINE_IN, PortConfig(1, 1),
                                         cal.ima, cal.cluster)
        assert phases.total == 26_176
        assert phases.streamin == 16_928  # 46*46 segments, 8 cycles each
        assert phases.compute == 256 * 18
        assert phases.streamout == 256 * 16
        assert phases.config == 32 + 256 * 2

    def test_speedup_range(self, cal):
        sw = timing.layer_cycles_sw(BASELINE_CONV, BASELINE_IN, cal.cluster).total
        speedups = []
        for n in (1, 2, 4, 8, 16):
            ima = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                          BASELINE_IN, PortConfig(n, n),
                                          cal.ima, cal.cluster)
            speedups.append(sw / ima.total)
        assert speedups == sorted(speedups)  # monotone in ports
        assert 10.2 * 0.7 <= speedups[0] <= 10.2 * 1.3
        assert 30 <= speedups[-1] <= 45


class TestSwLayers:
    def test_depthwise_charges_marshalling(self, cal):
        dw = DepthwiseConv(k=3, c=192, pad=1)
        phases = timing.layer_cycles_sw(dw, TensorShape(32, 32, 192), cal.cluster)
        assert phases.marshal == 2 * 32 * 32 * 192 // 8
        assert phases.sw == 423_725  # ceil(1,769,472 / (32 * 0.1305))

    def test_ima_depthwise_has_no_marshalling(self, cal):
        dw = DepthwiseConv(k=3, c=192, pad=1)
        phases = timing.layer_cycles_ima(dw, depthwise_block(16),
                                         TensorShape(32, 32, 192),
                                         PortConfig(4, 4), cal.ima, cal.cluster)
        assert phases.marshal == 0
        assert phases.sw == 0

    def test_minimal_layer_rounds_up(self, cal):
        phases = timing.layer_cycles_sw(PointwiseConv(1, 1),
                                        TensorShape(1, 1, 1), cal.cluster)
        assert phases.sw == 1


class TestPhaseBreakdown:
    def test_total_is_sum_of_parts(self):
        p = PhaseBreakdown(streamin=1, compute=2, streamout=3, config=4,
                           sw=5, marshal=6)
        assert p.total == 21

    def test_addition(self):
        a = PhaseBreakdown(streamin=1, sw=2)
        b = PhaseBreakdown(compute=3, marshal=4)
        c = a + b
        assert (c.streamin, c.compute, c.sw, c.marshal) == (1, 3, 2, 4)


# frozen totals of the default bottleneck at 4/4 under shipped calibration
EXPECTED_CYCLES_4_4 = {
    Plan.SW: 1_188_841,
    Plan.IMA8: 798_912,
    Plan.IMA16: 434_832,
    Plan.HYBRID: 543_597,
}


class TestBottleneckSchedule:
    @pytest.mark.parametrize("plan", list(Plan))
    def test_frozen_totals(self, cal, plan):
        sched = timing.bottleneck_schedule(default_bottleneck(), plan,
                                           PortConfig(4, 4), cal.ima, cal.cluster)
        assert sched.total_cycles == EXPECTED_CYCLES_4_4[plan]

    def test_phase_totals_sum_exactly(self, cal):
        for plan in Plan:
            sched = timing.bottleneck_schedule(default_bottleneck(), plan,
                                               PortConfig(2, 2), cal.ima,
                                               cal.cluster)
            agg = PhaseBreakdown()
            for _, phases in sched.layers:
                agg = agg + phases
            assert dataclasses.asdict(agg) == dataclasses.asdict(sched.totals)
            assert sched.total_cycles == sched.totals.total

    def test_hybrid_speedup_about_3x(self, cal):
        b = default_bottleneck()
        sw = timing.bottleneck_schedule(b, Plan.SW, PortConfig(4, 4),
                                        cal.ima, cal.cluster)
        hy = timing.bottleneck_schedule(b, Plan.HYBRID, PortConfig(4, 4),
                                        cal.ima, cal.cluster)
        speedup = sw.total_cycles / hy.total_cycles
        assert 3.0 * 0.7 <= speedup <= 3.0 * 1.3

    def test_residual_charged_in_every_plan(self, cal):
        for plan in Plan:
            sched = timing.bottleneck_schedule(default_bottleneck(), plan,
                                               PortConfig(4, 4), cal.ima,
                                               cal.cluster)
            names = dict(sched.layers)
            assert names["residual"].sw == 1_024

    def test_no_residual_when_channels_change(self, cal):
        from imasim.workload import BottleneckDescriptor
        b = BottleneckDescriptor(32, 6, 64, stride=1, height=16, width=16)
        sched = timing.bottleneck_schedule(b, Plan.SW, PortConfig(4, 4),
                                           cal.ima, cal.cluster)
        assert "residual" not in dict(sched.layers)

    def test_ima16_depthwise_saturates_at_4_ports(self, cal):
        b = default_bottleneck()
        dw_phases = {}
        for n in (4, 8, 16):
            sched = timing.bottleneck_schedule(b, Plan.IMA16, PortConfig(n, n),
                                               cal.ima, cal.cluster)
            dw_phases[n] = dict(sched.layers)["l1.depthwise"]
        assert dw_phases[4].streamin == dw_phases[8].streamin \
            == dw_phases[16].streamin == 106_032
        assert dw_phases[4].total == dw_phases[8].total == dw_phases[16].total

    def test_cycles_monotone_in_ports(self, cal):
        b = default_bottleneck()
        for plan in Plan:
            totals = [timing.bottleneck_schedule(b, plan, PortConfig(n, n),
                                                 cal.ima, cal.cluster).total_cycles
                      for n in (1, 2, 4, 8, 16)]
            assert totals == sorted(totals, reverse=True)

    def test_streamed_bytes_accounting(self, cal):
        sched = timing.bottleneck_schedule(default_bottleneck(), Plan.HYBRID,
                                           PortConfig(4, 4), cal.ima, cal.cluster)
        # two pointwise layers on the accelerator: 1024 jobs each
        assert sched.ima_jobs == 2_048
        assert sched.bytes_streamed_in == 1024 * 32 + 1024 * 192
        assert sched.bytes_streamed_out == 1024 * 192 + 1024 * 32

    def test_sw_plan_uses_no_accelerator(self, cal):
        sched = timing.bottleneck_schedule(default_bottleneck(), Plan.SW,
                                           PortConfig(4, 4), cal.ima, cal.cluster)
        assert sched.ima_jobs == 0
        assert sched.bytes_streamed_in == 0
        assert sched.totals.streamin == sched.totals.compute == 0


class TestModelKnobs:
    def test_contention_factor_scales_stream_phases(self, cal):
        contended = dataclasses.replace(cal.cluster, contention_factor=1.5)
        base = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                       BASELINE_IN, PortConfig(1, 1),
                                       cal.ima, cal.cluster)
        slow = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                       BASELINE_IN, PortConfig(1, 1),
                                       cal.ima, contended)
        assert slow.streamin == int(base.streamin * 1.5)
        assert slow.compute == base.compute

    def test_streamin_compute_overlap_flag(self, cal):
        overlapped = dataclasses.replace(cal.ima, overlap_streamin_compute=True)
        base = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                       BASELINE_IN, PortConfig(1, 1),
                                       cal.ima, cal.cluster)
        fast = timing.layer_cycles_ima(BASELINE_CONV, mapper.STANDARD_IM2COL,
                                       BASELINE_IN, PortConfig(1, 1),
                                       overlapped, cal.cluster)
        assert fast.total < base.total
        assert fast.streamin == base.streamin - base.compute

    def test_cluster_validation(self):
        with pytest.raises(ValueError):
            ClusterConfig(eta_conv=0.0)
        with pytest.raises(ValueError):
            ClusterConfig(contention_factor=0.5)
        with pytest.raises(ValueError):
            ImaTiming(t_array_ns=0)
