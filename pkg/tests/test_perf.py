import pytest

from fecim.array import ArrayConfig
from fecim.devices import DomainError
from fecim.perf import (LayerShape, REFERENCE_STACK, PerfConstants,
                        area_estimate, count_read_cycles, digital_energy,
                        op_energy, calibrated_45nm, workload_perf)


@pytest.fixture(scope="module")
def constants():
    return calibrated_45nm()


@pytest.fixture(scope="module")
def sys_cfg():
    return ArrayConfig(rows=128, cols=128, bits_per_cell=2, adc_sharing=8)


class TestOpEnergy:
    def test_cell_study_anchor(self, constants):
        cfg = ArrayConfig(rows=8, cols=8, bits_per_cell=2, adc_sharing=8)
        e = op_energy(cfg, 3, constants)
        assert e == pytest.approx(1.36e-12, rel=0.10)

    def test_system_array_and_adc_anchors(self, constants, sys_cfg):
        assert 8 * constants.e_col(128) == pytest.approx(3.355e-12, rel=0.10)
        assert 8 * constants.e_adc(5) == pytest.approx(7.40e-12, rel=0.10)

    def test_zero_constants(self, constants):
        cfg = ArrayConfig(rows=8, cols=8, bits_per_cell=2)
        assert op_energy(cfg, 3, constants.scaled(0.0)) == 0.0

    def test_rows_have_minor_impact(self, constants):
        cfg8 = ArrayConfig(rows=8, cols=8, bits_per_cell=2)
        cfg128 = ArrayConfig(rows=128, cols=8, bits_per_cell=2)
        e8 = op_energy(cfg8, 3, constants)
        e128 = op_energy(cfg128, 3, constants)
        assert e128 > e8
        assert e128 / e8 < 4.0


class TestDigitalEnergy:
    def test_zero_counts(self, constants):
        assert digital_energy({}, constants) == 0.0

    def test_linearity_in_adders(self, constants):
        one = digital_energy({"adders": 1000}, constants)
        two = digital_energy({"adders": 2000}, constants)
        assert two == pytest.approx(2 * one)

    def test_zero_activity_kills_only_that_class(self):
        c = calibrated_45nm()
        import dataclasses

        c0 = dataclasses.replace(c, delta_adder=0.0)
        counts = {"adders": 10, "dffs": 10}
        assert digital_energy(counts, c0) == pytest.approx(
            10 * c.gamma_dff * c.e_dff)

    def test_activity_bounds(self):
        with pytest.raises(DomainError):
            PerfConstants(e_comparator=1e-14, e_col_base=1e-13,
                          e_col_per_row=1e-15, gamma_dff=1.5)


class TestArea:
    def test_wiring_factor_scales_level_shifters(self, constants):
        import dataclasses

        cfg = ArrayConfig(rows=128, cols=128, bits_per_cell=2)
        base = area_estimate(cfg, dataclasses.replace(constants, alpha_wiring=1.0))
        wired = area_estimate(cfg, constants)
        f2 = (constants.feature_size_m * 1e6) ** 2
        extra = 0.44 * 128 * constants.level_shifter_area_f2 * f2
        assert wired - base == pytest.approx(extra)

    def test_linear_in_cell_count(self, constants):
        a1 = area_estimate(ArrayConfig(rows=64, cols=64, bits_per_cell=2), constants)
        a2 = area_estimate(ArrayConfig(rows=64, cols=128, bits_per_cell=2), constants)
        f2 = (constants.feature_size_m * 1e6) ** 2
        cell_part = 64 * 64 * constants.cell_area_f2 * f2
        # doubling the columns adds one cell block plus per-column periphery
        assert a2 - a1 > cell_part

    def test_bigger_tiles_beat_more_tiles(self, constants):
        a256 = area_estimate(ArrayConfig(rows=256, cols=256, bits_per_cell=2),
                             constants)
        a128 = area_estimate(ArrayConfig(rows=128, cols=128, bits_per_cell=2),
                             constants)
        assert a256 < 4 * a128


class TestWorkload:
    def test_two_bit_efficiency_anchor(self, constants, sys_cfg):
        rep = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=2)
        assert rep.tops_per_watt == pytest.approx(48.03, rel=0.15)

    def test_one_bit_efficiency_anchor(self, constants, sys_cfg):
        rep = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=1)
        assert rep.tops_per_watt == pytest.approx(26.06, rel=0.15)

    def test_exact_cycle_ratio(self, sys_cfg):
        c1 = count_read_cycles(REFERENCE_STACK, 1, sys_cfg.rows)
        c2 = count_read_cycles(REFERENCE_STACK, 2, sys_cfg.rows)
        assert c1 == 2 * c2

    def test_batch_scaling(self, constants, sys_cfg):
        one = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=2)
        two = workload_perf(REFERENCE_STACK, 2, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=2)
        assert two.total_energy_j == pytest.approx(2 * one.total_energy_j)
        assert two.tops_per_watt == pytest.approx(one.tops_per_watt)

    def test_breakdown_adds_up(self, constants, sys_cfg):
        rep = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=2)
        assert sum(rep.breakdown.values()) == pytest.approx(
            rep.total_energy_j, rel=1e-12)
        assert all(v >= 0 for v in rep.breakdown.values())

    def test_adc_dominates_array(self, constants, sys_cfg):
        rep = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants,
                            adc_bits=5, bits_per_cell=2)
        assert rep.breakdown["adc"] > rep.breakdown["array"]

    def test_mapped_network_accepted(self, constants, sys_cfg, rng):
        from fecim.nn import QuantizedTensor, map_weights, MappedNetwork

        w = rng.integers(-127, 128, (64, 10))
        net = MappedNetwork(layers=(map_weights(QuantizedTensor(w, 1.0), 2),),
                            bits_per_cell=2)
        rep = workload_perf(net, 4, sys_cfg, constants, adc_bits=5)
        assert rep.macs == 4 * 640
        assert rep.total_energy_j > 0

    def test_sample_validation(self, constants, sys_cfg):
        with pytest.raises(DomainError):
            workload_perf(REFERENCE_STACK, 0, sys_cfg, constants,
                          adc_bits=5, bits_per_cell=2)

    def test_zero_constants_zero_energy(self, constants, sys_cfg):
        rep = workload_perf(REFERENCE_STACK, 1, sys_cfg, constants.scaled(0.0),
                            adc_bits=5, bits_per_cell=2)
        assert rep.total_energy_j == 0.0


class TestLayerShape:
    def test_macs(self):
        assert LayerShape(27, 64, 1024).macs == 27 * 64 * 1024

    def test_reference_stack_totals(self):
        macs = sum(l.macs for l in REFERENCE_STACK)
        assert macs == 672_940_032


class TestConstantsFile:
    def test_dump_and_load_round_trip(self, constants, tmp_path):
        from fecim.perf import dump_constants, load_constants

        p = tmp_path / "constants.ini"
        p.write_text(dump_constants(constants))
        again = load_constants(p)
        assert again == constants

    def test_missing_section_rejected(self, tmp_path):
        from fecim.perf import load_constants

        p = tmp_path / "empty.ini"
        p.write_text("[other]\nx = 1\n")
        with pytest.raises(DomainError):
            load_constants(p)
