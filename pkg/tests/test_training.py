"""Tests for probe-based beam training over a built codebook."""

import copy

import numpy as np
import pytest

from risbeam.codebook import (
    Codebook,
    CodebookSpec,
    build_codebook,
    geometry_fingerprint,
)
from risbeam.geometry import (
    SystemGeometry,
    bs_ris_channel,
    cascaded_channel,
    ris_user_channel,
)
from risbeam.solvers import IpddConfig
from risbeam.training import (
    exhaustive_train,
    hierarchical_train,
    probe_snr,
    training_overhead,
)


@pytest.fixture(scope="module")
def trained_setup():
    geom = SystemGeometry(
        wavelength_m=0.125,
        n1=8,
        n2=2,
        m_antennas=2,
        bs_position_m=(-1.0, 0.0, -2.0),
        max_power_w=1.0,
        noise_power_w=1e-12,
    )
    spec = CodebookSpec(
        x_range=(-1.0, 1.0), z_range=(1.0, 3.0),
        s1_x=2, s1_z=1, s2_x=4, s2_z=2, gain=4.0, bits=1,
    )
    cfg = IpddConfig(bits=1, max_outer_iters=120)
    book = build_codebook(geom, spec, cfg, max_outer=20)
    return geom, spec, book


class TestTrainingOverhead:
    def test_linear_versus_exponential_counts(self):
        assert training_overhead(3, 3, "hierarchical") == 9
        assert training_overhead(3, 3, "exhaustive") == 27
        assert training_overhead(4, 6, "hierarchical") == 24
        assert training_overhead(4, 6, "exhaustive") == 4096

    def test_single_level_schemes_coincide(self):
        for s in (1, 2, 7):
            assert training_overhead(s, 1, "hierarchical") == s
            assert training_overhead(s, 1, "exhaustive") == s

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError):
            training_overhead(0, 3, "hierarchical")
        with pytest.raises(ValueError):
            training_overhead(3, 0, "exhaustive")
        with pytest.raises(ValueError):
            training_overhead(3, 3, "binary")


class TestProbeSnr:
    def test_matches_direct_computation(self, trained_setup):
        geom, _, book = trained_setup
        cw = book.levels[0][0]
        user = (0.3, 0.0, 1.7)
        c = cascaded_channel(bs_ris_channel(geom), ris_user_channel(geom, user))
        value = np.vdot(cw.ris_phases.values, c @ cw.bs_precoder)
        expected = abs(value) ** 2 / 1e-10
        np.testing.assert_allclose(
            probe_snr(geom, cw, user, 1e-10), expected, rtol=1e-12
        )

    def test_deterministic_without_noise_draws(self, trained_setup):
        geom, _, book = trained_setup
        cw = book.levels[1][3]
        a = probe_snr(geom, cw, (0.2, 0.0, 2.4), 1e-10)
        b = probe_snr(geom, cw, (0.2, 0.0, 2.4), 1e-10)
        assert a == b

    def test_scales_inversely_with_noise(self, trained_setup):
        geom, _, book = trained_setup
        cw = book.levels[0][1]
        s1 = probe_snr(geom, cw, (0.5, 0.0, 2.0), 1e-10)
        s2 = probe_snr(geom, cw, (0.5, 0.0, 2.0), 1e-8)
        np.testing.assert_allclose(s1 / s2, 100.0, rtol=1e-9)

    def test_seeded_noise_is_reproducible(self, trained_setup):
        geom, _, book = trained_setup
        cw = book.levels[0][0]
        a = probe_snr(geom, cw, (0.1, 0.0, 1.4), 1e-4,
                      rng=np.random.default_rng(3))
        b = probe_snr(geom, cw, (0.1, 0.0, 1.4), 1e-4,
                      rng=np.random.default_rng(3))
        c = probe_snr(geom, cw, (0.1, 0.0, 1.4), 1e-4,
                      rng=np.random.default_rng(4))
        assert a == b
        assert a != c

    def test_noise_power_validated(self, trained_setup):
        geom, _, book = trained_setup
        with pytest.raises(ValueError):
            probe_snr(geom, book.levels[0][0], (0.1, 0.0, 1.0), 0.0)


class TestHierarchicalTraining:
    def test_descends_through_the_winner_children(self, trained_setup):
        geom, spec, book = trained_setup
        res = hierarchical_train(book, geom, (0.4, 0.0, 1.6), 1e-12)
        assert len(res.selected_path) == book.n_levels
        leaf = next(
            cw for cw in book.levels[1] if cw.region_index == res.selected_path[1]
        )
        assert leaf.parent_index == res.selected_path[0]
        assert res.estimated_user_xz == leaf.center

    def test_probe_accounting(self, trained_setup):
        geom, spec, book = trained_setup
        res = hierarchical_train(book, geom, (-0.3, 0.0, 2.6), 1e-12)
        expected = len(book.levels[0]) + spec.ratio_x * spec.ratio_z
        assert res.probes_used == expected
        assert len(res.snr_trace) == expected
        assert len(res.probe_log) == expected
        assert [entry[2] for entry in res.probe_log] == res.snr_trace
        levels = [entry[0] for entry in res.probe_log]
        assert levels == [0] * len(book.levels[0]) + [1] * (expected - len(book.levels[0]))

    def test_noiseless_runs_are_deterministic(self, trained_setup):
        geom, _, book = trained_setup
        a = hierarchical_train(book, geom, (0.0, 0.0, 2.0), 1e-12)
        b = hierarchical_train(book, geom, (0.0, 0.0, 2.0), 1e-12)
        assert a.selected_path == b.selected_path
        assert a.snr_trace == b.snr_trace
        assert a.selected_snr == b.selected_snr

    def test_seeded_noisy_runs_are_reproducible(self, trained_setup):
        geom, _, book = trained_setup
        a = hierarchical_train(book, geom, (0.0, 0.0, 2.0), 1e-2,
                               rng=np.random.default_rng(17))
        b = hierarchical_train(book, geom, (0.0, 0.0, 2.0), 1e-2,
                               rng=np.random.default_rng(17))
        assert a.selected_path == b.selected_path
        assert a.snr_trace == b.snr_trace

    def test_rate_reports_the_noise_free_pick(self, trained_setup):
        geom, _, book = trained_setup
        res = hierarchical_train(book, geom, (0.6, 0.0, 1.2), 1e-12)
        np.testing.assert_allclose(
            res.achieved_rate, np.log2(1.0 + res.selected_snr), rtol=1e-12
        )

    def test_ties_resolve_to_the_lowest_region_index(self, trained_setup):
        geom, _, book = trained_setup
        first = copy.deepcopy(book.levels[1][0])
        twin = copy.deepcopy(first)
        first.region_index = 0
        twin.region_index = 1
        flat = Codebook(
            levels=[[first, twin]],
            geometry_fingerprint=geometry_fingerprint(geom),
            bits=book.bits,
        )
        res = hierarchical_train(flat, geom, (0.2, 0.0, 1.8), 1e-12)
        assert res.selected_path == [0]

    def test_empty_level_rejected(self, trained_setup):
        geom, _, book = trained_setup
        empty = Codebook(
            levels=[[]],
            geometry_fingerprint=geometry_fingerprint(geom),
            bits=book.bits,
        )
        with pytest.raises(ValueError):
            hierarchical_train(empty, geom, (0.2, 0.0, 1.8), 1e-12)

    def test_noise_power_validated(self, trained_setup):
        geom, _, book = trained_setup
        with pytest.raises(ValueError):
            hierarchical_train(book, geom, (0.2, 0.0, 1.8), -1.0)


class TestExhaustiveTraining:
    def test_probes_every_leaf(self, trained_setup):
        geom, _, book = trained_setup
        res = exhaustive_train(book, geom, (0.4, 0.0, 1.6), 1e-12)
        assert res.probes_used == len(book.levels[1])
        assert len(res.selected_path) == 1

    def test_picks_the_global_argmax_leaf(self, trained_setup):
        geom, _, book = trained_setup
        user = (-0.6, 0.0, 2.7)
        res = exhaustive_train(book, geom, user, 1e-12)
        snrs = [probe_snr(geom, cw, user, 1e-12) for cw in book.levels[1]]
        best = book.levels[1][int(np.argmax(snrs))]
        assert res.selected_path == [best.region_index]
        np.testing.assert_allclose(res.selected_snr, max(snrs), rtol=1e-12)

    def test_never_below_hierarchical(self, trained_setup):
        geom, _, book = trained_setup
        for cw in book.levels[1]:
            user = (cw.center[0], 0.0, cw.center[1])
            ex = exhaustive_train(book, geom, user, 1e-12)
            hi = hierarchical_train(book, geom, user, 1e-12)
            assert ex.selected_snr >= hi.selected_snr

    def test_single_level_book_matches_hierarchical(self, trained_setup):
        geom, _, book = trained_setup
        flat = Codebook(
            levels=[book.levels[1]],
            geometry_fingerprint=geometry_fingerprint(geom),
            bits=book.bits,
        )
        user = (0.7, 0.0, 2.1)
        ex = exhaustive_train(flat, geom, user, 1e-12)
        hi = hierarchical_train(flat, geom, user, 1e-12)
        assert ex.selected_path == hi.selected_path
        assert ex.selected_snr == hi.selected_snr
        assert ex.probes_used == hi.probes_used

    def test_in_coverage_user_beats_oblique_user(self, trained_setup):
        # entries carry the obliquity factor |z| / distance, so a strongly
        # off-axis user sees a much weaker surface than one inside coverage
        geom, _, book = trained_setup
        near = exhaustive_train(book, geom, (0.0, 0.0, 2.0), 1e-12)
        oblique = exhaustive_train(book, geom, (100.0, 0.0, 2.0), 1e-12)
        assert near.selected_snr > oblique.selected_snr
