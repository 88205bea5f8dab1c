"""Peer profiling, feature extraction, and the disposition classifier."""

import itertools
from random import Random

import pytest

from wfdsim.learning import (
    ATTACKER_DISPOSITIONS,
    ATTACKER_MASS_THRESHOLD,
    Band,
    ClockRegression,
    Cpt,
    DEFAULT_CPT,
    DEFAULT_PRIOR,
    DegenerateDistribution,
    Disposition,
    FeatureVector,
    HistoryDepth,
    Ignorance,
    InvalidConfig,
    InvalidDuration,
    OutOfRange,
    PeerProfile,
    WINDOW_DAYS,
    assess,
    discretize_share,
    features,
    format_classifier_config,
    history_depth,
    parse_classifier_config,
    peer_fairness,
    posterior,
    should_reject,
)

# Independent copy of the likelihood tables and prior used as the
# enumeration oracle; typed separately from the module under test.
ORACLE_TABLES = {
    HistoryDepth.AMPLE: (
        (0.05, 0.10, 0.20, 0.20, 0.45),
        (0.05, 0.10, 0.20, 0.45, 0.20),
        (0.10, 0.20, 0.40, 0.20, 0.10),
        (0.20, 0.40, 0.20, 0.10, 0.10),
        (0.40, 0.20, 0.20, 0.10, 0.10),
    ),
    HistoryDepth.LIMITED: (
        (0.14, 0.14, 0.14, 0.22, 0.36),
        (0.13, 0.13, 0.20, 0.34, 0.20),
        (0.13, 0.20, 0.34, 0.20, 0.13),
        (0.20, 0.34, 0.20, 0.13, 0.13),
        (0.36, 0.22, 0.14, 0.14, 0.14),
    ),
    HistoryDepth.INSUFFICIENT: (
        (0.17, 0.17, 0.17, 0.24, 0.25),
        (0.15, 0.15, 0.23, 0.24, 0.23),
        (0.15, 0.23, 0.24, 0.23, 0.15),
        (0.23, 0.24, 0.23, 0.15, 0.15),
        (0.25, 0.24, 0.17, 0.17, 0.17),
    ),
}
ORACLE_PRIOR = (0.15, 0.20, 0.45, 0.10, 0.10)


def oracle_posterior(fv: FeatureVector) -> tuple[float, ...]:
    table = ORACLE_TABLES[fv.depth]
    joint = []
    for d in range(5):
        row = table[d]
        joint.append(ORACLE_PRIOR[d] * row[fv.self_go] * row[fv.peer_quit] * row[fv.go_time])
    total = sum(joint)
    return tuple(j / total for j in joint)


class TestDiscretization:
    @pytest.mark.parametrize("value,band", [
        (0.0, Band.LOW), (0.2499, Band.LOW),
        (0.25, Band.SMALL), (0.3999, Band.SMALL),
        (0.40, Band.AVERAGE), (0.5999, Band.AVERAGE),
        (0.60, Band.ABOVE_AVERAGE), (0.7499, Band.ABOVE_AVERAGE),
        (0.75, Band.HIGH), (1.0, Band.HIGH),
    ])
    def test_band_edges(self, value, band):
        assert discretize_share(value) is band

    @pytest.mark.parametrize("value", [-0.001, 1.001])
    def test_out_of_range(self, value):
        with pytest.raises(OutOfRange):
            discretize_share(value)

    @pytest.mark.parametrize("count,depth", [
        (0, HistoryDepth.INSUFFICIENT), (9, HistoryDepth.INSUFFICIENT),
        (10, HistoryDepth.LIMITED), (99, HistoryDepth.LIMITED),
        (100, HistoryDepth.AMPLE), (5000, HistoryDepth.AMPLE),
    ])
    def test_history_depth_boundaries(self, count, depth):
        assert history_depth(count) is depth


class TestPosterior:
    def test_matches_enumeration_oracle_everywhere(self):
        worst = 0.0
        for depth, sg, pq, gt in itertools.product(HistoryDepth, Band, Band, Band):
            fv = FeatureVector(sg, pq, gt, depth)
            got = posterior(fv)
            want = oracle_posterior(fv)
            worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
        assert worst <= 1e-12

    def test_distributions_are_normalized(self):
        for depth, sg in itertools.product(HistoryDepth, Band):
            fv = FeatureVector(sg, Band.LOW, Band.HIGH, depth)
            assert abs(sum(posterior(fv)) - 1.0) < 1e-12

    def test_saturated_hostile_profile_vector(self):
        fv = FeatureVector(Band.HIGH, Band.HIGH, Band.HIGH, HistoryDepth.AMPLE)
        got = posterior(fv)
        want = (0.8586572438162544, 0.10051040439733021, 0.02826855123674912,
                0.006281900274833138, 0.006281900274833138)
        assert got == pytest.approx(want, abs=1e-12)

    def test_prior_scale_invariance(self):
        fv = FeatureVector(Band.ABOVE_AVERAGE, Band.LOW, Band.HIGH, HistoryDepth.LIMITED)
        doubled = tuple(2 * p for p in DEFAULT_PRIOR)
        assert posterior(fv) == pytest.approx(posterior(fv, prior=doubled), abs=1e-15)

    def test_hostility_rises_with_owner_share(self):
        def mass(sg, gt):
            p = posterior(FeatureVector(sg, Band.LOW, gt, HistoryDepth.AMPLE))
            return sum(p[d] for d in ATTACKER_DISPOSITIONS)

        chain = [mass(Band.AVERAGE, Band.AVERAGE),
                 mass(Band.ABOVE_AVERAGE, Band.ABOVE_AVERAGE),
                 mass(Band.HIGH, Band.HIGH)]
        assert chain[0] < chain[1] < chain[2]

    def test_degenerate_priors_rejected(self):
        fv = FeatureVector(Band.LOW, Band.LOW, Band.LOW, HistoryDepth.AMPLE)
        with pytest.raises(DegenerateDistribution):
            posterior(fv, prior=(0.0,) * 5)
        with pytest.raises(DegenerateDistribution):
            posterior(fv, prior=(0.5, 0.5))
        with pytest.raises(DegenerateDistribution):
            posterior(fv, prior=(-0.1, 0.3, 0.3, 0.3, 0.2))


class TestCptValidation:
    def test_default_is_valid(self):
        for depth in HistoryDepth:
            for disposition in Disposition:
                row = DEFAULT_CPT.row(depth, disposition)
                assert len(row) == 5
                assert abs(sum(row) - 1.0) <= 1e-9

    def test_wrong_table_count(self):
        with pytest.raises(InvalidConfig):
            Cpt((ORACLE_TABLES[HistoryDepth.AMPLE],))

    def test_row_sum_must_be_one(self):
        bad = tuple(
            tuple((0.2, 0.2, 0.2, 0.2, 0.3) for _ in range(5)) for _ in range(3)
        )
        with pytest.raises(InvalidConfig):
            Cpt(bad)

    def test_negative_probability(self):
        bad = tuple(
            tuple((-0.1, 0.3, 0.3, 0.3, 0.2) for _ in range(5)) for _ in range(3)
        )
        with pytest.raises(InvalidConfig):
            Cpt(bad)


class TestPeerProfileWindow:
    def test_empty_profile(self):
        p = PeerProfile("peer")
        assert p.negotiations == 0
        assert peer_fairness(p) == 0.0
        fv = features(p)
        assert fv == FeatureVector(Band.LOW, Band.LOW, Band.LOW, HistoryDepth.INSUFFICIENT)

    def test_counters_accumulate(self):
        p = PeerProfile("peer")
        p.record_negotiation(0, self_was_go=True, peer_quit_prematurely=False)
        p.record_negotiation(0, self_was_go=False, peer_quit_prematurely=True)
        p.record_group_time(0, 60, 120)
        assert (p.negotiations, p.self_go_wins, p.peer_premature_quits) == (2, 1, 1)
        assert (p.self_go_seconds, p.comm_seconds) == (60, 120)
        assert peer_fairness(p) == 0.5

    def test_expiry_drops_whole_days(self):
        p = PeerProfile("peer")
        p.record_negotiation(0, True, False)
        p.record_group_time(0, 60, 60)
        p.roll_to(WINDOW_DAYS - 1)
        assert p.negotiations == 1          # day 0 still inside the window
        p.roll_to(WINDOW_DAYS)
        assert p.negotiations == 0
        assert p.comm_seconds == 0
        assert not p.buckets()

    def test_clock_cannot_run_backwards(self):
        p = PeerProfile("peer")
        p.roll_to(5)
        with pytest.raises(ClockRegression):
            p.roll_to(4)

    def test_version_changes_on_every_mutation(self):
        p = PeerProfile("peer")
        v0 = p.version
        p.record_negotiation(1, True, False)
        v1 = p.version
        p.record_group_time(1, 0, 30)
        v2 = p.version
        p.roll_to(WINDOW_DAYS + 2)
        v3 = p.version
        assert v0 < v1 < v2 < v3

    def test_group_time_validation(self):
        p = PeerProfile("peer")
        with pytest.raises(InvalidDuration):
            p.record_group_time(0, -1, 10)
        with pytest.raises(InvalidDuration):
            p.record_group_time(0, 20, 10)

    def test_window_totals_match_naive_recompute(self):
        rng = Random(1234)
        p = PeerProfile("peer")
        ledger = []   # (day, negotiations, wins, quits, go_s, comm_s)
        day = 0
        for _ in range(500):
            day += rng.randrange(3)
            if rng.random() < 0.7:
                go = rng.random() < 0.6
                quit_ = rng.random() < 0.2
                p.record_negotiation(day, go, quit_)
                ledger.append((day, 1, int(go), int(quit_), 0, 0))
            else:
                comm = rng.randrange(1, 400)
                go_s = rng.randrange(comm + 1)
                p.record_group_time(day, go_s, comm)
                ledger.append((day, 0, 0, 0, go_s, comm))
            live = [row for row in ledger if row[0] > day - WINDOW_DAYS]
            assert p.negotiations == sum(r[1] for r in live)
            assert p.self_go_wins == sum(r[2] for r in live)
            assert p.peer_premature_quits == sum(r[3] for r in live)
            assert p.self_go_seconds == sum(r[4] for r in live)
            assert p.comm_seconds == sum(r[5] for r in live)


class TestLogRoundtrip:
    def build(self):
        p = PeerProfile("peer")
        p.record_negotiation(3, True, False)
        p.record_negotiation(5, False, True)
        p.record_group_time(5, 120, 300)
        p.record_negotiation(20, True, False)
        return p

    def test_export_import_identity(self):
        p = self.build()
        q = PeerProfile.from_log("peer", p.export_log())
        assert q.buckets() == p.buckets()
        for field in ("negotiations", "self_go_wins", "peer_premature_quits",
                      "self_go_seconds", "comm_seconds", "current_day"):
            assert getattr(q, field) == getattr(p, field)

    def test_import_ignores_blank_lines(self):
        q = PeerProfile.from_log("peer", "\n\nday=1 negotiations=2 wins=1\n\n")
        assert q.negotiations == 2

    def test_import_rejects_bad_field(self):
        with pytest.raises(InvalidConfig):
            PeerProfile.from_log("peer", "day=1 negotiations=two")
        with pytest.raises(InvalidConfig):
            PeerProfile.from_log("peer", "day=1 wibble=3")


class TestAssessment:
    def hostile_profile(self, n=120):
        p = PeerProfile("mallory")
        for _ in range(n):
            p.record_negotiation(1, self_was_go=True, peer_quit_prematurely=False)
        p.record_group_time(1, 600 * n, 600 * n)
        return p

    def fair_profile(self, n=120):
        p = PeerProfile("bob")
        for i in range(n):
            p.record_negotiation(1, self_was_go=i % 2 == 0, peer_quit_prematurely=False)
        p.record_group_time(1, 300 * n, 600 * n)
        return p

    def test_saturated_attacker_is_flagged(self):
        a = assess(self.hostile_profile())
        assert a.features.depth is HistoryDepth.AMPLE
        assert a.ignorance is Ignorance.LOW
        assert a.is_attacker
        assert a.peer_fairness == 1.0
        assert should_reject(a)

    def test_fair_peer_is_not_flagged(self):
        a = assess(self.fair_profile())
        assert not a.is_attacker
        assert not should_reject(a)

    def test_thin_history_means_high_ignorance(self):
        a = assess(self.hostile_profile(n=5))
        assert a.ignorance is Ignorance.HIGH
        assert a.window_negotiations == 5

    def test_hostile_but_currently_fair_is_tolerated(self):
        # always winning looks hostile, but owner time sits exactly on the
        # fairness bound, so rejection stays off
        p = PeerProfile("mallory")
        for _ in range(120):
            p.record_negotiation(1, True, False)
        p.record_group_time(1, 360 * 120, 600 * 120)
        a = assess(p)
        assert a.is_attacker
        assert a.peer_fairness == 0.6
        assert not should_reject(a)

    def test_attacker_mass_threshold_is_strict(self):
        p = self.hostile_profile()
        relaxed = assess(p, attacker_mass_threshold=0.99)
        assert not relaxed.is_attacker
        assert 0.0 < ATTACKER_MASS_THRESHOLD < 1.0


class TestClassifierConfig:
    def test_format_parse_roundtrip(self):
        cpt, prior = parse_classifier_config(format_classifier_config())
        assert cpt == DEFAULT_CPT
        assert prior == DEFAULT_PRIOR

    def test_override_single_row(self):
        text = "cpt.ample.altruist = 0.5 0.2 0.1 0.1 0.1\n"
        cpt, prior = parse_classifier_config(text)
        assert cpt.row(HistoryDepth.AMPLE, Disposition.ALTRUIST) == (0.5, 0.2, 0.1, 0.1, 0.1)
        assert cpt.row(HistoryDepth.AMPLE, Disposition.FAIR) == \
            DEFAULT_CPT.row(HistoryDepth.AMPLE, Disposition.FAIR)
        assert prior == DEFAULT_PRIOR

    def test_override_prior(self):
        cpt, prior = parse_classifier_config("prior = 1 1 1 1 1\n")
        assert prior == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_comments_and_blanks_ignored(self):
        text = "# comment\n\nprior = 0.2 0.2 0.2 0.2 0.2  # trailing\n"
        _, prior = parse_classifier_config(text)
        assert prior == (0.2,) * 5

    @pytest.mark.parametrize("text,fragment", [
        ("wibble = 1 2 3", "unknown key"),
        ("cpt.ample.wizard = 0.2 0.2 0.2 0.2 0.2", "unknown key"),
        ("cpt.never.fair = 0.2 0.2 0.2 0.2 0.2", "unknown key"),
        ("prior = 0.5 0.5", "needs 5 values"),
        ("cpt.ample.fair = 0.5 0.5", "needs 5 values"),
        ("prior = a b c d e", "could not convert"),
        ("just a line", "expected"),
    ])
    def test_diagnostics_carry_line_numbers(self, text, fragment):
        with pytest.raises(InvalidConfig) as err:
            parse_classifier_config(text)
        assert "line 1" in str(err.value)
        assert fragment in str(err.value)

    def test_negative_prior_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_classifier_config("prior = -1 1 1 1 1")

    def test_row_override_must_still_sum_to_one(self):
        with pytest.raises(InvalidConfig):
            parse_classifier_config("cpt.ample.fair = 0.9 0.2 0.1 0.1 0.1")
