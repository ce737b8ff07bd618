"""Blinding/fake-state attack model tests."""
import math

import numpy as np
import pytest

from rdiqsdc.adversary import (
    BlindingAttackParams,
    attacked_distribution_literal,
    blind_and_fake,
    close_and_far_sets,
    detection_power,
    eve_information,
    is_close,
    predict_attacked_distribution,
    second_pass_intercept,
)
from rdiqsdc.devices import ChannelNoiseModel, LinkBudget, PhotonRecord
from rdiqsdc.protocol import BasisPolicy, BasisPolicyMode, ProtocolParams, run_full_protocol
from rdiqsdc.qstate import BasisConfig, Measurement, prepare


def attack_run_params(r, p1, p2, target=0.1, seed=0, **kw) -> ProtocolParams:
    defaults = dict(
        r=r,
        config=BasisConfig(n=8),
        policy=BasisPolicy(mode=BasisPolicyMode.TARGET_P1, target=target),
        link=LinkBudget(),
        noise=ChannelNoiseModel(),
        adversary=BlindingAttackParams(p1=p1, p2=p2),
        continue_on_abort=True,
        seed=seed,
    )
    defaults.update(kw)
    return ProtocolParams(**defaults)


class TestParams:
    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            BlindingAttackParams(p1=1.2, p2=0.5)
        with pytest.raises(ValueError):
            BlindingAttackParams(p1=0.5, p2=-0.1)

    def test_closeness_angle_bounds(self):
        with pytest.raises(ValueError):
            BlindingAttackParams(p1=0.5, p2=0.5, closeness_angle=math.pi)


class TestCloseness:
    def test_n3_partition(self):
        params = BlindingAttackParams(p1=1.0, p2=0.5)
        close, far = close_and_far_sets(2, params, BasisConfig(n=3))
        assert close == [2]
        assert sorted(far) == [1, 3]

    def test_n8_partition(self):
        # quarter-turn threshold over eighth-turn spacing: two steps away
        # is still close, three or four steps is far
        params = BlindingAttackParams(p1=1.0, p2=0.5)
        close, far = close_and_far_sets(4, params, BasisConfig(n=8))
        assert sorted(close) == [2, 3, 4, 5, 6]
        assert sorted(far) == [1, 7, 8]

    def test_predicate_is_symmetric(self):
        params = BlindingAttackParams(p1=1.0, p2=0.5)
        config = BasisConfig(n=16)
        for a in range(1, 17):
            for b in range(1, 17):
                assert is_close(a, b, params, config) == is_close(b, a, params, config)


class TestBlindAndFake:
    def _photon(self):
        return PhotonRecord(id=0, prep_index=1, state=prepare(1, BasisConfig(n=8)))

    def test_always_close_clicks_zero(self):
        m = Measurement(basis_index=3, config=BasisConfig(n=8))
        rng = np.random.default_rng(0)
        params = BlindingAttackParams(p1=1.0, p2=1.0)
        for _ in range(100):
            out = blind_and_fake(self._photon(), m, params, rng)
            assert out.clicked and out.g == 0

    def test_never_close_clicks_one(self):
        m = Measurement(basis_index=3, config=BasisConfig(n=8))
        rng = np.random.default_rng(0)
        params = BlindingAttackParams(p1=1.0, p2=0.0)
        for _ in range(100):
            assert blind_and_fake(self._photon(), m, params, rng).g == 1

    def test_closeness_frequency(self):
        m = Measurement(basis_index=5, config=BasisConfig(n=8))
        rng = np.random.default_rng(1)
        params = BlindingAttackParams(p1=1.0, p2=0.3)
        n = 20_000
        zeros = sum(
            1 for _ in range(n) if blind_and_fake(self._photon(), m, params, rng).g == 0
        )
        band = 5.0 * math.sqrt(0.3 * 0.7 / n)
        assert abs(zeros / n - 0.3) <= band


class TestSecondPassIntercept:
    def test_matched_basis_reads_bit_exactly(self):
        photon = PhotonRecord(
            id=0, prep_index=5, state=prepare(5, BasisConfig(n=8)), message_flip=True
        )
        rng = np.random.default_rng(0)
        assert all(second_pass_intercept(photon, 5, rng) == 1 for _ in range(50))

    def test_unmatched_basis_guesses(self):
        photon = PhotonRecord(
            id=0, prep_index=5, state=prepare(5, BasisConfig(n=8)), message_flip=False
        )
        rng = np.random.default_rng(3)
        n = 10_000
        correct = sum(1 for _ in range(n) if second_pass_intercept(photon, 2, rng) == 0)
        band = 5.0 * math.sqrt(0.25 / n)
        assert abs(correct / n - 0.5) <= band

    def test_unencoded_photon_rejected(self):
        photon = PhotonRecord(id=0, prep_index=5, state=prepare(5, BasisConfig(n=8)))
        with pytest.raises(ValueError):
            second_pass_intercept(photon, 5, np.random.default_rng(0))


class TestPredictor:
    def test_no_attack_passthrough(self):
        assert predict_attacked_distribution(0.3, BlindingAttackParams(0.0, 0.9)) == 0.3

    def test_full_attack_far_bases(self):
        assert predict_attacked_distribution(0.3, BlindingAttackParams(1.0, 0.0)) == 0.0

    def test_mixed_point(self):
        got = predict_attacked_distribution(0.2, BlindingAttackParams(0.4, 0.25))
        assert got == pytest.approx(0.22, abs=1e-12)

    def test_half_target_is_invisible(self):
        # the operating point at one half cannot expose this attack
        for p1 in (0.1, 0.5, 1.0):
            got = predict_attacked_distribution(0.5, BlindingAttackParams(p1, 0.5))
            assert got == pytest.approx(0.5, abs=1e-12)

    def test_literal_variant_halves_at_no_attack(self):
        # the half-normalized diagnostic form disagrees with the
        # event-level limit already at p1 = 0
        assert attacked_distribution_literal(0.3, BlindingAttackParams(0.0, 0.9)) == 0.15


class TestDetectionPower:
    def test_strong_shift_detected(self):
        power = detection_power(0.1, BlindingAttackParams(0.5, 0.5), 10_000, 0.0269)
        assert power > 0.999

    def test_no_shift_false_positive_rate(self):
        from rdiqsdc.protocol import hoeffding_tolerance

        tol = hoeffding_tolerance(10_000, 1e-6)
        power = detection_power(0.5, BlindingAttackParams(0.5, 0.5), 10_000, tol)
        assert power <= 1e-6

    def test_monotone_in_shift(self):
        tol = 0.01
        powers = [
            detection_power(0.1, BlindingAttackParams(p1, 1.0), 5_000, tol)
            for p1 in (0.0, 0.1, 0.2, 0.4, 0.8)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(powers, powers[1:]))

    def test_monotone_in_sample_size(self):
        params = BlindingAttackParams(0.3, 0.9)
        powers = [
            detection_power(0.1, params, m, 0.02) for m in (100, 1_000, 10_000, 100_000)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(powers, powers[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            detection_power(0.1, BlindingAttackParams(0.5, 0.5), 0, 0.01)
        with pytest.raises(ValueError):
            detection_power(0.1, BlindingAttackParams(0.5, 0.5), 100, -0.01)


class TestEngineIntegration:
    def test_p1_zero_matches_attack_free_bitwise(self):
        import dataclasses

        base = attack_run_params(3_000, 0.0, 0.7, seed=19)
        off = dataclasses.replace(base, adversary=None)
        with_adv = run_full_protocol(base)
        without = run_full_protocol(off)
        assert np.array_equal(with_adv.photons.g, without.photons.g)
        assert np.array_equal(with_adv.photons.clicked, without.photons.clicked)
        assert with_adv.check1 == without.check1
        assert with_adv.check2 == without.check2
        assert np.array_equal(with_adv.frame.decoded, without.frame.decoded)

    def test_full_attack_forces_all_clicks(self):
        result = run_full_protocol(attack_run_params(2_000, 1.0, 1.0, seed=23))
        assert result.check1.empirical_p_g0 == 1.0
        assert result.check1.n_clicked == 2_000

    def test_empirical_matches_predictor_small_grid(self):
        r = 20_000
        for i, (p1, p2) in enumerate([(0.25, 0.75), (0.5, 0.5), (0.75, 0.0)]):
            result = run_full_protocol(attack_run_params(r, p1, p2, seed=31 + i))
            q = predict_attacked_distribution(0.1, BlindingAttackParams(p1, p2))
            band = 5.0 * math.sqrt(q * (1 - q) / r)
            assert abs(result.check1.empirical_p_g0 - q) <= band

    def test_attack_summary_reports_predictor(self):
        result = run_full_protocol(attack_run_params(5_000, 0.5, 0.5, seed=37))
        assert result.attack is not None
        want = predict_attacked_distribution(
            result.check1.theoretical_p_g0, BlindingAttackParams(0.5, 0.5)
        )
        assert result.attack.predicted_p_g0 == pytest.approx(want, abs=1e-12)
        assert 0.0 <= result.attack.eve_correct_fraction <= 1.0
        assert 0.0 <= result.attack.eve_info_per_bit <= 1.0

    def test_attacked_message_bits_leak(self):
        # with every slot attacked, the interceptor reads a clear majority
        # of the payload: exact hits on matched bases plus coin flips
        result = run_full_protocol(attack_run_params(20_000, 1.0, 0.5, seed=41))
        assert result.attack.eve_correct_fraction > 0.5


class TestEveInformation:
    def test_extremes(self):
        assert eve_information(1.0) == 1.0
        assert eve_information(0.0) == 1.0  # anti-correlated is fully informative
        assert eve_information(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_bounds(self):
        for p in np.linspace(0, 1, 21):
            assert 0.0 <= eve_information(float(p)) <= 1.0
