import numpy as np
import pytest

from topobreak.exceptions import ConfigError, InputError
from topobreak.models.enums import BreakKind, FiltrationKind, GeneratorKind
from topobreak.models.schemas import (
    BreakSpec, CloudSeriesSpec, DomainM, InnovationSpec, LinearProcessSpec, StatSeries
)
from topobreak.services.changepoint import changepoint_service
from topobreak.services.persistence import persistence_service
from topobreak.services.procgen import procgen_service


def _iid_spec(n=20, r=4):
    return CloudSeriesSpec(generator=GeneratorKind.IID_CLOUDS, n=n, domain=DomainM.unit(2), r=r)


def _delay_spec(n=50, r=4, K=8, beta=4.5, scale=1.0, side=4.0):
    return CloudSeriesSpec(
        generator=GeneratorKind.DELAY_EMBEDDING,
        n=n,
        domain=DomainM(d=2, lo=[-side, -side], hi=[side, side]),
        r=r,
        linear_process=LinearProcessSpec(decay_exponent=beta, scale=scale, truncation_lag=K),
    )


class TestGenSeries:
    def test_iid_shape_and_domain(self):
        spec = _iid_spec()
        series = procgen_service.gen_series(spec, 1)
        assert len(series) == 20
        for x in series:
            assert x.points.shape == (4, 2)
            assert spec.domain.contains(x.points)

    def test_seed_determinism(self):
        spec = _delay_spec()
        a = procgen_service.gen_series(spec, 5)
        b = procgen_service.gen_series(spec, 5)
        c = procgen_service.gen_series(spec, 6)
        assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))
        assert not all(np.array_equal(x.points, y.points) for x, y in zip(a, c))

    def test_zero_scale_is_constant(self):
        spec = _delay_spec(scale=0.0)
        for x in procgen_service.gen_series(spec, 3):
            assert np.all(x.points == 0.0)

    def test_delay_coordinates_shift(self):
        # X_{t,i+1} = Y_{t-i-1} = X_{t-1,i} (클리핑이 없을 때)
        spec = _delay_spec(scale=0.5, side=100.0)
        series = procgen_service.gen_series(spec, 8)
        for t in range(1, len(series)):
            np.testing.assert_allclose(series[t].points[1:], series[t - 1].points[:-1], atol=1e-12)

    def test_truncated_gaussian_innovations(self):
        spec = CloudSeriesSpec(
            generator=GeneratorKind.IID_CLOUDS, n=30, domain=DomainM.unit(2), r=3,
            innovation=InnovationSpec(
                dist="TruncatedGaussian", dim=2, lo=[0.0, 0.0], hi=[1.0, 1.0], mean=[0.5, 0.5], sd=0.2
            ),
        )
        series = procgen_service.gen_series(spec, 2)
        assert all(spec.domain.contains(x.points) for x in series)

    def test_delay_requires_linear_process(self):
        with pytest.raises(ValueError):
            CloudSeriesSpec(generator=GeneratorKind.DELAY_EMBEDDING, n=10, domain=DomainM.unit(2), r=3)


class TestCoupling:
    def test_identity_beyond_horizon(self):
        spec = _delay_spec()
        for original, coupled in procgen_service.gen_m_coupled(spec, 8 + 4, 11):
            assert np.array_equal(original.points, coupled.points)

    def test_iid_coupling_is_trivial(self):
        for original, coupled in procgen_service.gen_m_coupled(_iid_spec(), 1, 11):
            assert np.array_equal(original.points, coupled.points)

    def test_small_m_differs(self):
        pairs = procgen_service.gen_m_coupled(_delay_spec(), 1, 11)
        assert any(not np.array_equal(a.points, b.points) for a, b in pairs)

    def test_original_matches_gen_series(self):
        spec = _delay_spec()
        series = procgen_service.gen_series(spec, 13)
        pairs = procgen_service.gen_m_coupled(spec, 3, 13)
        assert all(np.array_equal(x.points, a.points) for x, (a, _) in zip(series, pairs))

    def test_invalid_m(self):
        with pytest.raises(InputError):
            procgen_service.gen_m_coupled(_delay_spec(), 0, 1)


class TestApproxProfile:
    def test_zero_beyond_horizon(self):
        spec = _delay_spec()
        profile = procgen_service.approx_profile(spec, 2.0, [1, 4, 12, 13, 20], 500, 3)
        nu = dict(zip(profile.m, profile.nu_hat))
        assert nu[12] == 0.0 and nu[13] == 0.0 and nu[20] == 0.0
        assert nu[1] > nu[4] > 0.0

    def test_non_increasing_within_two_stderr(self):
        profile = procgen_service.approx_profile(_delay_spec(), 2.0, list(range(1, 16)), 4000, 5)
        nu = np.asarray(profile.nu_hat)
        se = np.asarray(profile.stderr)
        assert np.all(nu[1:] - nu[:-1] <= 2.0 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2))

    def test_weighted_sums_flatten(self):
        # β = 2 + p/α + 0.5
        spec = _delay_spec(beta=4.5)
        profile = procgen_service.approx_profile(spec, 2.0, list(range(1, 101)), 2000, 7, alpha=1.0, delta=0.1)
        assert profile.last_decade_increment < 0.05
        assert all(b >= a for a, b in zip(profile.weighted_partial_sums, profile.weighted_partial_sums[1:]))

    def test_p_below_one(self):
        with pytest.raises(InputError):
            procgen_service.approx_profile(_delay_spec(), 0.5, [1, 2], 100, 1)

    def test_feature_level_zero_beyond_horizon(self):
        spec = _delay_spec(r=3, K=2)
        profile = procgen_service.feature_approx_profile(
            spec, 0, FiltrationKind.VIETORIS_RIPS, 1, 2.0, [1, 5], 100, 9
        )
        assert profile.nu_hat[0] > 0.0
        assert profile.nu_hat[1] == 0.0


class TestInjectBreak:
    def test_pre_break_unchanged(self):
        spec = _iid_spec(n=10)
        brk = BreakSpec(theta=0.5, kind=BreakKind.SCALE_CHANGE, factor=0.5)
        base = procgen_service.gen_series(spec, 4)
        broken = procgen_service.inject_break(spec, brk, 4)
        for t in range(5):
            assert np.array_equal(base[t].points, broken[t].points)
        for t in range(5, 10):
            expected = 0.5 + 0.5 * (base[t].points - 0.5)
            assert np.array_equal(broken[t].points, expected)

    def test_mean_shift_clipped(self):
        spec = _iid_spec(n=10)
        brk = BreakSpec(theta=0.3, kind=BreakKind.MEAN_SHIFT, delta=[0.25, 0.0])
        broken = procgen_service.inject_break(spec, brk, 4)
        assert all(spec.domain.contains(x.points) for x in broken)
        assert all(np.all(x.points[:, 0] >= 0.25) for x in broken[3:])

    def test_zero_shift_is_identity(self):
        spec = _iid_spec(n=12)
        brk = BreakSpec(theta=0.5, kind=BreakKind.MEAN_SHIFT, delta=[0.0, 0.0])
        base = procgen_service.gen_series(spec, 6)
        broken = procgen_service.inject_break(spec, brk, 6)
        assert all(np.array_equal(a.points, b.points) for a, b in zip(base, broken))

    def test_shift_too_large(self):
        brk = BreakSpec(theta=0.5, kind=BreakKind.MEAN_SHIFT, delta=[1.0, 0.0])
        with pytest.raises(ConfigError):
            procgen_service.inject_break(_iid_spec(), brk, 1)

    def test_shift_wrong_length(self):
        brk = BreakSpec(theta=0.5, kind=BreakKind.MEAN_SHIFT, delta=[0.1])
        with pytest.raises(ConfigError):
            procgen_service.inject_break(_iid_spec(), brk, 1)

    def test_change_index_out_of_range(self):
        brk = BreakSpec(theta=0.01, kind=BreakKind.SCALE_CHANGE, factor=2.0)
        with pytest.raises(ConfigError):
            procgen_service.inject_break(_iid_spec(n=20), brk, 1)


class TestExportSeries:
    def test_columns_and_rows(self):
        frame = procgen_service.export_series(procgen_service.gen_series(_iid_spec(n=5, r=3), 1))
        assert list(frame.columns) == ['t', 'point_index', 'coord_0', 'coord_1']
        assert len(frame) == 15
        assert frame['t'].tolist()[:4] == [1, 1, 1, 2]


class TestStationarity:
    @pytest.mark.parametrize("spec", [
        _iid_spec(n=400),
        _delay_spec(n=400, scale=1.0, side=2.0),
    ], ids=["iid", "delay"])
    def test_half_window_means_agree(self, spec):
        features = np.array([
            persistence_service.total_persistence(
                persistence_service.cloud_features(x, FiltrationKind.VIETORIS_RIPS, 0, 1)[1], 1.0
            )
            for x in procgen_service.gen_series(spec, 21)
        ])
        half = spec.n // 2
        first, second = features[:half], features[half:]
        # 지연임베딩은 K + r 시차까지 의존하므로 장기분산으로 표준오차 계산
        variances = [
            float(changepoint_service.long_run_cov(StatSeries(values=w), bandwidth=16).gamma_hat[0, 0])
            for w in (first, second)
        ]
        pooled_se = np.sqrt(variances[0] / first.size + variances[1] / second.size)
        assert abs(first.mean() - second.mean()) < 3.0 * pooled_se
