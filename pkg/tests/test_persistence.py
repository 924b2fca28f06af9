import math

import numpy as np
import pytest

from topobreak.exceptions import ConfigError, InputError, InvariantViolation
from topobreak.models.enums import (
    BreakKind, FeatureComponent, FiltrationKind, GeneratorKind, ReductionMethod, TieBreak
)
from topobreak.models.schemas import (
    BreakSpec, CloudSeriesSpec, DomainM, FeatureMapItem, FeatureVector, PersistenceDiagram,
    PersistencePair, PointCloud
)
from topobreak.services.geometry import geometry_service
from topobreak.services.persistence import n_features, persistence_service
from topobreak.services.procgen import procgen_service
from topobreak.services.stability import stability_service


def _diagram(x, kind, k, dim_cap, method=ReductionMethod.TWIST):
    T = geometry_service.filtration_cap(kind, x.domain)
    c = persistence_service.build_filtration(x, kind, dim_cap)
    return persistence_service.compute_persistence(c, k, T, method)


class TestFiltration:
    def test_sizes_and_order(self, unit_square):
        c = persistence_service.build_filtration(unit_square, FiltrationKind.VIETORIS_RIPS, 2)
        assert len(c) == 4 + 6 + 4
        assert c.values == sorted(c.values)
        # 같은 값이면 면(face)이 먼저
        position = {J: i for i, J in enumerate(c.simplices)}
        for J in c.simplices:
            if len(J) == 3:
                for e in [(J[0], J[1]), (J[0], J[2]), (J[1], J[2])]:
                    assert position[e] < position[J]

    def test_value_classes(self, unit_square):
        c = persistence_service.build_filtration(unit_square, FiltrationKind.VIETORIS_RIPS, 2)
        assert c.value_classes[0] == 0.0
        assert c.value_classes[1] == 1.0
        assert len(c.value_classes) == 3

    def test_dim_cap_range(self, unit_square):
        with pytest.raises(InputError):
            persistence_service.build_filtration(unit_square, FiltrationKind.VIETORIS_RIPS, 4)


class TestUnitSquare:
    def test_h1_pair(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 1, 2)
        assert len(pd_) == 1
        assert pd_.births[0] == pytest.approx(1.0, abs=1e-9)
        assert pd_.deaths[0] == pytest.approx(math.sqrt(2.0), abs=1e-9)
        assert not pd_.essential[0]

    def test_h0_deaths(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 0, 2)
        finite = pd_.deaths[~pd_.essential]
        assert len(finite) == 3
        assert np.all(np.abs(finite - 1.0) <= 1e-12)
        assert np.count_nonzero(pd_.essential) == 1
        assert pd_.deaths[pd_.essential][0] == geometry_service.filtration_cap(
            FiltrationKind.VIETORIS_RIPS, unit_square.domain
        )

    def test_cech_h1_pair(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.CECH, 1, 2)
        assert len(pd_) == 1
        assert pd_.births[0] == pytest.approx(0.5, abs=1e-12)
        assert pd_.deaths[0] == pytest.approx(math.sqrt(2.0) / 2.0, abs=1e-12)


class TestReductionOracle:
    @pytest.mark.parametrize("kind", list(FiltrationKind))
    @pytest.mark.parametrize("k", [0, 1])
    def test_twist_matches_naive(self, random_cloud, rng, kind, k):
        for _ in range(50):
            r = int(rng.integers(3, 6))
            x = random_cloud(r)
            fast = _diagram(x, kind, k, 2, ReductionMethod.TWIST)
            slow = _diagram(x, kind, k, 2, ReductionMethod.NAIVE)
            np.testing.assert_array_equal(fast.births, slow.births)
            np.testing.assert_array_equal(fast.deaths, slow.deaths)
            np.testing.assert_array_equal(fast.essential, slow.essential)

    @pytest.mark.parametrize("kind", list(FiltrationKind))
    def test_permutation_invariance(self, random_cloud, rng, kind):
        for _ in range(20):
            x = random_cloud(5)
            y = x.permuted(list(rng.permutation(5)))
            for k in (0, 1):
                a = _diagram(x, kind, k, 2)
                b = _diagram(y, kind, k, 2)
                np.testing.assert_array_equal(a.births, b.births)
                np.testing.assert_array_equal(a.deaths, b.deaths)

    def test_pair_count_bound(self, random_cloud):
        for _ in range(20):
            x = random_cloud(6)
            for k in (0, 1):
                assert len(_diagram(x, FiltrationKind.VIETORIS_RIPS, k, 2)) <= n_features(6, k)

    def test_cap_below_max_value(self, unit_square):
        c = persistence_service.build_filtration(unit_square, FiltrationKind.VIETORIS_RIPS, 2)
        with pytest.raises(InputError):
            persistence_service.compute_persistence(c, 1, 1.0)


class TestFeatureVector:
    def test_n_features(self):
        assert n_features(4, 1) == 6 + 4
        assert n_features(6, 0) == 6 + 15

    def test_padding(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 1, 2)
        padded = persistence_service.pad_diagram(pd_, n_features(4, 1))
        assert len(padded) == 10
        assert padded.n_nontrivial == 1
        assert np.all(padded.births[padded.trivial] == 0.0)
        assert np.all(padded.deaths[padded.trivial] == 0.0)

    def test_padding_overflow(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 0, 2)
        with pytest.raises(InvariantViolation):
            persistence_service.pad_diagram(pd_, 2)

    def test_interleaving_sorted_by_birth(self):
        pd_ = PersistenceDiagram.from_pairs(1, [
            PersistencePair(birth=0.4, death=0.9, dim=1),
            PersistencePair(birth=0.1, death=0.3, dim=1),
            PersistencePair(birth=0.0, death=0.0, dim=1, trivial=True),
        ])
        z = persistence_service.feature_vector(pd_)
        np.testing.assert_array_equal(z.z, [0.0, 0.0, 0.3, 0.1, 0.9, 0.4])
        np.testing.assert_allclose(z.persistences, [0.0, 0.2, 0.5])

    def test_seeded_tie_break_requires_stream(self, unit_square):
        pd_ = _diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 0, 2)
        with pytest.raises(InputError):
            persistence_service.feature_vector(pd_, TieBreak.SEEDED_RANDOM)

    def test_seeded_tie_break_keeps_births_sorted(self, unit_square, rng):
        pd_ = persistence_service.pad_diagram(_diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 0, 2), 10)
        z = persistence_service.feature_vector(pd_, TieBreak.SEEDED_RANDOM, rng)
        assert np.all(np.diff(z.births) >= 0.0)


class TestFeatureMap:
    def _z(self):
        return FeatureVector(k=1, z=np.array([0.0, 0.0, 0.5, 0.2, 1.0, 0.6]))

    def test_total_persistence(self):
        z = self._z()
        assert persistence_service.total_persistence(z, 1.0) == pytest.approx(0.7)
        assert persistence_service.total_persistence(z, 2.0) == pytest.approx(0.5)
        assert persistence_service.total_persistence(z, math.inf) == pytest.approx(0.4)

    def test_gamma_below_one(self):
        with pytest.raises(InputError):
            persistence_service.total_persistence(self._z(), 0.5)

    def test_map_components(self):
        out = persistence_service.feature_map(self._z(), [
            {"component": "TotalPersistence", "gamma": 1.0},
            {"component": "TotalPersistence", "gamma": "inf"},
            {"component": "MaxPersistence"},
            {"component": "MeanBirth"},
            {"component": "MeanDeath"},
        ])
        np.testing.assert_allclose(out, [0.7, 0.4, 0.4, 0.8 / 3.0, 0.5])

    def test_empty_map(self):
        with pytest.raises(ConfigError):
            persistence_service.feature_map(self._z(), [])

    def test_unknown_component(self):
        with pytest.raises(ConfigError):
            persistence_service.feature_map(self._z(), [{"component": "Entropy"}])

    def test_lipschitz_constants(self):
        N = 10
        item = FeatureMapItem(component=FeatureComponent.TOTAL_PERSISTENCE, gamma=1.0)
        assert persistence_service.lipschitz_constant(item, N) == pytest.approx(math.sqrt(2.0))
        item = FeatureMapItem(component=FeatureComponent.TOTAL_PERSISTENCE, gamma=2.0)
        assert persistence_service.lipschitz_constant(item, N) == pytest.approx(math.sqrt(2.0 * N))

    def test_export_diagrams(self, unit_square):
        pd_ = persistence_service.pad_diagram(_diagram(unit_square, FiltrationKind.VIETORIS_RIPS, 1, 2), 10)
        frame = persistence_service.export_diagrams([(1, pd_), (2, pd_)])
        assert list(frame.columns) == ['t', 'k', 'birth', 'death', 'essential', 'trivial']
        assert len(frame) == 20


STABILITY_CASES = [
    (FiltrationKind.VIETORIS_RIPS, 0, 2),
    (FiltrationKind.VIETORIS_RIPS, 1, 2),
    (FiltrationKind.CECH, 0, 1),
]


def _stability_violations(random_cloud, rng, kind, k, dim_cap, n_instances):
    """ρ 미만 섭동에서 ‖Z(x) − Z(y)‖ ≤ √(2N_k)·c*·√r·δ 위반 횟수"""
    r = 5
    c_star = geometry_service.gradient_bound(kind)
    N_k = n_features(r, k)
    violations = 0
    for _ in range(n_instances):
        x = random_cloud(r)
        rho = stability_service.rho_lower(x, kind, dim_cap).value
        delta = 0.9 * rho * rng.uniform()
        directions = rng.normal(size=x.points.shape)
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        moved = np.clip(x.points + delta * rng.uniform(size=(r, 1)) * directions, 0.0, 1.0)
        y = PointCloud(points=moved, domain=x.domain)
        _, zx = persistence_service.cloud_features(x, kind, k, dim_cap)
        _, zy = persistence_service.cloud_features(y, kind, k, dim_cap)
        bound = math.sqrt(2 * N_k) * c_star * math.sqrt(r) * delta
        if np.linalg.norm(zx.z - zy.z) > bound + 1e-12:
            violations += 1
    return violations


class TestFeatureStability:
    @pytest.mark.parametrize("kind,k,dim_cap", STABILITY_CASES)
    def test_perturbation_bound(self, random_cloud, rng, kind, k, dim_cap):
        assert _stability_violations(random_cloud, rng, kind, k, dim_cap, 200) == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("kind,k,dim_cap", STABILITY_CASES)
    def test_perturbation_bound_thousand_instances(self, random_cloud, rng, kind, k, dim_cap):
        assert _stability_violations(random_cloud, rng, kind, k, dim_cap, 1000) == 0


class TestCapRounding:
    def test_opposite_corner_clouds(self, rng):
        for _ in range(2000):
            d = int(rng.integers(3, 6))
            lo = rng.uniform(-10.0, 10.0, size=d)
            hi = lo + rng.uniform(0.01, 20.0, size=d)
            domain = DomainM(d=d, lo=lo.tolist(), hi=hi.tolist())
            x = PointCloud(points=np.vstack([lo, hi, (lo + hi) / 2.0]), domain=domain)
            diagram, _ = persistence_service.cloud_features(x, FiltrationKind.VIETORIS_RIPS, 0, 1)
            T = geometry_service.filtration_cap(FiltrationKind.VIETORIS_RIPS, domain)
            assert np.all(diagram.deaths <= T)

    def test_scale_change_pushes_points_to_corners(self):
        domain = DomainM(d=4, lo=[-1.0, 0.0, 2.0, -3.0], hi=[2.5, 1.0, 3.7, 0.3])
        spec = CloudSeriesSpec(generator=GeneratorKind.IID_CLOUDS, n=300, domain=domain, r=4)
        brk = BreakSpec(theta=0.5, kind=BreakKind.SCALE_CHANGE, factor=50.0)
        T = geometry_service.filtration_cap(FiltrationKind.VIETORIS_RIPS, domain)
        for x in procgen_service.inject_break(spec, brk, 17)[150:]:
            diagram, _ = persistence_service.cloud_features(x, FiltrationKind.VIETORIS_RIPS, 0, 1)
            assert diagram.deaths[diagram.essential][0] == T

    def test_rounding_excess_is_clamped(self, unit_square):
        c = persistence_service.build_filtration(unit_square, FiltrationKind.VIETORIS_RIPS, 2)
        T = c.max_value * (1.0 - 1e-14)
        pd_ = persistence_service.compute_persistence(c, 1, T)
        assert pd_.deaths.max() == T
        assert np.all(pd_.births <= T)
