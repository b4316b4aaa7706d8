import numpy as np
import pytest

from src.algebra.errors import DimensionMismatch, UnsupportedModel
from src.algebra.partitions import enumerate_pairings, is_noncrossing, parse_epsilon, wigner_pairing
from src.physics.moment_engine import (
    CorrelatorSpec,
    box_integral,
    bose_moment,
    bose_prelimit_moment,
    convergence_study,
    limit_moment,
    limit_moment_oscillatory,
    prelimit_moment,
    prelimit_pairing,
    scale_times,
)
from src.physics.spectral_model import (
    ConstantDispersion,
    FormFactor,
    LinearDispersion,
    PhysParams,
    QuadraticDispersion,
    bose_kernel,
)

PP = PhysParams()
OMEGA_ONE = ConstantDispersion(1.0)
G = FormFactor(1.0, 0.0, 1.0)
# centered on the emission root 3 - sqrt(7) at p = 3
G_ROOT = FormFactor(1.0, 3.0 - np.sqrt(7.0), 0.5)


def spec_of(text, p, factors=None, times=None):
    eps = parse_epsilon(text)
    factors = factors or [G] * len(eps)
    times = times or [1.0] * len(eps)
    return CorrelatorSpec(eps, times, factors, [p])


class TestCorrelatorSpec:
    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            CorrelatorSpec(parse_epsilon("1,0"), [1.0], [G, G], [0.0])

    def test_negative_time(self):
        with pytest.raises(ValueError):
            CorrelatorSpec(parse_epsilon("1,0"), [1.0, -1.0], [G, G], [0.0])

    def test_time_factor(self):
        spec = spec_of("1,1,0,0", 3.0, times=[1.0, 0.4, 0.7, 2.0])
        assert spec.time_factor(wigner_pairing(spec.eps)) == pytest.approx(1.0 * 0.4)


class TestLimitMoment:
    def test_two_point_reference(self):
        result = limit_moment(spec_of("1,0", 2.0), PP, OMEGA_ONE)
        assert result.value.real == pytest.approx(3.1526, abs=1e-3)
        assert result.pairing.pairs == ((2, 1),)
        assert len(result.shell_data) == 1

    def test_rainbow_reference(self):
        assert limit_moment(spec_of("1,1,0,0", 3.0), PP, OMEGA_ONE).value.real == pytest.approx(4.9766, rel=1e-3)

    def test_trivial_sequence_vanishes(self):
        result = limit_moment(spec_of("1,0,0,1", 3.0), PP, OMEGA_ONE)
        assert result.value == 0
        assert result.pairing is None

    def test_time_factor_law(self):
        spec = spec_of("1,1,0,0", 3.0, times=[1.0, 0.5, 0.8, 1.2])
        base = limit_moment(spec, PP, OMEGA_ONE).value
        for s in (0.5, 2.0, 3.0):
            assert limit_moment(scale_times(spec, s), PP, OMEGA_ONE).value == pytest.approx(s ** 2 * base)

    def test_disjoint_blocks_factor(self):
        f, g = FormFactor(1.0, 0.2, 0.8), FormFactor(0.5 + 0.5j, 0.4, 1.1)
        full = limit_moment(spec_of("1,0,1,0", 3.0, factors=[f, f, g, g]), PP, OMEGA_ONE).value
        first = limit_moment(spec_of("1,0", 3.0, factors=[f, f]), PP, OMEGA_ONE).value
        second = limit_moment(spec_of("1,0", 3.0, factors=[g, g]), PP, OMEGA_ONE).value
        assert full == pytest.approx(first * second, rel=1e-9)

    def test_higher_dimension_unsupported(self):
        spec = CorrelatorSpec(parse_epsilon("1,0"), [1.0, 1.0], [FormFactor(1.0, [0.0] * 3, 1.0)] * 2,
                              [1.0, 0.0, 0.0])
        with pytest.raises(UnsupportedModel):
            limit_moment(spec, PhysParams(dim=3), OMEGA_ONE)


class TestOscillatoryLimit:
    def test_two_point_matches_shell_evaluation(self):
        spec = spec_of("1,0", 2.0)
        exact = limit_moment(spec, PP, OMEGA_ONE).value
        assert limit_moment_oscillatory(spec, PP, OMEGA_ONE) == pytest.approx(exact, rel=1e-2)

    @pytest.mark.slow
    @pytest.mark.parametrize("p,disp", [
        (3.0, ConstantDispersion(1.0)),
        (3.5, ConstantDispersion(0.6)),
        (3.2, QuadraticDispersion(0.5, 2.0)),
    ])
    def test_rainbow_matches_shell_evaluation(self, p, disp):
        spec = spec_of("1,1,0,0", p)
        exact = limit_moment(spec, PP, disp).value
        assert limit_moment_oscillatory(spec, PP, disp) == pytest.approx(exact, rel=1e-2)

    def test_three_pairs_unsupported(self):
        with pytest.raises(UnsupportedModel):
            limit_moment_oscillatory(spec_of("1,1,1,0,0,0", 3.0), PP, OMEGA_ONE)


class TestBoseMoment:
    def test_two_point_reference(self):
        value = bose_moment(parse_epsilon("1,0"), [1.0, 1.0], [G, G], 1.0, PP, LinearDispersion(1.0))
        assert value.real == pytest.approx(4 * np.pi / np.e)

    def test_counts_every_pairing(self):
        eps = parse_epsilon("1,1,0,0")
        assert len(enumerate_pairings(eps)) == 2
        assert wigner_pairing(eps).n == 2
        assert sum(1 for p in enumerate_pairings(eps) if is_noncrossing(p)) == 1

        disp = QuadraticDispersion(0.0, 1.0)
        f, g = FormFactor(1.0, 0.3, 0.9), FormFactor(0.7, -0.2, 1.1)
        value = bose_moment(eps, [1.0] * 4, [f, g, g, f], 0.5, PP, disp)
        k = {(a, c): bose_kernel(PP, disp, 0.5, x, y) for (a, x) in ((3, g), (4, f)) for (c, y) in ((1, f), (2, g))}
        expected = k[(4, 1)] * k[(3, 2)] + k[(3, 1)] * k[(4, 2)]
        assert value == pytest.approx(expected, rel=1e-12)

    def test_disjoint_blocks_factor(self):
        disp = QuadraticDispersion(0.0, 1.0)
        f, g = FormFactor(1.0, 0.2, 0.8), FormFactor(0.5 + 0.5j, 0.4, 1.1)
        full = bose_moment(parse_epsilon("1,0,1,0"), [1.0] * 4, [f, f, g, g], 0.5, PP, disp)
        first = bose_moment(parse_epsilon("1,0"), [1.0] * 2, [f, f], 0.5, PP, disp)
        second = bose_moment(parse_epsilon("1,0"), [1.0] * 2, [g, g], 0.5, PP, disp)
        assert full == pytest.approx(first * second, rel=1e-9)

    def test_trivial_sequence_vanishes(self):
        assert bose_moment(parse_epsilon("0,1"), [1.0, 1.0], [G, G], 1.0, PP, LinearDispersion(1.0)) == 0

    def test_prelimit_approaches_limit(self):
        disp = QuadraticDispersion(0.0, 1.0)
        eps = parse_epsilon("1,0")
        limit = bose_moment(eps, [1.0, 1.0], [G, G], 0.5, PP, disp)
        errors = [abs(bose_prelimit_moment(eps, [1.0, 1.0], [G, G], 0.5, PP, disp, lam) - limit)
                  for lam in (0.5, 0.2)]
        assert errors[1] < errors[0]


class TestBoxIntegral:
    def test_zero_rate(self):
        assert box_integral(0.0, 2.5) == pytest.approx(2.5)

    def test_matches_antiderivative(self):
        rate, span = 1.7, 3.0
        assert box_integral(rate, span) == pytest.approx((np.exp(1j * rate * span) - 1.0) / (1j * rate))


class TestPrelimit:
    def test_momentum_route_matches_relative_time_route(self):
        spec = spec_of("1,0", 3.0, factors=[G_ROOT, G_ROOT])
        pairing = wigner_pairing(spec.eps)
        total, per_pairing = prelimit_moment(spec, PP, OMEGA_ONE, 0.5)
        direct = prelimit_pairing(spec, PP, OMEGA_ONE, 0.5, pairing)
        assert list(per_pairing) == [pairing]
        assert direct == pytest.approx(total, rel=1e-5)

    def test_zero_time_gives_zero(self):
        spec = spec_of("1,0", 3.0, factors=[G_ROOT, G_ROOT], times=[0.0, 1.0])
        total, _ = prelimit_moment(spec, PP, OMEGA_ONE, 0.5)
        assert total == 0

    def test_rejects_mismatched_pairing(self):
        spec = spec_of("1,0,1,0", 3.0)
        crossing = [p for p in enumerate_pairings(parse_epsilon("1,1,0,0")) if not is_noncrossing(p)][0]
        with pytest.raises(ValueError):
            prelimit_pairing(spec, PP, OMEGA_ONE, 0.5, crossing)

    def test_coupling_must_be_positive(self):
        with pytest.raises(ValueError):
            prelimit_moment(spec_of("1,0", 3.0), PP, OMEGA_ONE, 0.0)

    def test_three_pairs_unsupported(self):
        with pytest.raises(UnsupportedModel):
            prelimit_moment(spec_of("1,1,1,0,0,0", 3.0), PP, OMEGA_ONE, 0.5)

    @pytest.mark.slow
    def test_convergence_to_limit(self):
        spec = spec_of("1,0", 3.0, factors=[G_ROOT, G_ROOT])
        rows = convergence_study(spec, PP, OMEGA_ONE, [0.5, 0.3, 0.2, 0.1])
        errors = [row.error for row in rows]
        assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
        assert errors[-1] < 0.1 * errors[0]

    @pytest.mark.slow
    def test_crossing_pairing_is_suppressed(self):
        spec = spec_of("1,1,0,0", 3.0, factors=[G_ROOT] * 4)
        limit = limit_moment(spec, PP, OMEGA_ONE).value
        _, coarse = prelimit_moment(spec, PP, OMEGA_ONE, 0.5)
        _, fine = prelimit_moment(spec, PP, OMEGA_ONE, 0.1)
        crossing = next(p for p in coarse if not is_noncrossing(p))
        rainbow = next(p for p in coarse if is_noncrossing(p))
        assert abs(fine[crossing]) < 0.25 * abs(coarse[crossing])
        assert abs(fine[rainbow] - limit) / abs(limit) < abs(coarse[rainbow] - limit) / abs(limit)
