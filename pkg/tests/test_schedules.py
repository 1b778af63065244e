import math

import numpy as np
import pytest

from freezemc import (
    ConstantPlus,
    Critical,
    FreezingSchedule,
    LogPower,
    PowerLaw,
    Regime,
    RemainderSpec,
    Tabulated,
    as_rate_ell,
    classify,
    fluctuation_envelope_exponent,
    gamma_alpha,
    lambda_rate,
    nonstandard_rate_bound,
    p_at,
    schedule_from_dict,
    upsilon,
)
from freezemc.errors import (
    RemainderBoundError,
    ScheduleError,
    UnstableEstimateError,
    UnsupportedRegimeError,
)


def sched(kind, remainder=None):
    if remainder is None:
        return FreezingSchedule(kind)
    return FreezingSchedule(kind, remainder)


class TestPAt:
    def test_power_law(self):
        assert p_at(sched(PowerLaw(1.0, 0.5)), 4) == pytest.approx(0.5)

    def test_critical(self):
        s = sched(Critical(2.0))
        assert s.n_min == 2
        assert p_at(s, 10) == pytest.approx(0.2)
        with pytest.raises(ScheduleError):
            p_at(s, 1)

    def test_log_power(self):
        s = sched(LogPower(2.0))
        assert s.n_min == 2
        assert p_at(s, 7) == pytest.approx(math.log(7.0) ** 2 / 7.0)

    def test_constant_plus(self):
        s = sched(ConstantPlus(0.4, c=0.5, decay=1.0))
        assert p_at(s, 10) == pytest.approx(0.45)
        assert s.limit_p == 0.4

    def test_tabulated(self):
        s = sched(Tabulated((0.5, 0.25, 0.2)))
        assert p_at(s, 2) == 0.25
        with pytest.raises(ScheduleError):
            p_at(s, 4)

    def test_vectorized(self):
        s = sched(PowerLaw(1.0, 0.5))
        np.testing.assert_allclose(p_at(s, np.array([1, 4, 16])), [1.0, 0.5, 0.25])

    def test_power_law_n_min_keeps_values_in_range(self):
        s = sched(PowerLaw(4.0, 0.5))
        assert s.n_min == 16
        assert p_at(s, 16) <= 1.0

    @pytest.mark.parametrize(
        "kind,start",
        [
            (PowerLaw(1.0, 0.3), 1),
            (Critical(1.5), 2),
            (LogPower(1.0), 3),  # log(n)^z/n increases until n = e^z
            (LogPower(2.5), 13),
            (ConstantPlus(0.3, c=0.6, decay=0.7), 1),
        ],
    )
    def test_monotone_tail(self, kind, start):
        s = sched(kind)
        ns = np.arange(max(start, s.n_min), 3000)
        vals = p_at(s, ns)
        assert np.all(np.diff(vals) <= 1e-15)
        assert np.all((vals > 0) & (vals <= 1.0))


class TestGammaAlpha:
    def test_power_law_example(self):
        g, a = gamma_alpha(100, sched(PowerLaw(1.0, 0.5)))
        assert g == pytest.approx(0.01)
        assert a == pytest.approx(math.sqrt(10.0))

    def test_critical_cancellation(self):
        _, a = gamma_alpha(57, sched(Critical(0.7)))
        assert a == pytest.approx(math.sqrt(0.7), abs=1e-14)

    def test_first_step(self):
        g, _ = gamma_alpha(1, sched(PowerLaw(1.0, 0.5)))
        assert g == 1.0


class TestUpsilon:
    def test_power_law_analytic(self):
        assert upsilon(sched(PowerLaw(2.0, 0.5))) == -0.5

    def test_constant_plus(self):
        assert upsilon(sched(ConstantPlus(0.7))) == 0.0

    def test_critical_reported(self):
        assert upsilon(sched(Critical(1.0))) == -1.0

    def test_numeric_matches_analytic(self):
        est = upsilon(sched(PowerLaw(1.0, 0.5)), mode="numeric")
        assert est == pytest.approx(-0.5, abs=1e-3)

    def test_tabulated_fit(self):
        values = tuple((np.arange(1, 4001) ** -0.3).tolist())
        est = upsilon(sched(Tabulated(values)))
        assert est == pytest.approx(-0.3, abs=0.01)

    def test_tabulated_unstable(self):
        rng = np.random.default_rng(0)
        values = np.sort(rng.uniform(0.1, 1.0, 64))[::-1]
        with pytest.raises(UnsupportedRegimeError):
            upsilon(sched(Tabulated(tuple(values))))


class TestLambdaRate:
    def test_power_shortcut(self):
        # gamma = 1/n, eps = n^{theta-1} gives 1 - theta
        assert lambda_rate(("power", 1.0, 1.0), ("power", 1.0, 0.5)) == 0.5

    def test_beta_one(self):
        assert lambda_rate(("power", 1.0, 1.0), ("power", 1.0, 1.0)) == 1.0

    def test_zero_sequence_convention(self):
        assert lambda_rate(("power", 1.0, 1.0), None) == math.inf

    def test_log_factor_vanishes(self):
        eps = lambda n: 1.0 / (np.asarray(n, dtype=float) * np.log(np.maximum(n, 2)) ** 2)
        est = lambda_rate(("power", 1.0, 1.0), eps, mode="numeric", n_max=10_000_000)
        assert est == pytest.approx(1.0, abs=0.05)

    def test_numeric_agrees_with_analytic_for_power_laws(self):
        for beta in (0.3, 0.5, 0.8):
            est = lambda_rate(
                ("power", 1.0, 1.0), ("power", 1.0, beta), mode="numeric", n_max=10_000_000
            )
            assert abs(est - min(beta, 1.0)) < 0.02

    def test_oscillating_flagged_unstable(self):
        def eps(n):
            n = np.asarray(n, dtype=float)
            expo = np.where((np.floor(np.log2(n)).astype(int) % 2) == 0, 0.2, 0.8)
            return n**-expo

        with pytest.raises(UnstableEstimateError):
            lambda_rate(("power", 1.0, 1.0), eps, mode="numeric", n_max=1_000_000)


class TestRateEll:
    def test_power_law_published(self):
        assert as_rate_ell(sched(PowerLaw(1.0, 0.3))) == pytest.approx(0.7)

    def test_log_power_published(self):
        assert as_rate_ell(sched(LogPower(2.0))) == 1.0
        assert as_rate_ell(sched(LogPower(1.0))) == 0.0

    def test_remainder_caps_the_rate(self):
        rem = RemainderSpec(A=1.0, theta_r=0.25, model="power", coeff=0.5)
        s = sched(PowerLaw(1.0, 0.5), rem)
        assert as_rate_ell(s) == pytest.approx(0.25)

    def test_needs_standard_regime(self):
        with pytest.raises(UnsupportedRegimeError):
            as_rate_ell(sched(Critical(1.0)))


class TestEnvelope:
    def test_power_law(self):
        assert fluctuation_envelope_exponent(sched(PowerLaw(1.0, 0.5))) == pytest.approx(0.25)

    def test_constant_schedule_recovers_clt_scale(self):
        assert fluctuation_envelope_exponent(sched(ConstantPlus(0.5))) == pytest.approx(0.5)

    def test_remainder_bias_caps(self):
        rem = RemainderSpec(A=1.0, theta_r=0.1, model="power", coeff=0.5)
        assert fluctuation_envelope_exponent(sched(PowerLaw(1.0, 0.5), rem)) == pytest.approx(0.1)


class TestNonstandardBound:
    def test_plug_in(self):
        assert nonstandard_rate_bound(1.0, 1.0, 1.0, 2.0) == pytest.approx(0.4)

    def test_vanishing_numerator(self):
        assert nonstandard_rate_bound(1.0, 1e-9, 1.0, 1.0) < 1e-8

    def test_fast_mixing_limit(self):
        assert nonstandard_rate_bound(1.0, 1.0, 1e9, 1.0) == pytest.approx(0.5, abs=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            nonstandard_rate_bound(0.5, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            nonstandard_rate_bound(1.0, 1.5, 1.0, 1.0)


class TestClassify:
    def test_critical(self):
        rep = classify(sched(Critical(1.0)))
        assert rep.regime is Regime.NON_STANDARD
        assert rep.a == 1.0

    def test_power_law_standard(self):
        rep = classify(sched(PowerLaw(1.0, 0.5)))
        assert rep.regime is Regime.STANDARD
        assert rep.upsilon == -0.5

    def test_power_law_frozen(self):
        assert classify(sched(PowerLaw(1.0, 1.5))).regime is Regime.FROZEN

    def test_power_law_at_one_is_critical(self):
        assert classify(sched(PowerLaw(2.0, 1.0))).regime is Regime.NON_STANDARD

    def test_log_power_notes_degenerate_covariance(self):
        rep = classify(sched(LogPower(2.0)))
        assert rep.regime is Regime.STANDARD
        assert "undefined" in rep.notes

    def test_tabulated_critical(self):
        ns = np.arange(1, 2001, dtype=float)
        rep = classify(sched(Tabulated(tuple(0.8 / ns))))
        assert rep.regime is Regime.NON_STANDARD
        assert rep.a == pytest.approx(0.8, abs=1e-6)

    def test_tabulated_standard(self):
        ns = np.arange(1, 2001, dtype=float)
        rep = classify(sched(Tabulated(tuple(ns**-0.4))))
        assert rep.regime is Regime.STANDARD
        assert rep.upsilon == pytest.approx(-0.4, abs=0.02)

    def test_tabulated_frozen(self):
        ns = np.arange(1, 2001, dtype=float)
        assert classify(sched(Tabulated(tuple(ns**-1.5)))).regime is Regime.FROZEN

    def test_tabulated_between_regimes_unsupported(self):
        ns = np.arange(2, 5002, dtype=float)
        values = 1.0 / (ns * np.log(ns))
        assert classify(sched(Tabulated(tuple(values)))).regime is Regime.UNSUPPORTED

    def test_total(self):
        for kind in (
            PowerLaw(0.5, 0.2),
            PowerLaw(1.0, 1.0),
            PowerLaw(1.0, 2.0),
            Critical(3.0),
            LogPower(1.0),
            ConstantPlus(1.0),
            ConstantPlus(0.2, c=0.5, decay=2.0),
        ):
            assert classify(sched(kind)).regime in Regime


class TestRemainder:
    def test_zero(self):
        rem = RemainderSpec()
        assert rem.is_zero
        np.testing.assert_array_equal(rem.matrix(5, 3), np.zeros((3, 3)))

    def test_power_scalar(self):
        rem = RemainderSpec(A=1.0, theta_r=0.5, model="power", coeff=0.5)
        m = rem.matrix(4, 2)
        assert m[0, 1] == pytest.approx(0.25)
        assert m[0, 0] == 0.0

    def test_power_matrix(self):
        coeff = np.array([[0.0, 0.0], [1.0, 0.0]])
        rem = RemainderSpec(A=1.0, theta_r=0.5, model="power", coeff=coeff)
        m = rem.matrix(16, 2)
        assert m[1, 0] == pytest.approx(0.25)
        assert m[0, 1] == 0.0

    def test_bound_violation_aborts(self):
        rem = RemainderSpec(A=1.0, theta_r=1.0, model="custom", fn=lambda n, d: np.full((d, d), 2.0 / n))
        with pytest.raises(RemainderBoundError):
            rem.matrix(10, 2)

    def test_declared_bounds_validated(self):
        with pytest.raises(ScheduleError):
            RemainderSpec(A=0.5)
        with pytest.raises(ScheduleError):
            RemainderSpec(theta_r=1.5)

    def test_row_abs_sum_bound(self):
        assert RemainderSpec(A=2.0).row_abs_sum_bound(4) == 6.0


class TestFromDict:
    def test_power_law_with_remainder(self):
        s = schedule_from_dict(
            {
                "kind": "power_law",
                "a": 1.0,
                "theta": 0.5,
                "remainder": {"A": 1.0, "theta_r": 1.0, "model": "zero"},
            }
        )
        assert isinstance(s.kind, PowerLaw)
        assert s.remainder.is_zero

    def test_all_kinds(self):
        for spec in (
            {"kind": "critical", "a": 2.0},
            {"kind": "log_power", "zeta": 1.5},
            {"kind": "constant_plus", "p": 0.5, "c": 0.1},
            {"kind": "tabulated", "values": [0.5, 0.4, 0.3]},
        ):
            assert classify(schedule_from_dict(spec)).regime in Regime

    def test_unknown_kind(self):
        with pytest.raises(ScheduleError):
            schedule_from_dict({"kind": "nope"})
