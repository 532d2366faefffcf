import math

import numpy as np
import pytest

from dampwave.integrator import run
from dampwave.model import Case, InitSpec
from dampwave.potential import SourceDensity
from dampwave.ratefit import bounded_ratio, fit_decay, duality_check, rate_verdicts

from conftest import make_config

T_SYN = np.linspace(1.0, 400.0, 4000)


class TestFitDecay:
    def test_pure_power(self):
        assert fit_decay(T_SYN, T_SYN ** -2.0, (50.0, 400.0)) == pytest.approx(2.0, abs=1e-6)

    def test_power_times_log_corrected(self):
        E = T_SYN ** -2.0 * np.log(T_SYN)
        assert fit_decay(T_SYN, E, (50.0, 400.0), log_correction=True) == pytest.approx(2.0, abs=1e-3)
        # without the correction the log factor biases the exponent low
        assert fit_decay(T_SYN, E, (50.0, 400.0)) < 1.9

    def test_constant(self):
        assert fit_decay(T_SYN, np.full_like(T_SYN, 3.0), (50.0, 400.0)) == pytest.approx(0.0, abs=1e-12)

    def test_nonpositive_rejected(self):
        E = T_SYN ** -2.0
        E[3000] = 0.0
        with pytest.raises(ValueError):
            fit_decay(T_SYN, E, (50.0, 400.0))

    def test_window_must_span_an_octave(self):
        with pytest.raises(ValueError):
            fit_decay(T_SYN, T_SYN ** -2.0, (250.0, 400.0))

    def test_correction_needs_t_above_one(self):
        t = np.linspace(0.1, 2.0, 50)
        with pytest.raises(ValueError):
            fit_decay(t, t ** -1.0, (0.5, 2.0), log_correction=True)


def _growth_of(q, env, lo=50.0, hi=400.0):
    # independent arithmetic: end ratio over the largest first-half ratio
    t = T_SYN[(T_SYN >= lo) & (T_SYN <= hi)]
    r = q(t) / env(t)
    return r[-1] / r[t <= 0.5 * (lo + hi)].max()


class TestBoundedRatio:
    def test_identical_series(self):
        env = np.log(2.0 + T_SYN)
        br = bounded_ratio(T_SYN, env, env, (50.0, 400.0))
        assert br.verdict and br.growth == pytest.approx(1.0)
        assert np.allclose(br.ratio, 1.0)

    def test_sublinear_power_against_log(self):
        br = bounded_ratio(T_SYN, T_SYN ** 0.3, np.log(T_SYN), (50.0, 400.0))
        expected = _growth_of(lambda t: t ** 0.3, np.log)
        assert br.growth == pytest.approx(expected, rel=1e-12)
        assert br.growth == pytest.approx(1.074, abs=2e-3)
        assert br.verdict

    def test_linear_against_log_fails(self):
        br = bounded_ratio(T_SYN, T_SYN, np.log(T_SYN), (50.0, 400.0))
        assert br.growth == pytest.approx(_growth_of(lambda t: t, np.log), rel=1e-12)
        assert br.growth > 1.5 and not br.verdict

    @pytest.mark.parametrize("scale", [1e-12, 0.3, 7.0, 1e9])
    def test_scale_invariant(self, scale):
        for q in (T_SYN ** 0.3, T_SYN):
            a = bounded_ratio(T_SYN, q, np.log(T_SYN), (50.0, 400.0))
            b = bounded_ratio(T_SYN, scale * q, np.log(T_SYN), (50.0, 400.0))
            assert a.verdict == b.verdict
            assert a.growth == pytest.approx(b.growth, rel=1e-12)

    def test_monotone_in_tolerance(self):
        q = T_SYN ** 0.6
        verdicts = [bounded_ratio(T_SYN, q, np.log(T_SYN), (50.0, 400.0), tol).verdict
                    for tol in (1.0, 1.2, 1.5, 2.0, 3.0)]
        assert verdicts == sorted(verdicts)

    def test_zero_series_passes(self):
        br = bounded_ratio(T_SYN, np.zeros_like(T_SYN), np.log(T_SYN), (50.0, 400.0))
        assert br.verdict and br.growth == 0.0

    def test_envelope_must_be_positive(self):
        with pytest.raises(ValueError):
            bounded_ratio(T_SYN, T_SYN, np.zeros_like(T_SYN), (50.0, 400.0))


@pytest.fixture(scope="module")
def bump_run():
    return run(make_config(T=6.0), snapshot_times=(6.0,))


def _source(res):
    return SourceDensity.from_initial(res.init, res.V)


class TestDuality:
    def test_zero_data(self):
        res = run(make_config(T=1.0).replace(init=InitSpec(L=1.0)), snapshot_times=(1.0,))
        chk = duality_check(1.0, res.snapshots[1.0].v, _source(res), 1.0, 0.09)
        assert chk.lhs == 0.0 and chk.rhs == 0.0 and chk.verdict

    def test_bump_run(self, bump_run):
        eps = bump_run.config.lame.a ** 2 / 4
        chk = duality_check(6.0, bump_run.snapshots[6.0].v, _source(bump_run), 1.0, eps)
        assert chk.verdict
        assert chk.lhs > 0 and chk.slack > 0

    def test_rhs_grows_for_large_eps(self, bump_run):
        v = bump_run.snapshots[6.0].v
        src = _source(bump_run)
        rhs = [duality_check(6.0, v, src, 1.0, eps).rhs for eps in (1.0, 10.0, 100.0)]
        assert rhs[0] < rhs[1] < rhs[2]
        lhs = {duality_check(6.0, v, src, 1.0, eps).lhs for eps in (1.0, 10.0, 100.0)}
        assert len(lhs) == 1

    def test_eps_positive(self, bump_run):
        with pytest.raises(ValueError):
            duality_check(6.0, bump_run.snapshots[6.0].v, _source(bump_run), 1.0, 0.0)


class TestRateVerdicts:
    def test_zero_data_vacuous(self):
        res = run(make_config(T=8.0, res=5.0).replace(init=InitSpec(L=1.0)))
        rep = rate_verdicts(res.series, res.config, _source(res), 0.0)
        assert rep.passed and rep.fitted_exponent is None
        assert all(max(br.ratio) == 0.0 for br in rep.boundedness_ratios.values())

    def test_missing_series(self, bump_run):
        series = dict(bump_run.series)
        del series["weighted_l2"]
        with pytest.raises(KeyError):
            rate_verdicts(series, bump_run.config, _source(bump_run), 1.0)

    def test_envelope_exponents(self):
        inter = make_config(T=8.0, res=5.0, V0=1.5, case=Case.INTERMEDIATE, delta=0.1)
        res = run(inter)
        rep = rate_verdicts(res.series, inter, _source(res), 1.0)
        assert rep.envelope_exponent == pytest.approx(1.4)
        assert set(rep.boundedness_ratios) == {"energy_decay", "l2_growth"}
        strong = run(make_config(T=8.0, res=5.0))
        rep = rate_verdicts(strong.series, strong.config, _source(strong), 1.0)
        assert rep.envelope_exponent == 2.0
        assert rep.fitted_exponent is not None and math.isfinite(rep.fitted_exponent)
        assert "fitted exponent" in rep.summary()

    def test_undamped_checks_l2_only(self):
        res = run(make_config(T=8.0, res=5.0, V0=0, case=Case.UNDAMPED))
        rep = rate_verdicts(res.series, res.config, _source(res), 1.0)
        assert set(rep.boundedness_ratios) == {"l2_growth"}
        assert rep.fitted_exponent is None

    def test_tolerance_monotone(self, bump_run):
        src = _source(bump_run)
        passed = [rate_verdicts(bump_run.series, bump_run.config, src, 1.0,
                                   window=(2.0, 6.0), tol=tol).passed
                  for tol in (0.5, 1.0, 1.5, 3.0, 10.0)]
        assert passed == sorted(passed)
