import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracfront.errors import BracketError, ContinuationError, DomainError
from fracfront.model import CombustionCutoff, GeneralizedKPP, SolveParams, truncated_grid
from fracfront.speed_finder import (combustion_speed, epsilon_continuation_front,
                                    estimate_mu_star, fit_extrapolation, nu_bound)

F3 = GeneralizedKPP(3.0)
P = SolveParams()


def combustion_grid():
    return truncated_grid(30.0, 30.0, 300)


def test_nu_bound_values():
    assert nu_bound(0.75, 0.0, 1.0) == pytest.approx(16 / 3)
    # 2 s eps + 1/(2s(2s-1)) + (A2 + 1)/(2s - 1)
    assert nu_bound(0.8, 0.5, 1.0) == pytest.approx(0.8 + 1 / (1.6 * 0.6) + 2 / 0.6)
    with pytest.raises(DomainError):
        nu_bound(0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        nu_bound(0.75, -0.1, 1.0)


@settings(max_examples=30)
@given(st.floats(0.55, 0.99), st.floats(0.0, 2.0), st.floats(0.1, 5.0))
def test_nu_bound_monotone(s, eps, A2):
    assert nu_bound(s, eps + 0.1, A2) > nu_bound(s, eps, A2)
    assert nu_bound(s, eps, A2 + 0.1) > nu_bound(s, eps, A2)


def test_fit_extrapolation_synthetic():
    sig = np.array([0.1, 0.05, 0.025])
    mus = 2.0 - 0.5 * sig ** 0.7
    mu_star, c, q, resid = fit_extrapolation(sig, mus)
    assert mu_star == pytest.approx(2.0, abs=1e-8)
    assert q == pytest.approx(0.7, abs=1e-6)
    assert c == pytest.approx(0.5, rel=1e-6)
    assert resid < 1e-10


def test_fit_extrapolation_non_increasing_fallback():
    mu_star, _, q, _ = fit_extrapolation([0.1, 0.05, 0.025], [1.0, 1.2, 1.1])
    assert mu_star == 1.2 and np.isnan(q)


def test_combustion_speed_small():
    res = combustion_speed(CombustionCutoff(F3, 0.1), 0.5, combustion_grid(), P, 0.75)
    mu_c, prof = res
    assert 0 < mu_c < nu_bound(0.75, 0.5, 1.0)
    assert abs(prof.at(0.0) - 0.55) < 1e-8
    assert prof.check_invariants() == []
    assert res.identity_rel_err < 0.05


def test_combustion_speed_ordering_in_sigma():
    g = combustion_grid()
    mus = [combustion_speed(CombustionCutoff(F3, sig), 0.5, g, P, 0.75).mu_c
           for sig in (0.2, 0.1, 0.05)]
    assert np.all(np.diff(mus) > 0)


def test_combustion_speed_grows_with_reaction():
    g = combustion_grid()
    a = combustion_speed(CombustionCutoff(GeneralizedKPP(3.0, 1.0), 0.1), 0.5, g, P, 0.75).mu_c
    b = combustion_speed(CombustionCutoff(GeneralizedKPP(3.0, 2.0), 0.1), 0.5, g, P, 0.75).mu_c
    assert b > a


def test_combustion_bracket_error():
    with pytest.raises(BracketError) as exc:
        combustion_speed(CombustionCutoff(F3, 0.1), 0.5, combustion_grid(), P, 0.75,
                         mu_max=0.01)
    assert len(exc.value.table) >= 2


def test_combustion_requires_cutoff():
    with pytest.raises(DomainError):
        combustion_speed(F3, 0.5, combustion_grid(), P, 0.75)


def test_estimate_mu_star_small():
    est = estimate_mu_star(F3, 0.5, [0.2, 0.1, 0.05, 0.025], combustion_grid(), P, 0.75)
    assert est.ordering_ok
    assert np.all(np.diff(est.mu_values) > 0)
    assert est.extrapolated_mu_star >= est.mu_values[-1]
    assert est.bound_ok
    with pytest.raises(DomainError):
        estimate_mu_star(F3, 0.5, [0.1, 0.2, 0.05, 0.025], combustion_grid(), P, 0.75)


def small_front_grid():
    return truncated_grid(20.0, 20.0, 400)


def test_continuation_all_stages_fail_at_slow_speed():
    with pytest.raises(ContinuationError) as exc:
        epsilon_continuation_front(F3, 0.05, (1.0, 0.5), small_front_grid(), P, 0.8,
                                   diagnose=False)
    err = exc.value
    assert err.epsilon == 1.0 and err.mu == 0.05
    assert len(err.stages) == 2
    assert all(not st.normalized for st in err.stages)


def test_continuation_path_independence():
    g = small_front_grid()
    a = epsilon_continuation_front(F3, 12.0, (1.0, 0.5), g, P, 0.8, diagnose=False)
    b = epsilon_continuation_front(F3, 12.0, (0.5,), g, P, 0.8, diagnose=False)
    assert np.max(np.abs(a.values - b.values)) < 1e-6
    assert [st.epsilon for st in a.meta["stages"]] == [1.0, 0.5]
    assert abs(a.at(-1.0) - 0.5) < 1e-8


def test_continuation_rejects_bad_schedule():
    with pytest.raises(DomainError):
        epsilon_continuation_front(F3, 12.0, (0.5, 1.0), small_front_grid(), P, 0.8)


def test_continuation_warns_near_critical():
    with pytest.warns(RuntimeWarning):
        epsilon_continuation_front(F3, 12.0, (0.5,), small_front_grid(), P, 0.8,
                                   mu_star=12.0, diagnose=False)
