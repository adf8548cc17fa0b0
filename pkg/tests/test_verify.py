import pytest

from hittingdim import verify
from hittingdim.correlation import Observable


@pytest.fixture(scope="module")
def results():
    return {c.name: c for c in verify.run_all()}


def test_every_check_passes(results):
    failed = [f"{c.name}: {c.detail}" for c in results.values() if not c.passed]
    assert not failed


def test_definition_checks_are_present(results):
    for name in verify.DEFINITION_CHECKS:
        assert name in results


def test_broken_observable_is_caught(monkeypatch):
    # claim half the true slope: the ramp then violates the advertised bound
    real = Observable.lipschitz_constant
    monkeypatch.setattr(Observable, "lipschitz_constant",
                        property(lambda self: 0.5 * real.fget(self)))
    assert not verify.check_bump_lipschitz(pairs=10**4).passed


def test_broken_hitting_time_is_caught(monkeypatch):
    real = verify.hitting_time

    def off_by_one(sys, x, x0, r, n_max):
        rec = real(sys, x, x0, r, n_max)
        if rec.tau is not None and rec.tau > 3:
            object.__setattr__(rec, "tau", rec.tau + 1)
        return rec

    monkeypatch.setattr(verify, "hitting_time", off_by_one)
    assert not verify.check_censoring().passed


def test_crash_becomes_a_failed_check(monkeypatch):
    def boom():
        raise RuntimeError("boom")

    monkeypatch.setattr(verify, "CHECKS", [boom])
    (check,) = verify.run_all()
    assert not check.passed and "RuntimeError" in check.detail
