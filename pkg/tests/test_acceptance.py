"""Every acceptance criterion at its full tolerance, one printed line each."""
import pytest

from robust_mud.validation import CHECKS, run_check


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=lambda c: c.__name__.removeprefix("check_"))
def test_acceptance(check, record_property):
    res = run_check(check, "full")
    print(res.line())
    record_property("acceptance", res.line())
    assert res.passed, res.line()
