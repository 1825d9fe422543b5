import pytest

from frozen_er.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, full=True)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
