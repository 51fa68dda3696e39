"""Acceptance gate: every criterion runs at its stated tolerance and prints one
pass/fail line; the suite fails if any criterion fails."""

import pytest

from fracfilt import acceptance


@pytest.mark.parametrize("criterion", acceptance.ALL_CRITERIA,
                         ids=[fn.__name__ for fn in acceptance.ALL_CRITERIA])
def test_criterion(criterion):
    result = criterion()
    print(result.line())
    assert result.passed, result.line()
