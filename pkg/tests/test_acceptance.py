"""Reproduction checks, one test per acceptance criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (outside pytest's
capture, so it shows up in plain ``pytest -v`` output) and fails with the
full sub-check report when the criterion is not met. Tolerances are pinned
in :mod:`exciton_transport.validation`; nothing here loosens them.
"""

import pytest

from exciton_transport import validation


@pytest.mark.slow
@pytest.mark.parametrize("func", validation.CRITERIA, ids=lambda f: f.__name__.removeprefix("criterion_"))
def test_criterion(func, capsys):
    res = func()
    with capsys.disabled():
        print(f"\n{res.line()}")
        for label, ok, detail in res.checks:
            if not ok:
                print(f"    BAD {label}: {detail}")
    assert res.passed, res.report()
