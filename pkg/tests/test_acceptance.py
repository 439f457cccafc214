"""Acceptance criteria 1 to 10, one pass/fail line each."""

import pytest

from rp4bp import acceptance, cli


def _report(capsys, line):
    with capsys.disabled():
        print("\n" + line)


@pytest.mark.parametrize("check", acceptance.CHECKS,
                         ids=[f"criterion_{i}" for i in range(1, len(acceptance.CHECKS) + 1)])
def test_criterion(check, capsys):
    result = check()
    _report(capsys, result.line())
    assert result.passed, result.summary


def test_criterion_10_verify_exits_zero(tmp_path, capsys):
    code = cli.main(["verify", "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    passed = code == cli.EXIT_OK and out.count("[PASS]") == 9
    _report(capsys, f"[{'PASS' if passed else 'FAIL'}] criterion 10: verify aggregates "
                    f"1-9, exit code {code}")
    assert passed, out
