import numpy as np
import pytest

import betapref.beta
from betapref import cli, verify


def test_all_checks_pass():
    results = verify.run_checks(0)
    assert [r.name for r in results] == list(verify.CHECKS)
    failed = [(r.name, r.detail) for r in results if not r.passed]
    assert not failed


def test_cli_verify_exit_zero_and_read_only(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["verify", "--seed", "1"]) == cli.EXIT_OK
    assert list(tmp_path.iterdir()) == []
    assert "FAIL" not in capsys.readouterr().out


def test_report_written_only_on_request(tmp_path):
    report = tmp_path / "verify.json"
    assert cli.main(["verify", "--seed", "2", "--report", str(report)]) == cli.EXIT_OK
    assert report.exists() and list(tmp_path.iterdir()) == [report]


def test_kl_sign_mutation_is_caught(monkeypatch, capsys):
    original = betapref.beta.kl_beta
    monkeypatch.setattr(betapref.beta, "kl_beta", lambda q, p: -original(q, p))
    status = cli.main(["verify", "--seed", "0"])
    captured = capsys.readouterr()
    assert status == cli.EXIT_INVARIANT
    assert "FAIL kl_agreement" in captured.out
    assert "kl_agreement" in captured.err


def test_check_exceptions_become_failures(monkeypatch):
    def broken(rng):
        raise RuntimeError("boom")

    monkeypatch.setitem(verify.CHECKS, "kl_agreement", broken)
    (res,) = verify.run_checks(0, ["kl_agreement"])
    assert not res.passed and "boom" in res.detail


def test_central_difference_is_fourth_order():
    # Exact for quartics up to rounding.
    f = lambda x: x**4 - 3 * x**3
    assert verify.central_difference(f, 1.3, 1e-2) == pytest.approx(4 * 1.3**3 - 9 * 1.3**2, rel=1e-10)
    assert verify.within(1.0 + 1e-6, 1.0, 1e-5, 0.0)
    assert not verify.within(1e-7, 0.0, 1e-5, 1e-8)
