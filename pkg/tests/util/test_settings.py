import pytest

from gpe_multigrid.util import settings


@pytest.mark.parametrize(("raw", "expected"), [("4", 4), ("0", 1), ("-3", 1), ("many", 1)])
def test_num_threads(monkeypatch, raw, expected):
    monkeypatch.setenv("NUM_THREADS", raw)
    assert settings.num_threads() == expected


def test_defaults():
    assert settings.num_threads() == 1
    assert settings.check_identities() is False
    assert settings.log_level() == "INFO"


def test_switches_are_read_at_call_time(monkeypatch):
    monkeypatch.setenv("GPE_CHECK_IDENTITIES", "1")
    monkeypatch.setenv("GPE_LOG_LEVEL", "debug")
    assert settings.check_identities() is True
    assert settings.log_level() == "DEBUG"
    monkeypatch.setenv("GPE_CHECK_IDENTITIES", "yes")
    assert settings.check_identities() is False
