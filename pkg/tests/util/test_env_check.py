import pytest

from gpe_multigrid.util import env_check
from gpe_multigrid.util.env_check import check_output_dir, startup_info


def test_check_output_dir_bad_access(monkeypatch, tmp_path):
    monkeypatch.setattr("os.access", lambda _path, _mode: False)
    with pytest.raises(SystemExit, match="1") as exc_info:
        check_output_dir(tmp_path)
    assert exc_info.value.code == 1


def test_check_output_dir_good_access(monkeypatch, tmp_path):
    monkeypatch.setattr("os.access", lambda _path, _mode: True)
    # Should not raise any exception
    check_output_dir(tmp_path)


def test_check_output_dir_creates_directory(monkeypatch, tmp_path):
    out_dir = tmp_path / "runs" / "gpe_multigrid_test_out"
    monkeypatch.setattr("os.access", lambda _path, _mode: True)

    assert not out_dir.exists()
    check_output_dir(str(out_dir))
    assert out_dir.is_dir()


def test_startup_info_checks_the_output_dir(mocker, monkeypatch, tmp_path):
    """
    Tests that the startup banner reports the runtime switches and validates the output directory.
    """
    monkeypatch.setenv("GPE_CHECK_IDENTITIES", "1")
    log_group = mocker.patch.object(env_check.gpe_logger, "log_group")
    warning = mocker.patch.object(env_check.gpe_logger, "warning")
    check = mocker.spy(env_check, "check_output_dir")

    startup_info("solve", tmp_path)

    title, lines = log_group.call_args.args
    assert title == "Starting gpe_multigrid solve"
    assert any("Identity checks: Enabled" in line for line in lines)
    warning.assert_called_once()
    check.assert_called_once_with(tmp_path)
