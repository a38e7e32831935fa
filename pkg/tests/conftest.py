"""Shared fixtures: one trained toy-artifact set per test session.

Training the small recurrent model and the consistency head from the
bundled corpus takes about two minutes; every module that needs real
artifacts shares the same session-scoped build.  Modules that exercise
pure functions construct their own tiny parameter sets instead and never
trigger the build.
"""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "fixtures"))

import fixturelib  # noqa: E402  (path set up just above)

from kinject.config import PipelineConfig, load_config  # noqa: E402
from kinject.dialog import DialogHistory, read_dialog_file  # noqa: E402
from kinject.pipeline import Runner  # noqa: E402

# criterion number -> (label, outcome), filled by the report hook below
# and printed as one line per criterion at the end of the run.
_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, label = marker.args
    if report.when == "call":
        _CRITERIA[num] = (label, "PASS" if report.passed else "FAIL")
    elif report.when == "setup" and not report.passed:
        _CRITERIA[num] = (label, "SKIP" if report.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        label, status = _CRITERIA[num]
        terminalreporter.write_line(f"CRITERION {num:2d} {label}: {status}")


@pytest.fixture(scope="session")
def built_artifacts(tmp_path_factory) -> fixturelib.BuildResult:
    out = tmp_path_factory.mktemp("artifacts")
    result = fixturelib.build_artifacts(out)
    fixturelib.write_fixture_config(out / "fixture.cfg", result)
    return result


@pytest.fixture(scope="session")
def fixture_cfg_path(built_artifacts) -> Path:
    return Path(built_artifacts.vocab_path).parent / "fixture.cfg"


@pytest.fixture(scope="session")
def pipeline_cfg(fixture_cfg_path) -> PipelineConfig:
    cfg = load_config(str(fixture_cfg_path))
    cfg.validate()
    return cfg


@pytest.fixture(scope="session")
def runner(pipeline_cfg) -> Runner:
    return Runner(pipeline_cfg)


@pytest.fixture(scope="session")
def eval_histories() -> list[DialogHistory]:
    histories, errors = read_dialog_file(str(fixturelib.EVAL_DIALOGS))
    assert not errors
    return histories


@pytest.fixture(scope="session")
def corpus_histories() -> list[DialogHistory]:
    """Histories cut from the training dialogs: every prefix ending on a
    user turn, capped at 50."""
    dialogs, errors = read_dialog_file(str(fixturelib.DIALOGS))
    assert not errors
    out: list[DialogHistory] = []
    for dialog in dialogs:
        for end in range(1, len(dialog.turns) + 1, 2):
            out.append(DialogHistory(turns=dialog.turns[:end]))
            if len(out) >= 50:
                return out
    return out
