import numpy as np
import pytest

from psqoct import spdc

_ACCEPTANCE: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, summary): acceptance criterion covered by the test")


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        number, summary = mark.args
        _ACCEPTANCE[item.nodeid] = {"number": number, "summary": summary, "outcome": "not run", "measured": []}


def pytest_runtest_logreport(report):
    entry = _ACCEPTANCE.get(report.nodeid)
    if entry is None:
        return
    if report.when == "call" or report.outcome != "passed":
        entry["outcome"] = report.outcome
    entry["measured"] = [value for key, value in report.user_properties if key == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    by_number: dict[int, list[dict]] = {}
    for entry in _ACCEPTANCE.values():
        by_number.setdefault(entry["number"], []).append(entry)
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        entries = by_number[number]
        outcomes = {e["outcome"] for e in entries}
        status = "FAIL" if "failed" in outcomes else "PASS" if outcomes == {"passed"} else "INCOMPLETE"
        terminalreporter.write_line(f"[{status}] criterion {number}: {entries[0]['summary']}")
        for e in entries:
            for line in e["measured"]:
                terminalreporter.write_line(f"         {line}")


@pytest.fixture
def measured(request):
    """Record a measured value for the acceptance summary."""

    def record(text):
        request.node.user_properties.append(("measured", text))

    return record


@pytest.fixture(scope="session")
def bbo_source():
    return spdc.with_solved_cut_angle(spdc.TwinPhotonSource(400e-9, 1.5e-3))


@pytest.fixture(scope="session")
def bbo_spectrum(bbo_source):
    return spdc.spectrum(bbo_source).normalized()


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


class PresetRun:
    """A preset's model pieces plus its simulated interferogram."""

    def __init__(self, name):
        from psqoct import interferometer, io, presets

        self.config = presets.preset(name)
        self.source = io.source_from_dict(self.config.source)
        self.spectrum = self.source.spectrum
        self.sample = io.sample_from_dict(self.config.sample, self.spectrum.omega0)
        self.bs = self.config.splitter()
        self.positions = self.config.positions()
        self.model = interferometer.CoincidenceModel(self.sample, self.spectrum)
        self.interferogram = interferometer.simulate(self.sample, self.spectrum, self.bs, self.positions)


_PRESET_RUNS: dict[str, PresetRun] = {}


@pytest.fixture(scope="session")
def preset_run():
    def get(name):
        if name not in _PRESET_RUNS:
            _PRESET_RUNS[name] = PresetRun(name)
        return _PRESET_RUNS[name]

    return get
