import numpy as np
import pytest

from deepris.scenario import build_environment, read_sections

# Small enclosure so unit tests run in milliseconds.
TINY = """
[scenario]
schema_version = 1
name = tiny

[band]
f_min = 0.9
f_max = 1.1
bins = 6

[enclosure]
vertices = 0 0; 2 0; 2 1.5; 0 1.5
spacing = 0.25
resonance = 10.0
linewidth = 0.05
coupling = 50.0

[tx]
position = 0.4 0.4
resonance = 1.0
linewidth = 0.5
coupling = 0.5

[rx]
position = 1.6 1.1
resonance = 1.0
linewidth = 0.5
coupling = 0.5

[ris]
start = 0.5 0.15
step = 0.2 0.0
count = 4
resonance_off = 0.6
resonance_on = 1.0
linewidth = 0.1
coupling = 0.5

[perturber]
pivot = 1.0 0.9
offsets = 0 0; 0.12 0; -0.12 0
resonance = 10.0
linewidth = 0.05
coupling = 50.0
"""


@pytest.fixture(scope="session")
def tiny_text():
    return TINY


@pytest.fixture(scope="session")
def tiny_env():
    return build_environment(read_sections(TINY, is_text=True))


@pytest.fixture(scope="session")
def tiny_scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scen") / "tiny.ini"
    path.write_text(TINY)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
