import sys

import numpy as np
import pytest

from dvpadmm.dataset import CONTINUOUS_COLUMNS, NSLKDD_COLUMNS

PROTOCOLS = ("tcp", "udp", "icmp")
SERVICES = ("http", "ftp", "smtp", "private")
FLAGS = ("SF", "S0", "REJ")
LABELS = ("normal", "neptune", "smurf", "normal", "satan")


def kdd_row(rng, label=None, protocol=None, difficulty=True):
    """One comma-separated record in NSL-KDD layout."""
    fields = []
    for col in NSLKDD_COLUMNS:
        if col == "protocol_type":
            fields.append(protocol or PROTOCOLS[rng.integers(3)])
        elif col == "service":
            fields.append(SERVICES[rng.integers(4)])
        elif col == "flag":
            fields.append(FLAGS[rng.integers(3)])
        elif col == "num_outbound_cmds":
            fields.append("0")  # constant in the real data too
        else:
            fields.append(repr(float(rng.integers(0, 1000)) / 10))
    fields.append(label or LABELS[rng.integers(len(LABELS))])
    if difficulty:
        fields.append(str(rng.integers(1, 22)))
    return ",".join(fields)


@pytest.fixture
def kdd_file(tmp_path):
    def make(n=60, seed=0, name="kdd.txt", **kw):
        rng = np.random.default_rng(seed)
        path = tmp_path / name
        path.write_text("\n".join(kdd_row(rng, **kw) for _ in range(n)) + "\n")
        return path
    return make


assert len(CONTINUOUS_COLUMNS) == 38


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
