import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_mtx(path, header, size, lines):
    text = f"%%MatrixMarket matrix coordinate {header}\n% fixture\n{size}\n" + "\n".join(lines) + "\n"
    path.write_text(text)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
