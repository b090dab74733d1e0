import numpy as np
import pytest

from dcqec.lattice import PauliFrame, ToricLattice


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frame(rng, lat: ToricLattice, p: float = 0.5) -> PauliFrame:
    codes = np.where(rng.random(lat.n_qubits) < p, rng.integers(1, 4, lat.n_qubits), 0)
    return PauliFrame.from_codes(codes)


def z_string_row(lat: ToricLattice, row: int = 0) -> PauliFrame:
    z = np.zeros(lat.n_qubits, np.uint8)
    z[[lat.edge_index(0, row, c) for c in range(lat.L)]] = 1
    return PauliFrame(np.zeros(lat.n_qubits, np.uint8), z)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(".:"))):
            terminalreporter.write_line(line)
