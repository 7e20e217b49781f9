import numpy as np
import pytest
import torch

from reface3d.nifti import make_image

# acceptance criteria results: (number, description, passed, detail)
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def _record(number: int, description: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS.append((number, description, passed, detail))

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{status} criterion {number}: {description}{suffix}")


@pytest.fixture(scope="session", autouse=True)
def _pinned_threads():
    # keep torch reductions reproducible across the whole run
    torch.set_num_threads(2)


def head_phantom(n: int = 32, defaced: bool = False):
    """Ball of tissue (intensity ~800) in air; optionally a zeroed face octant."""
    x, y, z = np.meshgrid(*[np.arange(n)] * 3, indexing="ij")
    c = n / 2.0
    dist = np.sqrt((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2)
    vol = np.where(dist < 0.38 * n, 800.0 + 5.0 * z + 3.0 * x, 0.0).astype(np.float32)
    if defaced:
        vol[int(c) :, int(c) :, :] = 0.0
    return make_image(vol)


@pytest.fixture
def phantom():
    return head_phantom(32, defaced=False)


@pytest.fixture
def defaced_phantom():
    return head_phantom(32, defaced=True)
