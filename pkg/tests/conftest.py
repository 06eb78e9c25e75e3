import functools
import json
from contextlib import contextmanager
from pathlib import Path

import pytest

from svi_guard import CalibrationConfig, SviParams, calibrate, load_sample_smile

GOLDEN = Path(__file__).parent / "golden"

REFERENCE_FITS = {
    "slope_3_95": SviParams(a=-0.152555, b=2.073631, s=0.195700, rho=0.904871, m=0.729450),
    "slope_1_95": SviParams(a=-0.136299, b=1.072730, s=0.253555, rho=0.817793, m=0.673280),
    "slope_1_00": SviParams(a=-0.112306, b=0.596259, s=0.302274, rho=0.677123, m=0.590297),
}

_ACCEPTANCE: list[tuple[str, str, bool, str]] = []


@functools.lru_cache(maxsize=None)
def calibrated(cap: float, seed: int = 42):
    """Sample-smile calibration, shared across test modules (each fit takes seconds)."""
    return calibrate(load_sample_smile(), CalibrationConfig(slope_cap=cap, seed=seed))


@pytest.fixture(scope="session")
def sample_smile():
    return load_sample_smile()


@pytest.fixture(scope="session")
def golden_fits():
    return json.loads((GOLDEN / "reference_fits.json").read_text())["fits"]


class AcceptanceRecorder:
    @contextmanager
    def criterion(self, ident: str, title: str):
        detail: dict[str, str] = {}
        try:
            yield detail
        except BaseException:
            _ACCEPTANCE.append((ident, title, False, detail.get("observed", "")))
            print(f"[FAIL] criterion {ident}: {title}")
            raise
        _ACCEPTANCE.append((ident, title, True, detail.get("observed", "")))
        print(f"[PASS] criterion {ident}: {title} {detail.get('observed', '')}")


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ident, title, ok, observed in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {ident}: {title}"
        if observed:
            line += f"  ({observed})"
        terminalreporter.write_line(line)
