import numpy as np
import pytest

from kahlerflow.radial import ClassData, make_fubini_study, make_perturbed

# modes used for generic "random" radial metrics throughout the suite
GENERIC_MODES = [(1, 0.7), (2, -0.4), (3, 0.2)]


def random_modes(rng, count=3):
    return [(m + 1, float(c)) for m, c in enumerate(rng.uniform(-1.0, 1.0, count))]


@pytest.fixture(params=[1, 2, 3], ids=lambda n: f"n{n}")
def n(request):
    return request.param


@pytest.fixture
def fs(n):
    return make_fubini_study(ClassData(n), 128)


@pytest.fixture
def perturbed(n):
    return make_perturbed(ClassData(n), 128, 0.05, GENERIC_MODES)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary ----------------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """``log(number, label, ok, detail)`` records one sub-check of a criterion."""

    def log(number, label, ok, detail=""):
        _ACCEPTANCE.setdefault(number, []).append((label, bool(ok), detail))
        print(f"criterion {number:2d} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[number]
        failed = [f"{label}: {detail}" for label, ok, detail in checks if not ok]
        status = "FAIL" if failed else "PASS"
        note = "; ".join(failed) if failed else f"{len(checks)} checks"
        terminalreporter.write_line(f"criterion {number:2d}: {status} ({note})")
