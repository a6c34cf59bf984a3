import numpy as np
import pytest

from hermetia.params import DEFAULT_PARAMETERS
from hermetia.scenarios import tg2_initial_state, tg2_model

_ACCEPTANCE: dict[int, list[tuple[str, str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE.setdefault(marker.args[0], []).append((item.name, rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        rows = _ACCEPTANCE[n]
        ok = all(outcome == "passed" for _, outcome, _ in rows)
        details = " | ".join(d for _, _, d in rows if d)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {details}")


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to an acceptance test."""

    def add(text: str) -> None:
        request.node.user_properties.append(("detail", text))
        print(text)

    return add


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMETERS


@pytest.fixture(scope="session")
def closed_model():
    return tg2_model()


@pytest.fixture(scope="session")
def partial_model():
    return tg2_model(kind="partial")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def d_nominal():
    from hermetia.thermo import h_sat

    return np.array([24.0, 0.5 * h_sat(24.0), 7.2e-4, 0.273])


@pytest.fixture(scope="session")
def x_closed(closed_model, d_nominal):
    return tg2_initial_state(closed_model, d_nominal)


@pytest.fixture(scope="session")
def x_partial(partial_model, d_nominal):
    return tg2_initial_state(partial_model, d_nominal)
