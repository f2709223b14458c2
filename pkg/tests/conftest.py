import importlib

import numpy as np
import pytest

from nsi_ibp import _kernels_py, em, kernels


def _backends():
    out = ["python"]
    try:
        importlib.import_module("nsi_ibp._kernels")
        out.append("cython")
    except ImportError:
        pass
    return out


@pytest.fixture(params=_backends())
def kernel_backend(request, monkeypatch):
    """Run a test once per available inner-kernel backend."""
    if request.param == "python":
        monkeypatch.setattr(em.kernels, "inner_pieces", _kernels_py.inner_pieces)
    else:
        mod = importlib.import_module("nsi_ibp._kernels")
        monkeypatch.setattr(em.kernels, "inner_pieces", mod.inner_pieces)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_report_header(config):
    return f"nsi_ibp kernel backend: {kernels.BACKEND}"


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
