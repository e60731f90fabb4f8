import pytest

from coopcache.model import FileLibrary, NetworkParams
from coopcache.popularity import ZipfParams, zipf_popularity
from oracles import ACCEPTANCE


@pytest.fixture
def net3():
    return NetworkParams.table2(K=3)


@pytest.fixture
def lib_table2():
    return FileLibrary(zipf_popularity(ZipfParams(1000, 1.0)), 1000, 1000)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
