import pytest

from ilcbox import load_page_blocks, load_wbc, project_all, wbc_default_spec


@pytest.fixture(scope="session")
def wbc():
    return load_wbc()


@pytest.fixture(scope="session")
def pbc():
    return load_page_blocks()


@pytest.fixture(scope="session")
def wbc_partial_polylines(wbc):
    return project_all(wbc, wbc_default_spec("ilc2_partial_dynamic"))
