import pathlib

import pytest

DATA_DIR = pathlib.Path(__file__).resolve().parents[1] / "src" / "fareopt" / "data"


@pytest.fixture(scope="session")
def casestudy_path() -> pathlib.Path:
    return DATA_DIR / "casestudy.json"


@pytest.fixture(scope="session")
def population_pre_path() -> pathlib.Path:
    return DATA_DIR / "population_pre.json"


@pytest.fixture(scope="session")
def population_post_path() -> pathlib.Path:
    return DATA_DIR / "population_post.json"
