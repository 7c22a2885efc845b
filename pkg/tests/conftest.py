from __future__ import annotations

import pytest

from hedgepath.dataio import data_path, read_blacklist, read_records
from hedgepath.pathway import load_dictionary


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary(
        data_path("dx_pathway.csv"),
        data_path("synonyms.csv"),
        data_path("location_classes.csv"),
    )


@pytest.fixture(scope="session")
def blacklist():
    return read_blacklist(data_path("blacklist.csv"))


@pytest.fixture(scope="session")
def fixture_records():
    return read_records(data_path("samples/dataset.csv"))
