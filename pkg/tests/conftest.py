import pathlib

import numpy as np
import pytest

import dtameta as dm

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"
COVID_CSV = DATA_DIR / "covid_chest_ct.csv"


@pytest.fixture(scope="session")
def covid_raw() -> bytes:
    return COVID_CSV.read_bytes()


@pytest.fixture(scope="session")
def covid_table(covid_raw):
    table, _ = dm.parse_dataset(covid_raw)
    return table


@pytest.fixture(scope="session")
def covid_sample(covid_table):
    return dm.prepare_sample(covid_table)


@pytest.fixture(scope="session")
def covid_ml_fit(covid_sample):
    return dm.fit_reitsma(covid_sample, method="ml")


@pytest.fixture(scope="session")
def toy_table():
    return dm.StudyTable(
        studies=(
            dm.StudyRecord(id="a", tp=10, fp=2, fn=3, tn=40),
            dm.StudyRecord(id="b", tp=22, fp=5, fn=8, tn=51),
            dm.StudyRecord(id="c", tp=47, fp=9, fn=16, tn=104),
            dm.StudyRecord(id="d", tp=31, fp=12, fn=6, tn=49),
            dm.StudyRecord(id="e", tp=9, fp=3, fn=2, tn=17),
        )
    )


@pytest.fixture(scope="session")
def toy_sample(toy_table):
    return dm.prepare_sample(toy_table)


def random_table(rng: np.random.Generator, m: int = 12) -> dm.StudyTable:
    """Binomial tables with moderate accuracy, no empty arms."""
    records = []
    for i in range(m):
        n1 = int(rng.integers(20, 200))
        n0 = int(rng.integers(20, 200))
        tp = int(rng.binomial(n1, rng.uniform(0.6, 0.95)))
        tn = int(rng.binomial(n0, rng.uniform(0.6, 0.95)))
        records.append(
            dm.StudyRecord(id=f"r{i}", tp=tp, fp=n0 - tn, fn=n1 - tp, tn=tn)
        )
    return dm.StudyTable(studies=tuple(records))
