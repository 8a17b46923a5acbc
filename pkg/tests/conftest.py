"""Shared fixtures: the animal format, its raw file, and its nested value."""

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# entries (str_len, species, age, weight): (3,cat,5,12) (3,dog,3,43) (6,turtle,10,5)
ANIMAL_RAW = bytes.fromhex("03636174050c0003646f67032b0006747572746c650a0500")

ANIMAL_NESTED = [
    {
        "animalA__Zentry": [
            {
                "animal_entryA__Zstr_len": 3,
                "animal_entryA__Zspecies": "cat",
                "animal_entryA__Zage": 5,
                "animal_entryA__Zweight": 12,
            },
            {
                "animal_entryA__Zstr_len": 3,
                "animal_entryA__Zspecies": "dog",
                "animal_entryA__Zage": 3,
                "animal_entryA__Zweight": 43,
            },
            {
                "animal_entryA__Zstr_len": 6,
                "animal_entryA__Zspecies": "turtle",
                "animal_entryA__Zage": 10,
                "animal_entryA__Zweight": 5,
            },
        ]
    }
]


@pytest.fixture(scope="session")
def animal_ksy_path() -> Path:
    return FIXTURES / "animal.ksy"


@pytest.fixture(scope="session")
def animal_ksy_text(animal_ksy_path) -> str:
    return animal_ksy_path.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def animal_raw_path() -> Path:
    return FIXTURES / "animal.raw"


@pytest.fixture(scope="session")
def animal_raw() -> bytes:
    return ANIMAL_RAW


@pytest.fixture(scope="session")
def animal_nested() -> list:
    return ANIMAL_NESTED
