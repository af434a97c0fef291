import pytest

from taskguide.model import load_spec


def rice_spec_document() -> dict:
    return {
        "spec_id": "cook-rice",
        "title": "Cook rice",
        "items": [
            {
                "index": 0,
                "text": "Wash the rice in cold water",
                "frame": {
                    "Action": ["wash"],
                    "Receiver": ["the rice"],
                    "Location": ["in cold water"],
                },
                "actions": [
                    {
                        "index": 0,
                        "text": "rinse rice until water runs clear",
                        "frame": {"Action": ["rinse"], "Receiver": ["rice"]},
                        "optional": False,
                    }
                ],
            },
            {
                "index": 1,
                "text": "Boil the rice in the pot",
                "frame": {"Action": ["boil"], "Receiver": ["the rice"]},
                "actions": [],
            },
            {
                "index": 2,
                "text": "Serve the rice on a plate",
                "frame": {"Action": ["serve"], "Receiver": ["the rice"]},
                "actions": [],
            },
        ],
    }


@pytest.fixture
def spec_document() -> dict:
    return rice_spec_document()


@pytest.fixture
def spec(spec_document):
    return load_spec(spec_document)
