import json
import re
from pathlib import Path

import numpy as np
import pytest

from pantryplan.distance import great_circle, GeoPoint

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA_DIR


def planar_matrix(rng: np.random.Generator, n: int, scale: float = 1000.0) -> np.ndarray:
    """Euclidean distance matrix of n random points in a scale x scale box."""
    pts = rng.uniform(0.0, scale, size=(n, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(d, 0.0)
    return d


def line_matrix(coords) -> np.ndarray:
    """Pairwise absolute differences of 1-D coordinates."""
    c = np.asarray(coords, dtype=np.float64)
    return np.abs(c[:, None] - c[None, :])


class MockTableTransport:
    """Offline table service whose metric is a scalable great-circle.

    Parses coordinates and source/destination indices straight out of the
    request URL, so any chunking must reassemble to the same matrix.
    """

    def __init__(self, scale: float = 1.0):
        self.scale = scale
        self.requests_seen = []

    def get(self, url: str):
        self.requests_seen.append(url)
        m = re.match(r".*/table/v1/driving/([^?]*)\?sources=([^&]*)&destinations=([^&]*)&annotations=distance", url)
        coords = [tuple(map(float, part.split(","))) for part in m.group(1).split(";")]
        src = [int(i) for i in m.group(2).split(";")]
        dst = [int(j) for j in m.group(3).split(";")]
        rows = []
        for i in src:
            a = GeoPoint(coords[i][1], coords[i][0])
            rows.append(
                [self.scale * great_circle(a, GeoPoint(coords[j][1], coords[j][0])) for j in dst]
            )
        return 200, {"code": "Ok", "distances": rows}


def load_table_fixtures() -> dict:
    with open(DATA_DIR / "table_fixtures.json", encoding="utf-8") as fh:
        return json.load(fh)
