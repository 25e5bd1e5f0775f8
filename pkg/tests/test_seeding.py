import numpy as np
import pytest

from app.core.exceptions import SpecError
from app.core.seeding import SeedStreams


def test_streams_are_reproducible():
    a = SeedStreams(7).generator("bootstrap", 3).integers(0, 1 << 30, 10)
    b = SeedStreams(7).generator("bootstrap", 3).integers(0, 1 << 30, 10)
    np.testing.assert_array_equal(a, b)


def test_streams_differ_by_label_index_and_seed():
    draws = {
        key: SeedStreams(seed).generator(label, index).random(4).tolist()
        for key, (seed, label, index) in {
            "base": (7, "bootstrap", 0),
            "index": (7, "bootstrap", 1),
            "label": (7, "cv", 0),
            "seed": (8, "bootstrap", 0),
        }.items()
    }
    assert len({tuple(v) for v in draws.values()}) == 4


def test_generators_list():
    gens = SeedStreams(1).generators("cv", 3)
    assert len(gens) == 3
    assert gens[2].random() == SeedStreams(1).generator("cv", 2).random()


@pytest.mark.parametrize("seed", [-1, 1 << 64])
def test_seed_range(seed):
    with pytest.raises(SpecError):
        SeedStreams(seed)


def test_largest_seed_is_accepted():
    assert SeedStreams((1 << 64) - 1).seed_for("simulate") > 0
