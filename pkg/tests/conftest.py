import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))
torch.set_num_threads(1)


@pytest.fixture(scope="session")
def small_corpus():
    from gnp import synthgen

    return synthgen.generate(synthgen.ScenarioSpec(vehicle_count=60, seed=3))


@pytest.fixture(scope="session")
def small_windows(small_corpus):
    from gnp import trajdata

    windows = trajdata.make_windows(small_corpus.dataset, 30, 50, 80)
    return [trajdata.normalize(w)[0] for w in windows]
