import pytest

from rnn_codec import TrainConfig, synthetic_plane, train

# desk-scale reference run shared across the suite; must stay within the
# 50-epoch budget of the training-sanity criterion
TRAIN_CFG = TrainConfig(epochs=30, iterations=8, seed=7)


@pytest.fixture(scope="session")
def train_planes():
    return [synthetic_plane(100 + k) for k in range(6)]


@pytest.fixture(scope="session")
def heldout_planes():
    return [synthetic_plane(900 + k) for k in range(3)]


@pytest.fixture(scope="session")
def trained(train_planes):
    """(model, history) of the desk-scale reference run."""
    return train(train_planes, TRAIN_CFG)
