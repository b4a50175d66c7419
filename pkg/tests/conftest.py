from pathlib import Path

import pytest

from fofe_wsd.lm import LmConfig, train_lm
from fofe_wsd.fofe import FofeConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def toy_lines() -> list[str]:
    return (DATA_DIR / "toy_corpus.txt").read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def tiny_config() -> LmConfig:
    return LmConfig(
        fofe=FofeConfig(alpha=0.7, order=2),
        embed_dim=8,
        hidden_dims=(16,),
        max_vocab=60,
        epochs=3,
        seed=11,
    )


@pytest.fixture(scope="session")
def tiny_model(toy_lines, tiny_config):
    """A small trained model shared by tests that only need *some* trained net."""
    return train_lm(toy_lines[:25], tiny_config)
