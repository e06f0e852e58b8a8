from __future__ import annotations

import pytest

from stackparse.config import RunConfig


@pytest.fixture
def tiny_cfg() -> RunConfig:
    """Small, dropout-free settings for fast deterministic training tests."""
    return RunConfig.desk_scale().updated({
        "epochs": "12", "hidden": "12", "layers": "1", "word_dim": "8",
        "char_dim": "6", "att_dim": "6", "dropout": "0.0",
        "parser_word_dim": "8", "tag_dim": "6", "parser_hidden": "12",
        "parser_layers": "1", "d_arc": "10", "d_rel": "6",
        "parser_dropout": "0.0", "stack_hidden": "14", "stack_layers": "1",
    })
