import json
from pathlib import Path

import pytest

from nyonscope.forge import emit_image, emit_tree, forge_case

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def default_image(tmp_path_factory):
    """One default-scale gen-2 image with a single decoy keyfile."""
    out = tmp_path_factory.mktemp("img")
    manifest = emit_image(forge_case(7, "gen2"), out, decoys=1)
    return out, manifest


@pytest.fixture(scope="session")
def full_image(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    manifest = emit_image(forge_case(3, "gen2"), out, scale="full", decoys=0)
    return out, manifest


@pytest.fixture
def gen1_tree(tmp_path):
    case = forge_case(1, "gen1")
    root, manifest = emit_tree(case, tmp_path / "tree")
    return case, root, manifest


@pytest.fixture
def gen2_tree(tmp_path):
    case = forge_case(1, "gen2")
    root, manifest = emit_tree(case, tmp_path / "tree")
    return case, root, manifest


def load_data(name):
    return (DATA / name).read_bytes()


def read_json(path):
    return json.loads(Path(path).read_text())
