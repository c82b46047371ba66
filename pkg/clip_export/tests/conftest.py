import pytest

from exporthelpers import make_image, write_manifest


@pytest.fixture
def small_corpus(tmp_path):
    """One image and two prompts, manifest in tmp_path/manifest.json."""
    images = tmp_path / "images"
    images.mkdir()
    make_image(images / "img00.png", seed=0)
    doc = {
        "schema": "export-manifest-v1",
        "model_name": "seeded:demo-256",
        "output_path": "emb.json",
        "items": [
            {"id": "img00", "kind": "image", "source_path": "images/img00.png"},
            {"id": "q0", "kind": "text",
             "prompt_text": "This is a photo of a daisy"},
            {"id": "q1", "kind": "text",
             "prompt_text": "This is a photo of a"},
        ],
    }
    return write_manifest(tmp_path / "manifest.json", doc)
