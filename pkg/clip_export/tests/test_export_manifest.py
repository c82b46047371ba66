"""Manifest parsing and validation."""

import json

import pytest

from clip_export import IdCollisionError, ManifestError, load_manifest
from clip_export.manifest import ExportManifest, ManifestItem

from exporthelpers import write_manifest


def _doc(**overrides):
    doc = {
        "schema": "export-manifest-v1",
        "model_name": "seeded:demo-256",
        "output_path": "emb.json",
        "items": [
            {"id": "a", "kind": "image", "source_path": "a.png"},
            {"id": "b", "kind": "text", "prompt_text": "a prompt"},
        ],
    }
    doc.update(overrides)
    return doc


class TestLoadManifest:
    def test_round_trip(self, tmp_path):
        path = write_manifest(tmp_path / "m.json", _doc(model_hash="ab" * 32))
        m = load_manifest(path)
        assert m.model_name == "seeded:demo-256"
        assert m.model_hash == "ab" * 32
        assert m.output_path == "emb.json"
        assert [i.id for i in m.items] == ["a", "b"]
        assert m.items[0].kind == "image"
        assert m.items[1].prompt_text == "a prompt"

    def test_sources_resolve_relative_to_manifest(self, tmp_path):
        sub = tmp_path / "nested"
        sub.mkdir()
        m = load_manifest(write_manifest(sub / "m.json", _doc()))
        assert m.resolve_source(m.items[0]) == sub / "a.png"

    def test_duplicate_id_rejected(self, tmp_path):
        items = [
            {"id": "a", "kind": "text", "prompt_text": "x"},
            {"id": "a", "kind": "text", "prompt_text": "y"},
        ]
        with pytest.raises(IdCollisionError):
            load_manifest(write_manifest(tmp_path / "m.json", _doc(items=items)))

    @pytest.mark.parametrize("item", [
        {"id": "a", "kind": "text", "prompt_text": ""},
        {"id": "a", "kind": "text"},
        {"id": "a", "kind": "image"},
        {"id": "a", "kind": "image", "source_path": "a.png", "prompt_text": "x"},
        {"id": "a", "kind": "text", "prompt_text": "x", "source_path": "a.png"},
        {"id": "a", "kind": "audio", "source_path": "a.wav"},
        {"id": "", "kind": "text", "prompt_text": "x"},
        {"id": "a", "kind": "text", "prompt_text": "x", "extra": 1},
    ])
    def test_bad_items_rejected(self, tmp_path, item):
        with pytest.raises(ManifestError):
            load_manifest(write_manifest(tmp_path / "m.json", _doc(items=[item])))

    @pytest.mark.parametrize("overrides", [
        {"schema": "export-manifest-v2"},
        {"model_name": ""},
        {"items": []},
        {"items": "nope"},
        {"surprise": True},
    ])
    def test_bad_documents_rejected(self, tmp_path, overrides):
        with pytest.raises(ManifestError):
            load_manifest(write_manifest(tmp_path / "m.json", _doc(**overrides)))

    def test_non_json_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("not json at all")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_json_array_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps([1, 2]))
        with pytest.raises(ManifestError):
            load_manifest(path)


class TestDirectConstruction:
    def test_item_validation_runs_without_a_file(self):
        with pytest.raises(ManifestError):
            ManifestItem(id="a", kind="text", prompt_text=None)

    def test_manifest_requires_items(self):
        with pytest.raises(ManifestError):
            ExportManifest(items=(), model_name="seeded:demo-256")
