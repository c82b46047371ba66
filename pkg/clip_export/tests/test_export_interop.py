"""End-to-end interop with the testing toolkit through its files and CLI.

The exporter is coupled to the toolkit only by the EMB1/EMT1 formats and the
`semtest` command line, so everything here goes through those interfaces.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from clip_export.cli import main as export_main

from exporthelpers import make_image, write_manifest

N_IMAGES = 20


def _report(name):
    print(f"PASS {name}")


def _semtest(args, cwd):
    exe = shutil.which("semtest")
    if exe is not None:
        cmd = [exe, *args]
    else:
        cmd = [sys.executable, "-c",
               "import sys; from semtest.cli import main; sys.exit(main(sys.argv[1:]))",
               *args]
    return subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    images = root / "images"
    images.mkdir()
    items = []
    for k in range(N_IMAGES):
        name = f"img{k:02d}.png"
        make_image(images / name, seed=100 + k)
        items.append({"id": f"img{k:02d}", "kind": "image",
                      "source_path": f"images/{name}"})
    items.append({"id": "prompt_null", "kind": "text",
                  "prompt_text": "This is a photo of a daisy"})
    items.append({"id": "prompt_alt", "kind": "text",
                  "prompt_text": "This is a photo of a"})
    manifest = write_manifest(root / "manifest.json", {
        "schema": "export-manifest-v1",
        "model_name": "seeded:interop-demo",
        "output_path": "emb.json",
        "items": items,
    })
    assert export_main(["--manifest", str(manifest),
                        "--dump-images", str(root / "tensors")]) == 0
    return root


class TestInterop:
    def test_table_parses_with_toolkit_reader(self, corpus):
        from semtest.tensorio import read_embeddings

        table = read_embeddings(corpus / "emb.json")
        assert len(table) == N_IMAGES + 2
        for emb in table.values():
            assert abs(float(np.linalg.norm(emb.v)) - 1.0) <= 1e-6

    def test_image_dump_parses_with_toolkit_reader(self, corpus):
        from semtest.tensorio import read_tensor

        pixels = read_tensor(corpus / "tensors" / "img00.emt")
        assert pixels.shape == (36, 48, 3)
        assert float(pixels.min()) >= 0.0 and float(pixels.max()) <= 1.0

    def test_exported_embeddings_run_end_to_end(self, corpus):
        for k in range(N_IMAGES):
            out = corpus / f"result{k:02d}.json"
            proc = _semtest([
                "test", "--emb", str(corpus / "emb.json"),
                "--image-id", f"img{k:02d}",
                "--q0-id", "prompt_null", "--q1-id", "prompt_alt",
                "--lambda", "5.0", "--out", str(out),
            ], cwd=corpus)
            assert proc.returncode == 0, proc.stderr
            doc = json.loads(out.read_text())
            assert doc["e_value"] > 0.0
            assert 0.0 <= doc["p_value"] <= 1.0
            assert doc["e_value"] == pytest.approx(
                float(np.exp(-doc["t"])), rel=1e-12)
        _report("exported embeddings drive 20-image, 2-prompt e-value runs")

    def test_reexport_is_byte_identical(self, corpus):
        first = (corpus / "emb.json").read_bytes()
        assert export_main(["--manifest", str(corpus / "manifest.json")]) == 0
        assert (corpus / "emb.json").read_bytes() == first
        _report("re-export writes a byte-identical embedding table")
