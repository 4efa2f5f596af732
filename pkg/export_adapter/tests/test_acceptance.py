"""Release gate for the export adapter, as a single end-to-end test:
the produced file must pass the consuming toolkit's own `inspect`
validation, and on a 10-sample batch the matched image-caption pairs
must score a higher mean cosine than the mismatched cross pairs."""

import json
import struct
import subprocess
import sys

import numpy as np

from embexport import main

from test_export import PALETTE, make_corpus, read_embp


def test_export_passes_downstream_inspection_and_pairs_align(tmp_path):
    colors = list(PALETTE)  # 10 distinct colors
    assert len(colors) == 10
    image_dir, manifest = make_corpus(tmp_path, colors)
    out = tmp_path / "export.embp"
    assert main(
        ["export", "--model", "toy:16", "--images", str(image_dir),
         "--captions", str(manifest), "--out", str(out)]
    ) == 0

    # The consumer's own validator accepts the file.
    result = subprocess.run(
        [sys.executable, "-m", "embedfuse", "inspect", "--in", str(out)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    info = json.loads(result.stdout)
    assert info["count"] == 10
    assert info["dim_img"] == info["dim_txt"] == 16
    assert (info["id_min"], info["id_max"]) == (0, 9)

    # Matched pairs vs mismatched pairs, directly from the file bytes.
    ids, images, texts = read_embp(out)
    img64 = images.astype(np.float64)
    txt64 = texts.astype(np.float64)
    img64 /= np.linalg.norm(img64, axis=1, keepdims=True)
    txt64 /= np.linalg.norm(txt64, axis=1, keepdims=True)
    grid = img64 @ txt64.T
    matched = float(np.mean(np.diag(grid)))
    off_diagonal = grid[~np.eye(10, dtype=bool)]
    mismatched = float(np.mean(off_diagonal))
    print(f"matched mean cosine {matched:.4f}, mismatched {mismatched:.4f}")
    assert matched > mismatched

    # sanity that the header really is the shared byte layout
    magic, version, dim_img, dim_txt, count = struct.unpack(
        "<4sHIIQ", out.read_bytes()[:22]
    )
    assert (magic, version, dim_img, dim_txt, count) == (b"EMBP", 1, 16, 16, 10)
