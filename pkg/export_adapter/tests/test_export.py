"""Unit tests for the export adapter: manifest parsing, file layout,
error handling, and the toy encoder's behavior."""

import struct

import numpy as np
import pytest
from PIL import Image

from embexport import ToyColorEncoder, main, read_manifest, resolve_encoder

HEADER = struct.Struct("<4sHIIQ")

PALETTE = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "orange": (255, 128, 0),
    "purple": (128, 0, 128),
}


def make_corpus(tmp_path, colors, size=(24, 24)):
    image_dir = tmp_path / "images"
    image_dir.mkdir(exist_ok=True)
    lines = []
    for color in colors:
        name = f"{color}.png"
        Image.new("RGB", size, PALETTE[color]).save(image_dir / name)
        lines.append(f"{name}\ta {color} square")
    manifest = tmp_path / "captions.tsv"
    manifest.write_text("\n".join(lines) + ("\n" if lines else ""))
    return image_dir, manifest


def read_embp(path):
    blob = path.read_bytes()
    magic, version, dim_img, dim_txt, count = HEADER.unpack(blob[: HEADER.size])
    assert magic == b"EMBP" and version == 1
    record = 8 + 4 * dim_img + 4 * dim_txt
    assert len(blob) == HEADER.size + count * record
    ids, images, texts = [], [], []
    offset = HEADER.size
    for _ in range(count):
        (rec_id,) = struct.unpack_from("<Q", blob, offset)
        ids.append(rec_id)
        images.append(np.frombuffer(blob, "<f4", dim_img, offset + 8))
        texts.append(np.frombuffer(blob, "<f4", dim_txt, offset + 8 + 4 * dim_img))
        offset += record
    shape_img = (count, dim_img)
    shape_txt = (count, dim_txt)
    return (
        np.asarray(ids),
        np.asarray(images).reshape(shape_img),
        np.asarray(texts).reshape(shape_txt),
    )


def export(tmp_path, *extra, colors=("red", "green", "blue", "yellow")):
    image_dir, manifest = make_corpus(tmp_path, colors)
    out = tmp_path / "out.embp"
    code = main(
        ["export", "--model", "toy:16", "--images", str(image_dir),
         "--captions", str(manifest), "--out", str(out), *extra]
    )
    return code, out


class TestManifest:
    def test_parses_rows_in_order(self, tmp_path):
        path = tmp_path / "captions.tsv"
        path.write_text("a.png\tfirst one\n\nb.png\tsecond\twith tab\n")
        rows = read_manifest(path)
        assert rows == [("a.png", "first one"), ("b.png", "second\twith tab")]

    def test_missing_tab_names_the_line(self, tmp_path):
        path = tmp_path / "captions.tsv"
        path.write_text("a.png\tfine\nbroken line without tab\n")
        with pytest.raises(Exception, match="line 2"):
            read_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(Exception, match="not found"):
            read_manifest(tmp_path / "absent.tsv")


class TestExportFile:
    def test_header_ids_and_size(self, tmp_path):
        code, out = export(tmp_path)
        assert code == 0
        ids, images, texts = read_embp(out)
        assert ids.tolist() == [0, 1, 2, 3]
        assert images.shape == (4, 16)
        assert texts.shape == (4, 16)
        assert out.stat().st_size == 22 + 4 * (8 + 64 + 64)

    def test_empty_manifest_writes_header_only(self, tmp_path):
        image_dir = tmp_path / "images"
        image_dir.mkdir()
        manifest = tmp_path / "captions.tsv"
        manifest.write_text("")
        out = tmp_path / "out.embp"
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(out)]
        )
        assert code == 0
        assert out.stat().st_size == 22
        ids, images, texts = read_embp(out)
        assert len(ids) == 0
        assert images.shape == (0, 16)

    def test_deterministic_bytes(self, tmp_path):
        _, first = export(tmp_path)
        blob = first.read_bytes()
        first.unlink()
        _, second = export(tmp_path)
        assert second.read_bytes() == blob

    def test_embeddings_are_unnormalized_encoder_output(self, tmp_path):
        code, out = export(tmp_path, colors=("red",))
        _, images, texts = read_embp(out)
        norms = np.linalg.norm(images, axis=1)
        assert not np.allclose(norms, 1.0)  # nothing renormalized them
        encoder = ToyColorEncoder(16)
        direct = encoder.encode_texts(["a red square"])
        assert np.array_equal(texts, direct)


class TestErrors:
    def test_misaligned_manifest_exits_1(self, tmp_path, capsys):
        image_dir, manifest = make_corpus(tmp_path, ("red",))
        manifest.write_text("red.png missing the tab\n")
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(tmp_path / "o.embp")]
        )
        assert code == 1
        assert "line 1" in capsys.readouterr().err

    def test_unreadable_image_fails_by_default(self, tmp_path, capsys):
        image_dir, manifest = make_corpus(tmp_path, ("red", "green"))
        (image_dir / "green.png").write_bytes(b"this is not a png")
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(tmp_path / "o.embp")]
        )
        assert code == 1
        assert "green.png" in capsys.readouterr().err
        assert not (tmp_path / "o.embp").exists()

    def test_unreadable_image_skipped_on_request(self, tmp_path, capsys):
        image_dir, manifest = make_corpus(tmp_path, ("red", "green", "blue"))
        (image_dir / "green.png").write_bytes(b"this is not a png")
        out = tmp_path / "o.embp"
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(out),
             "--on-error", "skip"]
        )
        assert code == 0
        assert "green.png" in capsys.readouterr().err
        ids, images, texts = read_embp(out)
        assert ids.tolist() == [0, 1]  # renumbered, still contiguous
        # remaining rows are red and blue, in manifest order
        assert images[0, 0] > 0.4 and images[1, 2] > 0.4

    def test_missing_image_file(self, tmp_path, capsys):
        image_dir, manifest = make_corpus(tmp_path, ("red",))
        (image_dir / "red.png").unlink()
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(tmp_path / "o.embp")]
        )
        assert code == 1
        assert "red.png" in capsys.readouterr().err

    @pytest.mark.parametrize("model", ["toy:abc", "toy:", "toy:4"])
    def test_bad_toy_ids_exit_2(self, tmp_path, capsys, model):
        image_dir, manifest = make_corpus(tmp_path, ("red",))
        code = main(
            ["export", "--model", model, "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(tmp_path / "o.embp")]
        )
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_batch_size_exits_2(self, tmp_path):
        image_dir, manifest = make_corpus(tmp_path, ("red",))
        code = main(
            ["export", "--model", "toy:16", "--images", str(image_dir),
             "--captions", str(manifest), "--out", str(tmp_path / "o.embp"),
             "--batch-size", "0"]
        )
        assert code == 2


class TestToyEncoder:
    def test_color_axes_align_between_branches(self):
        encoder = ToyColorEncoder(16)
        red_img = Image.new("RGB", (10, 10), (255, 0, 0))
        img_vec = encoder.encode_images([red_img])[0]
        txt_red = encoder.encode_texts(["a red thing"])[0]
        txt_blue = encoder.encode_texts(["a blue thing"])[0]

        def cos(a, b):
            return float(
                np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
            )

        assert cos(img_vec, txt_red) > cos(img_vec, txt_blue)

    def test_empty_caption_is_not_a_zero_vector(self):
        encoder = ToyColorEncoder(16)
        vec = encoder.encode_texts([""])[0]
        assert np.linalg.norm(vec) > 0

    def test_resolver_routes_toy_ids(self):
        encoder = resolve_encoder("toy:32", batch_size=8)
        assert isinstance(encoder, ToyColorEncoder)
        assert encoder.dim_img == encoder.dim_txt == 32
