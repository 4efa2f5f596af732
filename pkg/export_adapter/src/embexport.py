"""Export image+caption pairs as a paired-embedding dataset file.

Runs an image/text encoder over an image folder plus a tab-separated
caption manifest (`filename<TAB>caption`, one pair per line) and writes
the embeddings in the EMBP binary layout: magic ``"EMBP"``, u16 version 1,
u32 image dim, u32 text dim, u64 record count, then per record a u64 id
followed by the image and text embeddings as float32 — all little-endian,
no padding. That byte layout is the only contract this script shares with
the toolkit that consumes its output files; nothing is imported from it.

Model ids:

    toy:<dim>   Built-in deterministic encoder, no checkpoint required.
                The image branch measures color statistics; the text
                branch maps color words onto the same axes and hashes the
                remaining tokens. Matched image/caption pairs land closer
                together than mismatched ones whenever captions actually
                describe image colors, which makes it useful for plumbing
                tests. dim must be >= 8.

    <anything>  Treated as a CLIP-family checkpoint id and loaded with
                transformers (install the [clip] extra). Inference only,
                batched, no dropout, so output is deterministic for a
                fixed checkpoint.

Embeddings are written unnormalized, exactly as the encoder produced
them, cast to float32. Ids are assigned 0..n-1 in manifest order; with
``--on-error skip`` unreadable images are dropped with a warning and the
remaining pairs are renumbered contiguously.
"""

from __future__ import annotations

import argparse
import struct
import sys
import zlib
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = ["ToyColorEncoder", "main", "read_manifest", "resolve_encoder", "write_embp"]


class UsageError(Exception):
    """Bad flags or an unusable model id: the command never ran."""


class ExportError(Exception):
    """The command ran and failed: bad manifest, unreadable input."""


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------

_COLOR_WORDS = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
    "gray": (0.5, 0.5, 0.5),
    "grey": (0.5, 0.5, 0.5),
    "orange": (1.0, 0.5, 0.0),
    "purple": (0.5, 0.0, 0.5),
    "pink": (1.0, 0.75, 0.8),
    "brown": (0.6, 0.4, 0.2),
}

_ANCHOR = 0.25  # shared constant slot so no embedding is ever the zero vector
_TOKEN_WEIGHT = 0.15
_TEXTURE_WEIGHT = 0.15


class ToyColorEncoder:
    """Deterministic stand-in encoder whose shared signal is color.

    Layout of the embedding vector (same for both branches):
      [0:3]  mean RGB minus 0.5 (image) / color-word RGB minus 0.5 (text)
      [3]    pixel contrast (image only)
      [4]    constant anchor, both branches
      [5:]   hashed detail: 2x2 grayscale patch means (image) or signed
             token hashes (text), low amplitude
    """

    def __init__(self, dim: int):
        if dim < 8:
            raise UsageError(f"toy encoder needs dim >= 8, got {dim}")
        self.dim_img = dim
        self.dim_txt = dim

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        out = np.zeros((len(images), self.dim_img), dtype=np.float64)
        for row, img in enumerate(images):
            pixels = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
            vec = out[row]
            vec[0:3] = pixels.mean(axis=(0, 1)) - 0.5
            vec[3] = pixels.std()
            vec[4] = _ANCHOR
            gray = pixels.mean(axis=2)
            h, w = gray.shape
            patches = [
                gray[: h // 2 or 1, : w // 2 or 1].mean(),
                gray[: h // 2 or 1, w // 2 :].mean() if w > 1 else gray.mean(),
                gray[h // 2 :, : w // 2 or 1].mean() if h > 1 else gray.mean(),
                gray[h // 2 :, w // 2 :].mean() if h > 1 and w > 1 else gray.mean(),
            ]
            slots = self.dim_img - 5
            for i, value in enumerate(patches):
                vec[5 + i % slots] += _TEXTURE_WEIGHT * (value - 0.5)
        return out.astype("<f4")

    def encode_texts(self, captions: list[str]) -> np.ndarray:
        out = np.zeros((len(captions), self.dim_txt), dtype=np.float64)
        for row, caption in enumerate(captions):
            vec = out[row]
            vec[4] = _ANCHOR
            tokens = [t for t in "".join(
                c if c.isalpha() else " " for c in caption.lower()
            ).split() if t]
            colors = [_COLOR_WORDS[t] for t in tokens if t in _COLOR_WORDS]
            if colors:
                vec[0:3] = np.mean(np.asarray(colors), axis=0) - 0.5
            slots = self.dim_txt - 5
            for token in tokens:
                if token in _COLOR_WORDS:
                    continue
                digest = zlib.crc32(token.encode("utf-8"))
                sign = 1.0 if (digest >> 16) & 1 else -1.0
                vec[5 + digest % slots] += _TOKEN_WEIGHT * sign
        return out.astype("<f4")


class ClipEncoder:
    """Pretrained CLIP-family checkpoint via transformers; inference only."""

    def __init__(self, model_id: str, batch_size: int):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise UsageError(
                "pretrained checkpoints need torch and transformers "
                "(pip install 'embexport[clip]')"
            ) from exc
        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_id).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.batch_size = batch_size
        self.dim_img = int(self.model.config.projection_dim)
        self.dim_txt = self.dim_img

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        chunks = []
        with self._torch.inference_mode():
            for start in range(0, len(images), self.batch_size):
                batch = self.processor(
                    images=images[start : start + self.batch_size],
                    return_tensors="pt",
                )
                feats = self.model.get_image_features(**batch)
                chunks.append(feats.cpu().numpy())
        return np.vstack(chunks).astype("<f4")

    def encode_texts(self, captions: list[str]) -> np.ndarray:
        chunks = []
        with self._torch.inference_mode():
            for start in range(0, len(captions), self.batch_size):
                batch = self.processor(
                    text=captions[start : start + self.batch_size],
                    return_tensors="pt",
                    padding=True,
                    truncation=True,
                )
                feats = self.model.get_text_features(**batch)
                chunks.append(feats.cpu().numpy())
        return np.vstack(chunks).astype("<f4")


def resolve_encoder(model_id: str, batch_size: int):
    if model_id.startswith("toy:"):
        suffix = model_id[len("toy:") :]
        try:
            dim = int(suffix)
        except ValueError:
            raise UsageError(
                f"toy model id must look like toy:<dim>, got {model_id!r}"
            ) from None
        return ToyColorEncoder(dim)
    return ClipEncoder(model_id, batch_size)


# ---------------------------------------------------------------------------
# manifest and file IO
# ---------------------------------------------------------------------------


def read_manifest(tsv_path) -> list[tuple[str, str]]:
    """Parse `filename<TAB>caption` lines; blank lines are ignored."""
    path = Path(tsv_path)
    if not path.exists():
        raise ExportError(f"captions file not found: {path.name}")
    rows = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t", 1)
        if len(parts) != 2 or not parts[0].strip():
            raise ExportError(
                f"captions line {line_no}: expected filename<TAB>caption"
            )
        rows.append((parts[0].strip(), parts[1]))
    return rows


def write_embp(path, image_embs: np.ndarray, text_embs: np.ndarray) -> int:
    """Write paired embeddings; ids are the row numbers. Returns bytes written."""
    count, dim_img = image_embs.shape
    _, dim_txt = text_embs.shape
    blob = bytearray(struct.pack("<4sHIIQ", b"EMBP", 1, dim_img, dim_txt, count))
    images32 = np.ascontiguousarray(image_embs, dtype="<f4")
    texts32 = np.ascontiguousarray(text_embs, dtype="<f4")
    for row in range(count):
        blob += struct.pack("<Q", row)
        blob += images32[row].tobytes()
        blob += texts32[row].tobytes()
    Path(path).write_bytes(bytes(blob))
    return len(blob)


def _load_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.convert("RGB")
    except FileNotFoundError:
        raise ExportError(f"image not found: {path.name}") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise ExportError(f"cannot decode {path.name}: {exc}") from None


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _cmd_export(args) -> int:
    if args.batch_size < 1:
        raise UsageError(f"batch size must be >= 1, got {args.batch_size}")
    encoder = resolve_encoder(args.model, args.batch_size)
    rows = read_manifest(args.captions)
    images: list[Image.Image] = []
    captions: list[str] = []
    skipped = 0
    for name, caption in rows:
        try:
            images.append(_load_image(Path(args.images) / name))
        except ExportError as exc:
            if args.on_error == "fail":
                raise
            skipped += 1
            print(f"warning: skipping {name}: {exc}", file=sys.stderr)
            continue
        captions.append(caption)

    if images:
        image_embs = encoder.encode_images(images)
        text_embs = encoder.encode_texts(captions)
    else:
        image_embs = np.zeros((0, encoder.dim_img), dtype="<f4")
        text_embs = np.zeros((0, encoder.dim_txt), dtype="<f4")
    written = write_embp(args.out, image_embs, text_embs)
    print(
        f"exported {len(images)} pairs "
        f"({encoder.dim_img}x{encoder.dim_txt}, {written} bytes, "
        f"{skipped} skipped)"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embexport", description=__doc__.splitlines()[0]
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    p = sub.add_parser("export", help="encode an image folder + caption manifest")
    p.add_argument("--model", required=True,
                   help="encoder id: toy:<dim> or a CLIP checkpoint id")
    p.add_argument("--images", required=True, help="directory of image files")
    p.add_argument("--captions", required=True,
                   help="TSV manifest: filename<TAB>caption per line")
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--on-error", choices=("fail", "skip"), default="fail",
                   help="what to do with unreadable images")

    args = parser.parse_args(argv)
    try:
        return _cmd_export(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
