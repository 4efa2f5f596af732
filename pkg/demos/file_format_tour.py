"""Poke at the paired-embedding file format byte by byte.

The file layout is: magic "EMBP", a u16 version, the two embedding
dimensions as u32, a u64 record count, then fixed-width records of
(u64 id, float32 image embedding, float32 text embedding), all
little-endian with no padding anywhere.
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from embedfuse.data import PairedDataset, read_pairs, write_pairs

ids = np.array([10, 11, 12], dtype="<u8")
images = np.array([[1, 0], [0, 1], [1, 1]], dtype="<f4")
texts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]], dtype="<f4")
dataset = PairedDataset(ids, images, texts)

out = Path(tempfile.mkdtemp()) / "tour.embp"
written = write_pairs(dataset, out)
blob = out.read_bytes()
print(f"wrote {written} bytes")

magic, version, dim_img, dim_txt, count = struct.unpack("<4sHIIQ", blob[:22])
print(f"header: magic={magic} version={version} "
      f"dims={dim_img}x{dim_txt} count={count}")

record_size = 8 + 4 * dim_img + 4 * dim_txt
print(f"record size: {record_size} bytes, total {22 + 3 * record_size}")

offset = 22
for _ in range(count):
    (rec_id,) = struct.unpack_from("<Q", blob, offset)
    img = np.frombuffer(blob, "<f4", dim_img, offset + 8)
    txt = np.frombuffer(blob, "<f4", dim_txt, offset + 8 + 4 * dim_img)
    print(f"  id={rec_id}  image={img.tolist()}  text={txt.tolist()}")
    offset += record_size

# Round trip is exact: same bytes in, same bytes out.
again = read_pairs(out)
second = Path(str(out) + ".copy")
write_pairs(again, second)
print("round trip byte-identical:", out.read_bytes() == second.read_bytes())
