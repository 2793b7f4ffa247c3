"""Convert the per-digit JSON files of the `mnist` npm package to an IDX pair.

Usage: python3 scripts/mnist_from_npm.py <package>/src/digits data/mnist
"""

import json
import struct
import sys
from pathlib import Path

SIDE = 28


def main(src: Path, out: Path) -> None:
    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(data) % (SIDE * SIDE):
            sys.exit(f"{digit}.json: {len(data)} values is not a whole number of images")
        pixels.extend(min(255, max(0, round(v * 255))) for v in data)
        labels.extend([digit] * (len(data) // (SIDE * SIDE)))
    out.mkdir(parents=True, exist_ok=True)
    count = len(labels)
    (out / "images-idx3-ubyte").write_bytes(struct.pack(">4I", 2051, count, SIDE, SIDE) + pixels)
    (out / "labels-idx1-ubyte").write_bytes(struct.pack(">2I", 2049, count) + labels)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(Path(sys.argv[1]), Path(sys.argv[2]))
