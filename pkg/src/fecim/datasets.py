"""Dataset and weight-file handling: a deterministic synthetic digit set
for desk-scale studies, plus IDX/CSV dataset loaders and the two weight
file formats (flat float32 binary with a JSON sidecar, or a single JSON
document for small models)."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .devices import DomainError

GLYPH_SIZE = 8
N_CLASSES = 10

# 8x8 seven-segment-style digit glyphs; rows of '#' mark lit pixels.
_GLYPHS = [
    # 0
    [
        "  ####  ",
        " #    # ",
        " #   ## ",
        " #  # # ",
        " # #  # ",
        " ##   # ",
        " #    # ",
        "  ####  ",
    ],
    # 1
    [
        "   ##   ",
        "  ###   ",
        "   ##   ",
        "   ##   ",
        "   ##   ",
        "   ##   ",
        "   ##   ",
        " ###### ",
    ],
    # 2
    [
        "  ####  ",
        " #    # ",
        "      # ",
        "     #  ",
        "    #   ",
        "   #    ",
        "  #     ",
        " ###### ",
    ],
    # 3
    [
        " #####  ",
        "      # ",
        "      # ",
        "  ####  ",
        "      # ",
        "      # ",
        "      # ",
        " #####  ",
    ],
    # 4
    [
        " #   #  ",
        " #   #  ",
        " #   #  ",
        " ###### ",
        "     #  ",
        "     #  ",
        "     #  ",
        "     #  ",
    ],
    # 5
    [
        " ###### ",
        " #      ",
        " #      ",
        " #####  ",
        "      # ",
        "      # ",
        " #    # ",
        "  ####  ",
    ],
    # 6
    [
        "  ####  ",
        " #      ",
        " #      ",
        " #####  ",
        " #    # ",
        " #    # ",
        " #    # ",
        "  ####  ",
    ],
    # 7
    [
        " ###### ",
        "      # ",
        "     #  ",
        "    #   ",
        "   #    ",
        "   #    ",
        "   #    ",
        "   #    ",
    ],
    # 8
    [
        "  ####  ",
        " #    # ",
        " #    # ",
        "  ####  ",
        " #    # ",
        " #    # ",
        " #    # ",
        "  ####  ",
    ],
    # 9
    [
        "  ####  ",
        " #    # ",
        " #    # ",
        "  ##### ",
        "      # ",
        "      # ",
        "      # ",
        "  ####  ",
    ],
]


def glyph_templates() -> np.ndarray:
    """(10, 64) float templates in [0, 1]."""
    out = np.zeros((N_CLASSES, GLYPH_SIZE * GLYPH_SIZE))
    for c, rows in enumerate(_GLYPHS):
        for r, line in enumerate(rows):
            for col, ch in enumerate(line):
                if ch == "#":
                    out[c, r * GLYPH_SIZE + col] = 1.0
    return out


def _shift2d(img: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with zero fill (no wraparound)."""
    out = np.zeros_like(img)
    rs, re = max(0, dr), GLYPH_SIZE + min(0, dr)
    cs, ce = max(0, dc), GLYPH_SIZE + min(0, dc)
    out[rs:re, cs:ce] = img[rs - dr:re - dr, cs - dc:ce - dc]
    return out


def synthetic_digits(n: int, seed: int = 0, noise: float = 0.10,
                     jitter: bool = True):
    """Deterministic 10-class digit set: noisy, optionally shifted glyph
    renderings. Returns (inputs (n, 64) in [0, 1], labels (n,))."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD16175)))
    tpl = glyph_templates().reshape(N_CLASSES, GLYPH_SIZE, GLYPH_SIZE)
    labels = rng.integers(0, N_CLASSES, n)
    images = np.empty((n, GLYPH_SIZE, GLYPH_SIZE))
    for i, lab in enumerate(labels):
        img = tpl[lab]
        if jitter:
            dr, dc = rng.integers(-1, 2, 2)
            img = _shift2d(img, int(dr), int(dc))
        img = img + rng.normal(0.0, noise, img.shape)
        images[i] = np.clip(img, 0.0, 1.0)
    return images.reshape(n, -1), labels.astype(np.int64)


def make_demo_network(seed: int = 0, hidden: int = 96,
                      train_n: int = 4096):
    """Construct the desk-scale two-layer classifier without an iterative
    training loop: a fixed random hidden expansion plus a closed-form
    ridge-regression readout on a held-out synthetic split.

    Returns (weights, biases): weights = [W1 (64, hidden), W2 (hidden, 10)].
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0E77)))
    w1 = rng.normal(0.0, 1.0 / np.sqrt(GLYPH_SIZE * GLYPH_SIZE),
                    (GLYPH_SIZE * GLYPH_SIZE, hidden))
    x, y = synthetic_digits(train_n, seed=seed + 1)
    h = np.maximum(x @ w1, 0.0)
    onehot = np.eye(N_CLASSES)[y]
    lam = 1e-2
    gram = h.T @ h + lam * np.eye(hidden)
    w2 = np.linalg.solve(gram, h.T @ onehot)
    return [w1, w2], [None, None]


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def load_csv_dataset(path):
    """CSV rows: flattened image pixels then the integer label (last
    column). Header optional."""
    rows = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                continue  # header
    if not rows:
        raise DomainError(f"no data rows in {path}")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, :-1], arr[:, -1].astype(np.int64)


def save_csv_dataset(path, inputs, labels):
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as fh:
        cols = [f"p{i}" for i in range(inputs.shape[1])] + ["label"]
        fh.write(",".join(cols) + "\n")
        for x, y in zip(inputs, labels):
            fh.write(",".join(f"{v:.6f}" for v in x) + f",{y}\n")


_IDX_DTYPES = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4",
               0x0D: ">f4", 0x0E: ">f8"}


def load_idx(path) -> np.ndarray:
    """IDX-format tensor (the classic digit-image container)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if len(magic) != 4 or magic[0] != 0 or magic[1] != 0:
            raise DomainError(f"{path} is not an IDX file")
        dtype = _IDX_DTYPES.get(magic[2])
        if dtype is None:
            raise DomainError(f"unsupported IDX type code {magic[2]:#x}")
        ndim = magic[3]
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != int(np.prod(dims)):
        raise DomainError(f"{path}: payload does not match header dims {dims}")
    return data.reshape(dims)


def save_idx(path, array: np.ndarray):
    array = np.ascontiguousarray(array)
    code = {np.dtype(np.uint8): 0x08, np.dtype(np.int8): 0x09}.get(array.dtype)
    if code is None:
        array = array.astype(">f4")
        code = 0x0D
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, code, array.ndim]))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def load_idx_dataset(images_path, labels_path):
    images = load_idx(images_path).astype(np.float64)
    labels = load_idx(labels_path).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DomainError("image/label counts differ")
    if images.max() > 1.0:
        images = images / 255.0
    return images.reshape(images.shape[0], -1), labels


# ---------------------------------------------------------------------------
# weight files
# ---------------------------------------------------------------------------

def save_weights_binary(path, weights):
    """Flat little-endian float32 blob plus a '<path>.json' sidecar with
    the per-layer shapes."""
    path = Path(path)
    flat = np.concatenate([np.asarray(w, dtype="<f4").reshape(-1)
                           for w in weights])
    path.write_bytes(flat.tobytes())
    sidecar = {"layers": [list(np.asarray(w).shape) for w in weights],
               "dtype": "float32-le"}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1))


def load_weights_binary(path):
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    flat = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    weights = []
    off = 0
    for shape in sidecar["layers"]:
        size = int(np.prod(shape))
        weights.append(flat[off:off + size].reshape(shape))
        off += size
    if off != flat.size:
        raise DomainError("weight blob does not match sidecar shapes")
    return weights


def save_weights_json(path, weights):
    doc = {"layers": [np.asarray(w, dtype=np.float64).tolist()
                      for w in weights]}
    Path(path).write_text(json.dumps(doc))


def load_weights_json(path):
    doc = json.loads(Path(path).read_text())
    return [np.asarray(layer, dtype=np.float64) for layer in doc["layers"]]


def load_weights(path):
    """Dispatch on extension: .json documents or flat .bin blobs."""
    p = str(path)
    if p.endswith(".json"):
        return load_weights_json(p)
    return load_weights_binary(p)
