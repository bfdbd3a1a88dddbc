"""Dataset ingestion, bitmap contour encoding, and sample splitting.

Datasets are TSV files with one "label<TAB>string" line per item; strings
are whitespace-separated tokens and the alphabet is inferred from the data
in first-appearance order unless one is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from editsim.alphabet import Alphabet, Str


class DatasetError(ValueError):
    pass


# Contour step directions: code 0 points East, numbering increases
# counterclockwise. Rows grow downward in image coordinates.
FREEMAN_ALPHABET = Alphabet(tuple("01234567"))
_STEPS = (
    (0, 1),    # 0 E
    (-1, 1),   # 1 NE
    (-1, 0),   # 2 N
    (-1, -1),  # 3 NW
    (0, -1),   # 4 W
    (1, -1),   # 5 SW
    (1, 0),    # 6 S
    (1, 1),    # 7 SE
)
_STEP_CODE = {step: code for code, step in enumerate(_STEPS)}


@dataclass
class Dataset:
    """Labeled strings over a shared alphabet."""

    items: list  # of (label, Str)
    alphabet: Alphabet
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> list:
        return [lab for lab, _ in self.items]

    @property
    def strings(self) -> list:
        return [s for _, s in self.items]

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))


def load_dataset(path, chars: bool = False, alphabet: Alphabet | None = None) -> Dataset:
    """Read a TSV dataset; '#' lines are comments. With chars=True each
    character of the string field is one token."""
    raw: list[tuple[str, list[str]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise DatasetError("%s:%d: expected 'label<TAB>string'" % (path, lineno))
            label, _, text = line.partition("\t")
            if not label:
                raise DatasetError("%s:%d: empty label" % (path, lineno))
            tokens = list(text) if chars else text.split()
            raw.append((label, tokens))
    if alphabet is None:
        alphabet = Alphabet.from_tokens(tokens for _, tokens in raw)
    items = [(label, alphabet.encode(tokens)) for label, tokens in raw]
    return Dataset(items, alphabet, {"source": str(path), "chars": chars})


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        for label, s in ds.items:
            fh.write("%s\t%s\n" % (label, s.text()))


def read_pbm(path) -> np.ndarray:
    """Parse a plain-text PBM (P1) bitmap into a 0/1 array (1 = foreground)."""
    tokens: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise DatasetError("%s: not a plain PBM (P1) file" % path)
    try:
        width, height = int(tokens[1]), int(tokens[2])
        bits = [int(t) for t in "".join(tokens[3:])]
    except (IndexError, ValueError) as exc:
        raise DatasetError("%s: malformed PBM payload" % path) from exc
    if len(bits) != width * height or any(b not in (0, 1) for b in bits):
        raise DatasetError("%s: PBM payload does not match its dimensions" % path)
    return np.array(bits, dtype=np.uint8).reshape(height, width)


def _first_foreground(bitmap: np.ndarray):
    rows, cols = np.nonzero(bitmap)
    if rows.size == 0:
        raise DatasetError("bitmap has no foreground pixel")
    order = np.lexsort((cols, rows))  # top-to-bottom, then left-to-right
    return int(rows[order[0]]), int(cols[order[0]])


def freeman_encode(bitmap: np.ndarray, alphabet: Alphabet = FREEMAN_ALPHABET) -> Str:
    """Chain code of the outer contour of the foreground shape.

    Starts at the first foreground pixel in a top-to-bottom, left-to-right
    scan and walks the boundary clockwise by Moore neighbor tracing
    (8-connectivity), emitting one direction code per move. The walk stops
    when its state (current pixel plus entry neighbor) repeats, which for a
    simple blob means returning to the start pixel the way it was first
    left. A single-pixel shape has no moves and encodes as the empty
    string.
    """
    bitmap = np.asarray(bitmap)
    start = _first_foreground(bitmap)
    h, w = bitmap.shape

    def fg(r: int, c: int) -> bool:
        return 0 <= r < h and 0 <= c < w and bool(bitmap[r, c])

    def next_move(pos, back):
        # Clockwise sweep of the 8 neighbors starting just after the
        # backtrack pixel; on screen (rows grow down) clockwise means
        # decreasing direction codes.
        start_code = _STEP_CODE[(back[0] - pos[0], back[1] - pos[1])]
        for k in range(1, 9):
            code = (start_code - k) % 8
            nxt = (pos[0] + _STEPS[code][0], pos[1] + _STEPS[code][1])
            if fg(*nxt):
                prev_code = (start_code - k + 1) % 8
                prev = (pos[0] + _STEPS[prev_code][0], pos[1] + _STEPS[prev_code][1])
                return code, nxt, prev
        return None

    pos = start
    back = (start[0], start[1] - 1)  # scan order guarantees this is background
    codes = []
    first_result = None
    seen = set()
    while (pos, back) not in seen:
        seen.add((pos, back))
        move = next_move(pos, back)
        if move is None:
            break  # isolated pixel: no contour moves
        code, nxt, prev = move
        if pos == start and (nxt, prev) == first_result:
            break  # back at the start about to re-trace the first move
        codes.append(str(code))
        if first_result is None:
            first_result = (nxt, prev)
        pos, back = nxt, prev
    return alphabet.encode(codes)


def encode_pbm_directory(paths, label_fn=None) -> Dataset:
    """Encode a collection of PBM files (or directories of them).

    The label defaults to the file-name part before the first underscore.
    """
    import glob
    import os

    if label_fn is None:
        def label_fn(p):
            return os.path.basename(str(p)).split("_")[0].split(".")[0]

    files = []
    for p in paths:
        p = str(p)
        if os.path.isdir(p):
            files.extend(glob.glob(os.path.join(p, "*.pbm")))
        else:
            files.append(p)
    items = []
    for p in sorted(files):
        bitmap = read_pbm(p)
        items.append((label_fn(p), freeman_encode(bitmap)))
    return Dataset(items, FREEMAN_ALPHABET, {"source": "pbm"})


def split_dataset(
    ds: Dataset,
    fractions=(0.8, 0.0, 0.2),
    seed: int = 0,
    stratified: bool = False,
):
    """Seeded shuffle then contiguous cut into (train, validation, test).

    With stratified=True the cut is applied per label so class counts are
    preserved within one item.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or sum(fractions) > 1 + 1e-9:
        raise DatasetError("fractions must be three nonnegative values summing to <= 1")
    rng = np.random.default_rng(seed)

    def cut(indices):
        indices = list(indices)
        rng.shuffle(indices)
        n = len(indices)
        a = round(fractions[0] * n)
        b = a + round(fractions[1] * n)
        c = b + round(fractions[2] * n)
        return indices[:a], indices[a:b], indices[b:min(c, n)]

    if stratified:
        parts = ([], [], [])
        for lab in ds.classes:
            idx = [i for i, (l, _) in enumerate(ds.items) if l == lab]
            for bucket, chunk in zip(parts, cut(idx)):
                bucket.extend(chunk)
    else:
        parts = cut(range(len(ds)))
    out = []
    for bucket in parts:
        items = [ds.items[i] for i in sorted(bucket)]
        out.append(Dataset(items, ds.alphabet, dict(ds.provenance)))
    return tuple(out)


def bootstrap_sample(ds: Dataset, size: int, seed: int = 0) -> Dataset:
    """Draw `size` items with replacement (seeded)."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(ds), size=size)
    items = [ds.items[int(i)] for i in idx]
    return Dataset(items, ds.alphabet, dict(ds.provenance))
