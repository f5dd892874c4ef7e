"""Plain-text file formats: readers, writers and atomic writes.

Tabular inputs are delimiter-separated with a header row; the delimiter is
sniffed from the header among comma, tab, semicolon and pipe. Floats are
written with 17 significant digits so every artifact round-trips bitwise.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from .composite import MODALITIES, ModalityWeights
from .errors import AllZeroCounts, LingDistError, ParseError, RaggedRows
from .evaluation import ScoreMatrix
from .genetic.graph import GenealogyGraph
from .genetic.train import EmbeddingTable
from .geo import GeoDistribution, GeoPoint, normalize_speaker_counts
from .typology.islands import IslandModel
from .typology.lcm import MISSING, FeatureMatrix

logger = logging.getLogger(__name__)

_DELIMITERS = (",", "\t", ";", "|")
SPEAKER_COLUMNS = ("lang_id", "location_id", "lat", "lon", "l1_count")
WEIGHT_ROWS_COLUMNS = ("d_geo", "d_gen", "d_typ", "loss")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sniff(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in _DELIMITERS}
    best = max(counts, key=counts.get)
    return best if counts[best] else ","


def read_table(path):
    """Read a delimited file with a header.

    Returns ``(header, rows)`` where each row is ``(line_number, cells)``;
    blank lines are skipped and cells are stripped.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    first = next((i for i, line in enumerate(lines) if line.strip()), None)
    if first is None:
        raise ParseError("file is empty", path)
    delim = _sniff(lines[first])
    reader = csv.reader(lines, delimiter=delim)
    header = None
    rows = []
    for lineno, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        cells = [c.strip() for c in cells]
        if header is None:
            header = cells
            continue
        rows.append((lineno, cells))
    return header, rows


def _expect_columns(header, expected, path):
    got = [h.lower() for h in header]
    if got[: len(expected)] != list(expected):
        raise ParseError(f"expected header {', '.join(expected)}, got {', '.join(header)}", path, 1)


# ---------------------------------------------------------------- speakers


def load_speakers(path, skipped: list | None = None) -> dict[str, GeoDistribution]:
    """Speaker file -> one distribution per language.

    Languages whose counts are all zero are logged, appended to ``skipped``
    (if given) and left out.
    """
    header, rows = read_table(path)
    _expect_columns(header, SPEAKER_COLUMNS, path)
    per_lang: dict[str, list] = defaultdict(list)
    for lineno, cells in rows:
        if len(cells) != len(SPEAKER_COLUMNS):
            raise RaggedRows(f"expected {len(SPEAKER_COLUMNS)} columns, got {len(cells)}", path, lineno)
        lang, _loc, lat, lon, count = cells
        try:
            lat_f = float(lat)
            lon_f = float(lon)
        except ValueError:
            raise ParseError(f"bad coordinate ({lat!r}, {lon!r})", path, lineno) from None
        if not (math.isfinite(lat_f) and -90.0 <= lat_f <= 90.0):
            raise ParseError(f"latitude {lat} outside [-90, 90]", path, lineno)
        if not (math.isfinite(lon_f) and -180.0 <= lon_f <= 180.0):
            raise ParseError(f"longitude {lon} outside [-180, 180]", path, lineno)
        try:
            n = int(count)
        except ValueError:
            raise ParseError(f"speaker count {count!r} is not an integer", path, lineno) from None
        if n < 0:
            raise ParseError(f"negative speaker count {n}", path, lineno)
        per_lang[lang].append((GeoPoint(lat_f, lon_f), n))
    out = {}
    for lang, lang_rows in per_lang.items():
        try:
            out[lang] = normalize_speaker_counts(lang_rows)
        except AllZeroCounts:
            logger.warning("%s: language %s has only zero speaker counts; skipped", path, lang)
            if skipped is not None:
                skipped.append(lang)
    return out


def save_speakers(path, rows) -> None:
    """Write ``(lang_id, location_id, lat, lon, count)`` rows."""
    lines = [",".join(SPEAKER_COLUMNS)]
    for lang, loc, lat, lon, count in rows:
        lines.append(f"{lang},{loc},{fmt(lat)},{fmt(lon)},{int(count)}")
    atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- tree


def load_tree(path) -> GenealogyGraph:
    header, rows = read_table(path)
    _expect_columns(header, ("parent_id", "child_id"), path)
    edges = []
    for lineno, cells in rows:
        if len(cells) != 2 or not all(cells):
            raise ParseError("expected parent_id, child_id", path, lineno)
        edges.append((cells[0], cells[1]))
    g = GenealogyGraph.from_edges(edges).validate()
    logger.info("%s: %d nodes, %d edges", path, len(g.nodes), len(g.edges))
    return g


def save_tree(path, g: GenealogyGraph) -> None:
    lines = ["parent_id,child_id"] + [f"{p},{c}" for p, c in g.edges]
    atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- features


def load_features(path) -> FeatureMatrix:
    header, rows = read_table(path)
    if not header or header[0].lower() != "lang_id":
        raise ParseError("first column must be lang_id", path, 1)
    features = header[1:]
    langs = []
    values = []
    lookup = {"0": 0, "1": 1, "?": MISSING}
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise RaggedRows(f"expected {len(header)} cells, got {len(cells)}", path, lineno)
        row = []
        for f, c in zip(features, cells[1:]):
            if c not in lookup:
                raise ParseError(f"feature {f}: value {c!r} not in {{0, 1, ?}}", path, lineno)
            row.append(lookup[c])
        langs.append(cells[0])
        values.append(row)
    m = FeatureMatrix(langs, features, np.array(values, dtype=np.int8).reshape(len(langs), len(features)))
    logger.info("%s: %d languages x %d features, missingness %.4f",
                path, len(langs), len(features), m.missing_rate)
    return m


def save_features(path, m: FeatureMatrix) -> None:
    sym = {0: "0", 1: "1", MISSING: "?"}
    lines = [",".join(["lang_id", *m.features])]
    for lang, row in zip(m.languages, m.values):
        lines.append(",".join([lang, *(sym[int(v)] for v in row)]))
    atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- embeddings


def save_embeddings(path, table: EmbeddingTable) -> None:
    d_max = table.d_max if table.d_max is not None else float("nan")
    lines = [f"{table.geometry} {table.dim} {len(table)} {fmt(d_max)}"]
    for node, row in zip(table.nodes, table.coords):
        node = str(node)
        if not node or any(ch.isspace() for ch in node):
            raise LingDistError(f"node id {node!r} cannot be written (whitespace)")
        lines.append(" ".join([node, *map(fmt, row)]))
    atomic_write(path, "\n".join(lines) + "\n")


def load_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ParseError("empty embedding file", path)
    head = lines[0].split()
    if len(head) != 4:
        raise ParseError("header must be: geometry dim n_nodes d_max", path, 1)
    geometry, dim, n_nodes, d_max = head
    try:
        dim = int(dim)
        n_nodes = int(n_nodes)
        d_max = float(d_max)
    except ValueError:
        raise ParseError("malformed header values", path, 1) from None
    if geometry not in ("poincare", "hyperboloid", "euclidean"):
        raise ParseError(f"unknown geometry {geometry!r}", path, 1)
    width = dim + 1 if geometry == "hyperboloid" else dim
    nodes = []
    coords = np.empty((n_nodes, width))
    if len(lines) - 1 != n_nodes:
        raise ParseError(f"header says {n_nodes} nodes, found {len(lines) - 1}", path)
    for k, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != width + 1:
            raise RaggedRows(f"expected {width} coordinates", path, k + 2)
        nodes.append(parts[0])
        try:
            coords[k] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ParseError("non-numeric coordinate", path, k + 2) from None
    return EmbeddingTable(geometry, dim, nodes, coords, None if math.isnan(d_max) else d_max)


# ---------------------------------------------------------------- islands


def save_islands(path, model: IslandModel) -> None:
    atomic_write(path, model.to_json() + "\n")


def load_islands(path) -> IslandModel:
    try:
        return IslandModel.from_json(Path(path).read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed island model: {exc}", path) from None


# ---------------------------------------------------------------- weights


def save_weights(path, w: ModalityWeights) -> None:
    d = w.as_dict()
    names = list(d)
    atomic_write(path, " ".join(names) + "\n" + " ".join(fmt(d[n]) for n in names) + "\n")


def load_weights(path) -> ModalityWeights:
    lines = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if len(lines) != 2 or len(lines[0]) != len(lines[1]):
        raise ParseError("weights file must hold a label line and a value line", path)
    try:
        values = [float(x) for x in lines[1]]
    except ValueError:
        raise ParseError("non-numeric weight", path, 2) from None
    return ModalityWeights(tuple(zip(lines[0], values)))


def load_weight_rows(path):
    """Rows of ``d_geo, d_gen, d_typ, loss`` for weight fitting."""
    header, rows = read_table(path)
    _expect_columns(header, WEIGHT_ROWS_COLUMNS, path)
    out = []
    for lineno, cells in rows:
        if len(cells) != len(WEIGHT_ROWS_COLUMNS):
            raise RaggedRows("expected d_geo, d_gen, d_typ, loss", path, lineno)
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise ParseError("non-numeric value", path, lineno) from None
        out.append((dict(zip(MODALITIES, vals[:3])), vals[3]))
    return out


# ---------------------------------------------------------------- matrices


def _parse_cell(c, path, lineno):
    if c.upper() in ("NA", ""):
        return float("nan")
    try:
        return float(c)
    except ValueError:
        raise ParseError(f"bad value {c!r}", path, lineno) from None


def load_labeled_matrix(path):
    """First column row ids, header of column ids, cells decimal or ``NA``."""
    header, rows = read_table(path)
    cols = header[1:]
    row_ids = []
    values = []
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise RaggedRows(f"expected {len(header)} cells, got {len(cells)}", path, lineno)
        row_ids.append(cells[0])
        values.append([_parse_cell(c, path, lineno) for c in cells[1:]])
    return row_ids, cols, np.array(values, dtype=float).reshape(len(row_ids), len(cols))


def save_labeled_matrix(path, row_ids, col_ids, values, corner="lang_id") -> None:
    lines = [",".join([corner, *map(str, col_ids)])]
    for rid, row in zip(row_ids, values):
        lines.append(",".join([str(rid), *("NA" if math.isnan(v) else fmt(v) for v in row)]))
    atomic_write(path, "\n".join(lines) + "\n")


def load_scores(path) -> ScoreMatrix:
    targets, sources, values = load_labeled_matrix(path)
    return ScoreMatrix(targets, sources, values)
