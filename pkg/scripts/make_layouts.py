"""Regenerate the shipped coupling-map data files.

Run from the repository root:

    python scripts/make_layouts.py

The five named layouts are frozen as JSON under src/hexqaoa/data/ and
validated against the heavy-hex invariants before writing.  A unit test
pins the shipped files to this generator, so edits here require
regenerating the data.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hexqaoa.hexising import (  # noqa: E402
    COUPLING_MAP_FORMAT,
    COUPLING_MAP_VERSION,
    _stacked_rows_edges,
    heavy_hex_from_edges,
)

# 16-qubit and 27-qubit transmon maps with one and two heavy hexagons.
GUADALUPE16_EDGES = [
    (0, 1), (1, 2), (2, 3), (1, 4), (3, 5), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (13, 14), (12, 15),
]
FALCON27_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 5), (1, 4), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
    (15, 18), (14, 16), (16, 19), (17, 18), (18, 21), (19, 20), (19, 22),
    (21, 23), (22, 25), (23, 24), (24, 25), (25, 26),
]


def device_edges(name):
    """Row-and-connector constructions for the three large device maps."""
    if name == "eagle127":
        rows = [list(range(14))] + [list(range(15)) for _ in range(5)] + [list(range(1, 15))]
        conns = [[0, 4, 8, 12] if g % 2 == 0 else [2, 6, 10, 14] for g in range(6)]
        return _stacked_rows_edges(rows, conns)
    if name == "heron133":
        rows = [list(range(15)) for _ in range(7)]
        conns = [[0, 4, 8, 12] if g % 2 == 0 else [2, 6, 10, 14] for g in range(6)]
        return _stacked_rows_edges(rows, conns, dangling_cols=[0, 4, 8, 12])
    if name == "heron156":
        rows = [list(range(16)) for _ in range(8)]
        conns = [[3, 7, 11, 15] if g % 2 == 0 else [1, 5, 9, 13] for g in range(7)]
        return _stacked_rows_edges(rows, conns)
    if name == "guadalupe16":
        return 16, GUADALUPE16_EDGES
    if name == "falcon27":
        return 27, FALCON27_EDGES
    raise ValueError(name)


EXPECTED = {
    "eagle127": (127, 144),
    "heron133": (133, 150),
    "heron156": (156, 176),
    "guadalupe16": (16, 16),
    "falcon27": (27, 28),
}


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "src", "hexqaoa", "data")
    os.makedirs(out_dir, exist_ok=True)
    for name, (want_n, want_m) in EXPECTED.items():
        n, edges = device_edges(name)
        graph = heavy_hex_from_edges(n, edges, layout=name)
        assert graph.n == want_n, (name, graph.n)
        assert len(graph.edges) == want_m, (name, len(graph.edges))
        doc = {
            "format": COUPLING_MAP_FORMAT,
            "version": COUPLING_MAP_VERSION,
            "name": name,
            "n": graph.n,
            "edges": [list(e) for e in graph.edges],
        }
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
        print(f"{name}: n={graph.n} edges={len(graph.edges)} "
              f"v2={len(graph.v2)} v3={len(graph.v3)} cubic={len(graph.cubic)}")


if __name__ == "__main__":
    main()
