"""Reader for Gmsh MSH 4.1 ASCII surface meshes.

Only ``$MeshFormat``, ``$Nodes`` and ``$Elements`` are interpreted; other
sections are skipped.  Surface elements become Lagrange patches, and
point/line elements are ignored.  A small geodesic-sphere generator writes
test meshes in the same format.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import LAGRANGE_LAYOUTS, LagrangePatch, Patch

# gmsh element type -> (patch kind, reference domain, geometric order, node count)
ELEMENT_TYPES = {
    2: ("triangle", "triangle", 1, 3),
    9: ("triangle", "triangle", 2, 6),
    21: ("triangle", "triangle", 3, 10),
    3: ("quadrilateral", "square", 1, 4),
    10: ("quadrilateral", "square", 2, 9),
}
IGNORED_TYPES = {15: 1, 1: 2, 8: 3, 26: 4}  # point and line elements, with node counts


class MeshFormatError(ValueError):
    """Malformed or unsupported mesh file; the message carries path and line."""


@dataclass(frozen=True, eq=False)
class MeshModel:
    node_tags: np.ndarray
    coordinates: np.ndarray
    element_tags: np.ndarray
    element_types: np.ndarray
    connectivity: tuple  # node tags per element
    patches: tuple
    flipped: np.ndarray  # elements whose orientation was reversed

    @property
    def orders(self) -> np.ndarray:
        return np.array([ELEMENT_TYPES[t][2] for t in self.element_types])


class _Lines:
    def __init__(self, path):
        self.path = path
        self.lines = Path(path).read_text().splitlines()
        self.i = 0

    def next(self):
        while self.i < len(self.lines):
            line = self.lines[self.i].strip()
            self.i += 1
            if line:
                return line
        raise self.error("unexpected end of file")

    def error(self, msg):
        return MeshFormatError(f"{self.path}:{self.i}: {msg}")

    def ints(self):
        try:
            return [int(t) for t in self.next().split()]
        except ValueError as exc:
            raise self.error(f"expected integers ({exc})") from None

    def floats(self):
        try:
            return [float(t) for t in self.next().split()]
        except ValueError as exc:
            raise self.error(f"expected numbers ({exc})") from None


def _read_nodes(rd):
    n_blocks, n_nodes, _, _ = rd.ints()
    tags, coords = [], []
    for _ in range(n_blocks):
        _, _, _, count = rd.ints()
        block_tags = [rd.ints()[0] for _ in range(count)]
        for _ in range(count):
            xyz = rd.floats()
            coords.append(xyz[:3])  # parametric coordinates, if any, follow
        tags += block_tags
    if len(tags) != n_nodes:
        raise rd.error(f"node count mismatch: header says {n_nodes}, found {len(tags)}")
    return np.array(tags, dtype=np.int64), np.array(coords, dtype=float)


def _read_elements(rd):
    n_blocks, _, _, _ = rd.ints()
    elements = []
    for _ in range(n_blocks):
        _, _, etype, count = rd.ints()
        if etype not in ELEMENT_TYPES and etype not in IGNORED_TYPES:
            raise rd.error(f"unsupported element type {etype}")
        need = ELEMENT_TYPES[etype][3] if etype in ELEMENT_TYPES else IGNORED_TYPES[etype]
        for _ in range(count):
            row = rd.ints()
            if len(row) != need + 1:
                raise rd.error(f"element {row[0]} of type {etype} has {len(row) - 1} nodes, expected {need}")
            if etype in ELEMENT_TYPES:
                elements.append((row[0], etype, row[1:], rd.i))
    return elements


def parse_gmsh(path, orient: bool = True) -> MeshModel:
    """Read an MSH 4.1 ASCII file into a :class:`MeshModel`.

    With ``orient`` every element is flipped if its centroid normal points
    towards the centroid of the node cloud.
    """
    rd = _Lines(path)
    version = None
    tags = coords = None
    elements = []
    while rd.i < len(rd.lines):
        try:
            head = rd.next()
        except MeshFormatError:
            break
        if head == "$MeshFormat":
            parts = rd.next().split()
            version = parts[0]
            if version != "4.1" or (len(parts) > 1 and parts[1] != "0"):
                raise rd.error(f"unsupported MSH version/format {' '.join(parts)}; need 4.1 ASCII")
            end = "$EndMeshFormat"
        elif head == "$Nodes":
            tags, coords = _read_nodes(rd)
            end = "$EndNodes"
        elif head == "$Elements":
            elements = _read_elements(rd)
            end = "$EndElements"
        elif head.startswith("$"):
            end = "$End" + head[1:]
        else:
            raise rd.error(f"unexpected line {head!r}")
        while rd.next() != end:
            pass
    if version is None:
        raise MeshFormatError(f"{path}: missing $MeshFormat section")
    if tags is None:
        raise MeshFormatError(f"{path}: missing $Nodes section")
    if not elements:
        raise MeshFormatError(f"{path}: no surface elements")

    index = {int(t): k for k, t in enumerate(tags)}
    center = coords.mean(axis=0)
    patches, conn, flipped = [], [], []
    for etag, etype, ntags, line in elements:
        missing = [t for t in ntags if t not in index]
        if missing:
            raise MeshFormatError(f"{path}:{line}: element {etag} references missing node {missing[0]}")
        kind, domain, order, _ = ELEMENT_TYPES[etype]
        pmap = LagrangePatch(coords[[index[t] for t in ntags]], domain, order)
        patch = Patch(pmap, kind, order)
        flip = False
        if orient:
            ref_c = np.array([[1 / 3, 1 / 3]]) if domain == "triangle" else np.zeros((1, 2))
            x, n, _ = patch.evaluate(ref_c)
            flip = float(np.dot(n[0], x[0] - center)) < 0
            if flip:
                patch = Patch(pmap.with_flip(True), kind, order)
        patches.append(patch)
        conn.append(np.array(ntags))
        flipped.append(flip)
    return MeshModel(
        node_tags=tags,
        coordinates=coords,
        element_tags=np.array([e[0] for e in elements]),
        element_types=np.array([e[1] for e in elements]),
        connectivity=tuple(conn),
        patches=tuple(patches),
        flipped=np.array(flipped),
    )


def write_gmsh(path, coordinates, elements, etype: int):
    """Write a single-entity MSH 4.1 ASCII surface mesh.

    ``elements`` holds 1-based node tags in Gmsh node order.
    """
    coordinates = np.asarray(coordinates, dtype=float)
    elements = np.asarray(elements, dtype=np.int64)
    n, ne = len(coordinates), len(elements)
    out = ["$MeshFormat", "4.1 0 8", "$EndMeshFormat",
           "$Nodes", f"1 {n} 1 {n}", f"2 1 0 {n}"]
    out += [str(k + 1) for k in range(n)]
    out += [" ".join(repr(float(c)) for c in xyz) for xyz in coordinates]
    out += ["$EndNodes", "$Elements", f"1 {ne} 1 {ne}", f"2 1 {etype} {ne}"]
    out += [" ".join(str(v) for v in [k + 1, *row]) for k, row in enumerate(elements)]
    out += ["$EndElements", ""]
    Path(path).write_text("\n".join(out))


_TRIANGLE_TYPE = {1: 2, 2: 9, 3: 21}


def _icosahedron():
    g = (1 + np.sqrt(5)) / 2
    v = np.array([[-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0], [0, -1, g], [0, 1, g],
                  [0, -1, -g], [0, 1, -g], [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1]], dtype=float)
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4), (11, 10, 2),
         (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5),
         (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    return v / np.linalg.norm(v[0]), f


def icosphere(frequency: int, order: int = 1, radius: float = 1.0):
    """Geodesic sphere: every icosahedron face split into ``frequency**2`` triangles.

    Returns ``(coordinates, elements, gmsh_type)``; ``elements`` holds 1-based
    node tags in Gmsh order and every node lies on the sphere, so order 1
    gives flat facets and higher orders curved ones.
    """
    if frequency < 1 or order not in _TRIANGLE_TYPE:
        raise ValueError("need frequency >= 1 and order in 1..3")
    verts, faces = _icosahedron()
    layout = np.rint(LAGRANGE_LAYOUTS[("triangle", order)] * order).astype(int)
    F = frequency * order
    keys, coords, elements = {}, [], []

    def node(a, b, c, i, j):
        x = a + (b - a) * (i / F) + (c - a) * (j / F)
        key = tuple(np.round(x, 9))
        if key not in keys:
            keys[key] = len(coords) + 1
            coords.append(radius * x / np.linalg.norm(x))
        return keys[key]

    for ia, ib, ic in faces:
        a, b, c = verts[ia], verts[ib], verts[ic]
        for i in range(frequency):
            for j in range(frequency - i):
                corners = [((i, j), (i + 1, j), (i, j + 1))]
                if i + j + 1 < frequency:
                    corners.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
                for c0, c1, c2 in corners:
                    c0, c1, c2 = np.array(c0), np.array(c1), np.array(c2)
                    tags = [node(a, b, c, *(order * c0 + u * (c1 - c0) + v * (c2 - c0))) for u, v in layout]
                    elements.append(tags)
    return np.array(coords), np.array(elements), _TRIANGLE_TYPE[order]


def write_icosphere(path, frequency: int, order: int = 1, radius: float = 1.0):
    coords, elements, etype = icosphere(frequency, order, radius)
    write_gmsh(path, coords, elements, etype)
    return path
