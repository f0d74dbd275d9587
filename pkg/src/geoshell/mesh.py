"""Triangle-mesh shells: connectivity, positions, displacements and OBJ I/O.

All shells of one shape space share a :class:`Topology`; a :class:`Shell` is a
point of that space (one position per control vertex) and a
:class:`Displacement` is the difference of two shells.
"""
from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (CorrespondenceError, InadmissibleStateError,
                     ObjIndexError, ObjParseError, UnsupportedFaceError,
                     UnsupportedMeshError)

__all__ = [
    "Topology", "Shell", "Displacement", "DiscretePath",
    "load_obj", "save_obj", "read_obj", "write_obj",
    "load_displacement", "save_displacement",
    "check_correspondence", "require_correspondence", "frame_name",
]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Topology:
    """Immutable triangle connectivity over ``n_vertices`` vertices.

    Faces are 0-based index triples.  Construction verifies index range,
    manifoldness (an edge has at most two faces) and consistent orientation
    (each directed edge occurs at most once).
    """

    __slots__ = ("n_vertices", "faces", "__dict__")

    def __init__(self, n_vertices, faces):
        n_vertices = int(n_vertices)
        if n_vertices <= 0:
            raise UnsupportedMeshError("vertex count must be positive")
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= n_vertices):
            raise UnsupportedMeshError("face index out of range")
        if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                  | (faces[:, 2] == faces[:, 0])):
            raise UnsupportedMeshError("face with repeated vertex")
        self.n_vertices = n_vertices
        self.faces = _readonly(faces)
        self._check_manifold()

    def _check_manifold(self):
        he = self.halfedges
        if len(he):
            keys = he[:, 0] * self.n_vertices + he[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise UnsupportedMeshError(
                    "non-manifold or inconsistently oriented mesh: "
                    "a directed edge is used twice")

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self is other or (self.n_vertices == other.n_vertices
                                  and np.array_equal(self.faces, other.faces)))

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Topology(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def key(self):
        h = hashlib.sha1(np.int64(self.n_vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()

    @cached_property
    def halfedges(self):
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    @cached_property
    def opposite(self):
        """Map directed edge ``(a, b)`` to the third vertex of its face."""
        f = self.faces
        out = {}
        for a, b, c in f.tolist():
            out[(a, b)] = c
            out[(b, c)] = a
            out[(c, a)] = b
        return out

    @cached_property
    def edges(self):
        """Unique undirected edges as sorted pairs, lexicographically ordered."""
        he = np.sort(self.halfedges, axis=1)
        return _readonly(np.unique(he, axis=0))

    @cached_property
    def edge_index(self):
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges.tolist())}

    @cached_property
    def edge_faces(self):
        """``(E, 2)`` incident faces per edge; ``-1`` marks a boundary side."""
        ef = -np.ones((len(self.edges), 2), dtype=np.int64)
        idx = self.edge_index
        for fi, (a, b, c) in enumerate(self.faces.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                e = idx[(u, v) if u < v else (v, u)]
                ef[e, 0 if u < v else 1] = fi
        return _readonly(ef)

    @cached_property
    def is_closed(self):
        return bool(np.all(self.edge_faces >= 0)) and self.n_faces > 0

    @cached_property
    def valence(self):
        e = self.edges
        return _readonly(np.bincount(e.ravel(), minlength=self.n_vertices))

    @cached_property
    def rings(self):
        """Counter-clockwise 1-ring per vertex, ``None`` for boundary vertices."""
        opp = self.opposite
        first = {}
        for a, b in opp:
            first.setdefault(a, b)
        rings = []
        for v in range(self.n_vertices):
            start = first.get(v)
            if start is None:
                rings.append(None)
                continue
            ring = [start]
            while True:
                nxt = opp.get((v, ring[-1]))
                if nxt is None:
                    ring = None
                    break
                if nxt == start:
                    break
                ring.append(nxt)
                if len(ring) > self.n_vertices:
                    raise UnsupportedMeshError(f"corrupt fan at vertex {v}")
            rings.append(ring)
        return rings

    def one_ring(self, v):
        """Neighbours of interior vertex ``v`` in counter-clockwise order."""
        ring = self.rings[v]
        if ring is None:
            raise UnsupportedMeshError(f"vertex {v} lies on the boundary or is isolated")
        return list(ring)


class _PointSet:
    __slots__ = ("topology", "_data")

    def __init__(self, topology, data):
        data = np.asarray(data, dtype=float)
        if data.size != 3 * topology.n_vertices:
            raise ValueError(
                f"expected {3 * topology.n_vertices} coordinates, got {data.size}")
        self.topology = topology
        self._data = _readonly(data.reshape(topology.n_vertices, 3))

    def __len__(self):
        return self.topology.n_vertices

    def _check(self, other):
        if other.topology != self.topology:
            raise CorrespondenceError("operands live on different topologies")

    @property
    def flat(self):
        return self._data.reshape(-1)


class Shell(_PointSet):
    """Control-mesh positions on a fixed :class:`Topology`."""

    __slots__ = ()

    def __init__(self, topology, positions, check=True):
        super().__init__(topology, positions)
        if check:
            area = face_areas(self._data, topology.faces)
            if not np.all(np.isfinite(self._data)):
                raise InadmissibleStateError("non-finite vertex position")
            if len(area) and area.min() <= 0.0:
                raise InadmissibleStateError(
                    f"degenerate face {int(np.argmin(area))} (zero area)")

    @property
    def positions(self):
        return self._data

    def __sub__(self, other):
        if isinstance(other, Shell):
            self._check(other)
            return Displacement(self.topology, self._data - other._data)
        if isinstance(other, Displacement):
            self._check(other)
            return Shell(self.topology, self._data - other._data, check=False)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Displacement):
            self._check(other)
            return Shell(self.topology, self._data + other._data, check=False)
        return NotImplemented

    def __repr__(self):
        return f"Shell({self.topology!r})"

    def moved(self, rotation=None, translation=None):
        """Rigidly transformed copy ``R x + b``."""
        x = self._data
        if rotation is not None:
            x = x @ np.asarray(rotation).T
        if translation is not None:
            x = x + np.asarray(translation)
        return Shell(self.topology, x, check=False)

    @property
    def scale(self):
        """Bounding-box diagonal, used to scale absolute tolerances."""
        return float(np.linalg.norm(self._data.max(0) - self._data.min(0)))


class Displacement(_PointSet):
    """Per-vertex vectors; the discrete stand-in for a tangent vector."""

    __slots__ = ()

    @property
    def values(self):
        return self._data

    def __add__(self, other):
        if isinstance(other, Displacement):
            self._check(other)
            return Displacement(self.topology, self._data + other._data)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Displacement):
            self._check(other)
            return Displacement(self.topology, self._data - other._data)
        return NotImplemented

    def __neg__(self):
        return Displacement(self.topology, -self._data)

    def __mul__(self, c):
        return Displacement(self.topology, float(c) * self._data)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Displacement(self.topology, self._data / float(c))

    def norm(self):
        return float(np.linalg.norm(self._data))

    def rotated(self, rotation):
        return Displacement(self.topology, self._data @ np.asarray(rotation).T)

    def __repr__(self):
        return f"Displacement({self.topology!r}, norm={self.norm():.3g})"

    @classmethod
    def zeros(cls, topology):
        return cls(topology, np.zeros((topology.n_vertices, 3)))


@dataclass(frozen=True)
class DiscretePath:
    """Ordered shells ``(s_0, ..., s_K)`` on one topology, ``K >= 1``."""

    shells: tuple
    topology: Topology = field(init=False, repr=False)

    def __post_init__(self):
        shells = tuple(self.shells)
        if len(shells) < 2:
            raise ValueError("a discrete path needs at least two shells")
        top = shells[0].topology
        for s in shells[1:]:
            if s.topology != top:
                raise CorrespondenceError("path shells differ in topology")
        object.__setattr__(self, "shells", shells)
        object.__setattr__(self, "topology", top)

    @property
    def steps(self):
        return len(self.shells) - 1

    def __len__(self):
        return len(self.shells)

    def __getitem__(self, k):
        return self.shells[k]

    def __iter__(self):
        return iter(self.shells)

    def reversed(self):
        return DiscretePath(self.shells[::-1])


def face_areas(x, faces):
    if len(faces) == 0:
        return np.zeros(0)
    e1 = x[faces[:, 1]] - x[faces[:, 0]]
    e2 = x[faces[:, 2]] - x[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def check_correspondence(a, b):
    """True iff both shells use equal topologies."""
    return a.topology == b.topology


def require_correspondence(*shells):
    top = shells[0].topology
    for s in shells[1:]:
        if s.topology != top:
            raise CorrespondenceError(
                f"shells are not in correspondence: {top!r} vs {s.topology!r}")
    return top


# -- OBJ ---------------------------------------------------------------------

def _text(stream):
    if isinstance(stream, (bytes, bytearray, memoryview)):
        return bytes(stream).decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _parse_vertices_and_faces(stream, want_faces=True):
    verts, faces, face_lines = [], [], []
    for lineno, raw in enumerate(io.StringIO(_text(stream)), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise ObjParseError("vertex record needs three coordinates", lineno)
            try:
                verts.append([float(c) for c in rest[:3]])
            except ValueError:
                raise ObjParseError(f"bad coordinate in {line!r}", lineno) from None
        elif tag == "f" and want_faces:
            if len(rest) != 3:
                raise UnsupportedFaceError(
                    f"only triangles are supported, got {len(rest)} vertices", lineno)
            try:
                idx = [int(tok.split("/")[0]) for tok in rest]
            except ValueError:
                raise ObjParseError(f"bad face index in {line!r}", lineno) from None
            faces.append(idx)
            face_lines.append(lineno)
        elif tag in ("vn", "vt", "vp", "o", "g", "s", "mtllib", "usemtl", "l", "f"):
            continue
        else:
            raise ObjParseError(f"unknown record {tag!r}", lineno)
    return verts, faces, face_lines


def load_obj(stream):
    """Parse an OBJ byte stream into ``(Shell, Topology)``."""
    verts, faces, face_lines = _parse_vertices_and_faces(stream)
    n = len(verts)
    if n == 0:
        raise ObjParseError("no vertices")
    out = []
    for idx, lineno in zip(faces, face_lines):
        tri = []
        for i in idx:
            j = i - 1 if i > 0 else n + i
            if i == 0 or not 0 <= j < n:
                raise ObjIndexError(f"vertex index {i} out of range 1..{n}", lineno)
            tri.append(j)
        out.append(tri)
    top = Topology(n, np.array(out, dtype=np.int64).reshape(-1, 3))
    return Shell(top, np.array(verts)), top


def save_obj(shell):
    """Serialize ``shell`` as OBJ bytes with round-trippable coordinates."""
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}"
             for x, y, z in shell.positions.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}"
              for a, b, c in shell.topology.faces.tolist()]
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_obj(path):
    with open(path, "rb") as fh:
        return load_obj(fh.read())


def write_obj(path, shell):
    with open(path, "wb") as fh:
        fh.write(save_obj(shell))


def save_displacement(disp):
    """Displacements are stored OBJ-style, one ``v dx dy dz`` line per vertex."""
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}"
             for x, y, z in disp.values.tolist()]
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_displacement(stream, topology):
    verts, _, _ = _parse_vertices_and_faces(stream, want_faces=False)
    if len(verts) != topology.n_vertices:
        raise CorrespondenceError(
            f"displacement has {len(verts)} vectors, topology has "
            f"{topology.n_vertices} vertices")
    return Displacement(topology, np.array(verts))


def frame_name(i):
    return f"frame_{i:04d}.obj"


def write_frames(directory, shells):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, s in enumerate(shells):
        p = os.path.join(directory, frame_name(i))
        write_obj(p, s)
        paths.append(p)
    return paths
