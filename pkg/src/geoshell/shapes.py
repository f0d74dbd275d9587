"""Procedural closed meshes used by the tests and demos."""
import numpy as np

from .loop import subdivision_matrix
from .mesh import Shell, Topology


def icosahedron(radius=1.0):
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    v *= radius / np.linalg.norm(v[0])
    top = Topology(12, f)
    return Shell(top, v)


def icosphere(level, radius=1.0):
    """Icosahedron split ``level`` times (midpoint split), projected to the sphere."""
    s = icosahedron(radius)
    top, x = s.topology, s.positions
    for _ in range(level):
        fine, _, _ = subdivision_matrix(top)
        e = top.edges
        mid = 0.5 * (x[e[:, 0]] + x[e[:, 1]])
        x = np.vstack([x, mid])
        top = fine
        x = radius * x / np.linalg.norm(x, axis=1, keepdims=True)
    return Shell(top, x)


def tube(n_around=8, n_rings=12, length=4.0, radius=0.5):
    """Closed capped cylinder along z; cap vertices have valence ``n_around``.

    Vertex 0 is the bottom cap, the last vertex the top cap, rings in between.
    """
    verts = [[0.0, 0.0, -0.5 * radius]]
    zs = np.linspace(0.0, length, n_rings)
    for r, z in enumerate(zs):
        shift = 0.5 * (r % 2)
        for i in range(n_around):
            a = 2 * np.pi * (i + shift) / n_around
            verts.append([radius * np.cos(a), radius * np.sin(a), z])
    verts.append([0.0, 0.0, length + 0.5 * radius])
    top_id = len(verts) - 1

    def vid(r, i):
        return 1 + r * n_around + i % n_around

    faces = []
    for i in range(n_around):
        faces.append([0, vid(0, i + 1), vid(0, i)])
        faces.append([top_id, vid(n_rings - 1, i), vid(n_rings - 1, i + 1)])
    for r in range(n_rings - 1):
        for i in range(n_around):
            a, b = vid(r, i), vid(r, i + 1)
            c, d = vid(r + 1, i), vid(r + 1, i + 1)
            if r % 2 == 0:
                faces += [[a, b, c], [b, d, c]]
            else:
                faces += [[a, b, d], [a, d, c]]
    return Shell(Topology(len(verts), faces), np.array(verts))


def bend(shell, angle, length=None, axis_min=None):
    """Bend a z-aligned shape around the y axis so its centre line spans ``angle``."""
    x = np.array(shell.positions)
    z0 = x[:, 2].min() if axis_min is None else axis_min
    L = (x[:, 2].max() - z0) if length is None else length
    if abs(angle) < 1e-14:
        return Shell(shell.topology, x)
    R = L / angle
    zc = x[:, 2] - z0
    theta = zc / R
    rr = R - x[:, 0]
    out = np.empty_like(x)
    out[:, 0] = R - rr * np.cos(theta)
    out[:, 1] = x[:, 1]
    out[:, 2] = z0 + rr * np.sin(theta)
    return Shell(shell.topology, out)


def bent_bar(angle, n_around=6, n_rings=8, length=3.0, radius=0.4):
    """Small closed bar bent by ``angle`` radians; a standard physical test pair member."""
    return bend(tube(n_around, n_rings, length, radius), angle)


def cactus(angle=0.0, n_around=10, n_rings=26):
    """Cactus-scale capped tube (262 vertices by default), optionally bent."""
    return bend(tube(n_around, n_rings, length=6.0, radius=0.6), angle)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d]])
