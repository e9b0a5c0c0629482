"""Uniform periodic triangulation of a rectangle.

Each of the ``nx * ny`` cells is split along its lower-left to upper-right
diagonal into a lower-right triangle (local index 0) and an upper-left
triangle (local index 1).  Element ``e`` of cell ``c = j * nx + i`` is
``2 * c + t``.  Local edge ``k`` of a triangle is the edge opposite local
vertex ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, MeshError


@dataclass(frozen=True)
class FaceSet:
    """Arrays describing faces shared by two elements.

    ``plus``/``minus`` are element indices, ``plus_edge``/``minus_edge`` the
    local edge numbers, ``normal`` is the unit normal pointing out of the
    ``plus`` element, and ``offset`` translates a point on the plus-side edge
    onto the matching point of the minus-side edge (zero for interior faces).
    """

    plus: np.ndarray
    plus_edge: np.ndarray
    minus: np.ndarray
    minus_edge: np.ndarray
    length: np.ndarray
    normal: np.ndarray
    offset: np.ndarray

    def __len__(self) -> int:
        return len(self.plus)

    @staticmethod
    def concatenate(*sets: "FaceSet") -> "FaceSet":
        names = ("plus", "plus_edge", "minus", "minus_edge", "length", "normal", "offset")
        return FaceSet(**{n: np.concatenate([getattr(s, n) for s in sets]) for n in names})


@dataclass(frozen=True)
class Mesh:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int
    vertices: np.ndarray  # (n_vertices, 2), unidentified grid points
    triangles: np.ndarray  # (n_K, 3) vertex indices, counter-clockwise
    interior: FaceSet = field(repr=False)
    periodic: FaceSet = field(repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def lx(self) -> float:
        return self.xmax - self.xmin

    @property
    def ly(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def element_vertices(self) -> np.ndarray:
        """Vertex coordinates of every element, shape ``(n_K, 3, 2)``."""
        return self.vertices[self.triangles]

    @property
    def element_areas(self) -> np.ndarray:
        return signed_areas(self.element_vertices)

    @property
    def faces(self) -> FaceSet:
        """Interior faces followed by periodic pairs."""
        return FaceSet.concatenate(self.interior, self.periodic)

    def edge_endpoints(self, element: int, local_edge: int) -> tuple[np.ndarray, np.ndarray]:
        v = self.element_vertices[element]
        return v[(local_edge + 1) % 3], v[(local_edge + 2) % 3]


def signed_areas(tri: np.ndarray) -> np.ndarray:
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    return 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                  - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))


def build_periodic_mesh(domain, nx: int, ny: int) -> Mesh:
    """Triangulate ``domain = (xmin, xmax, ymin, ymax)`` with ``2*nx*ny`` triangles."""
    xmin, xmax, ymin, ymax = (float(v) for v in domain)
    if not (np.isfinite([xmin, xmax, ymin, ymax]).all() and xmax > xmin and ymax > ymin):
        raise ConfigurationError(f"invalid domain bounds {domain!r}")
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ConfigurationError(f"need nx >= 2 and ny >= 2, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row j is y = ys[j]
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    ll, lr, ur, ul = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    interior, periodic = _classify(vertices, triangles, nx, ny, (xmax - xmin, ymax - ymin))
    return Mesh(xmin, xmax, ymin, ymax, nx, ny, vertices, triangles, interior, periodic)


def classify_edges(mesh: Mesh) -> tuple[FaceSet, FaceSet]:
    """Return ``(interior, periodic)`` face sets of ``mesh``."""
    return mesh.interior, mesh.periodic


def _classify(vertices, triangles, nx, ny, period):
    # key each edge by its midpoint in half-cell grid units, modulo the period
    gi = np.arange(len(vertices)) % (nx + 1)
    gj = np.arange(len(vertices)) // (nx + 1)

    slots: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e, tri in enumerate(triangles):
        for k in range(3):
            a, b = tri[(k + 1) % 3], tri[(k + 2) % 3]
            key = (int(gi[a] + gi[b]) % (2 * nx), int(gj[a] + gj[b]) % (2 * ny))
            slots.setdefault(key, []).append((e, k))

    interior_rows, periodic_rows = [], []
    for key, owners in slots.items():
        if len(owners) != 2:
            raise MeshError(f"edge {key} is shared by {len(owners)} triangles")
        (e1, k1), (e2, k2) = owners
        p1 = _edge_points(vertices, triangles, e1, k1)
        p2 = _edge_points(vertices, triangles, e2, k2)
        mid1, mid2 = p1.mean(axis=0), p2.mean(axis=0)
        shift = mid2 - mid1
        slot1, slot2 = 3 * e1 + k1, 3 * e2 + k2
        if np.allclose(shift, 0.0, atol=1e-12 * max(period)):
            plus, minus = sorted(owners)
            interior_rows.append((plus, minus))
        else:
            if not np.allclose(np.abs(shift), (period[0], 0.0)) and not np.allclose(
                    np.abs(shift), (0.0, period[1])):
                raise MeshError(f"boundary edges {owners} are not periodic translates")
            # plus side is the edge with the larger global slot index
            plus, minus = ((e1, k1), (e2, k2)) if slot1 > slot2 else ((e2, k2), (e1, k1))
            periodic_rows.append((plus, minus))

    interior_rows.sort()
    periodic_rows.sort()
    return (_face_set(vertices, triangles, interior_rows),
            _face_set(vertices, triangles, periodic_rows))


def _edge_points(vertices, triangles, e, k):
    tri = triangles[e]
    return vertices[[tri[(k + 1) % 3], tri[(k + 2) % 3]]]


def _face_set(vertices, triangles, rows) -> FaceSet:
    n = len(rows)
    plus = np.empty(n, dtype=np.int64)
    plus_edge = np.empty(n, dtype=np.int64)
    minus = np.empty(n, dtype=np.int64)
    minus_edge = np.empty(n, dtype=np.int64)
    length = np.empty(n)
    normal = np.empty((n, 2))
    offset = np.empty((n, 2))
    for r, ((ep, kp), (em, km)) in enumerate(rows):
        a, b = _edge_points(vertices, triangles, ep, kp)
        t = b - a
        h = np.hypot(*t)
        # counter-clockwise triangles: outward normal is the tangent rotated clockwise
        nrm = np.array([t[1], -t[0]]) / h
        pm = _edge_points(vertices, triangles, em, km)
        plus[r], plus_edge[r], minus[r], minus_edge[r] = ep, kp, em, km
        length[r] = h
        normal[r] = nrm
        offset[r] = pm.mean(axis=0) - (a + b) / 2
    return FaceSet(plus, plus_edge, minus, minus_edge, length, normal, offset)
