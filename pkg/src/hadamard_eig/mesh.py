"""Triangulated polygonal reference domains with a Dirichlet/Neumann boundary split."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "BoundaryTag",
    "Mesh",
    "MeshFormatError",
    "MeshValidationError",
    "generate_rect_mesh",
    "side_tagger",
    "validate_mesh",
    "load_mesh",
    "save_mesh",
]


class BoundaryTag(enum.Enum):
    DIRICHLET = "D"
    NEUMANN = "N"

    @classmethod
    def parse(cls, value) -> "BoundaryTag":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        if key in ("D", "DIRICHLET"):
            return cls.DIRICHLET
        if key in ("N", "NEUMANN"):
            return cls.NEUMANN
        raise ValueError(f"unknown boundary tag {value!r}")


class MeshFormatError(ValueError):
    """Malformed mesh text. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class MeshValidationError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid mesh: " + "; ".join(violations))


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangle mesh.

    ``vertices`` is (N, 2), ``triangles`` is (M, 3) with counterclockwise
    vertex order, ``boundary_edges`` is (E, 2) and ``boundary_tags`` holds one
    :class:`BoundaryTag` per boundary edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices, float).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_tags", tuple(BoundaryTag.parse(t) for t in self.boundary_tags))
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise ValueError("boundary_tags and boundary_edges differ in length")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def dirichlet_vertices(self) -> np.ndarray:
        """Sorted indices of vertices touching a DIRICHLET edge."""
        mask = np.array([t is BoundaryTag.DIRICHLET for t in self.boundary_tags], dtype=bool)
        return np.unique(self.boundary_edges[mask].ravel()) if mask.any() else np.zeros(0, np.int64)

    def free_vertices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_vertices), self.dirichlet_vertices())

    @property
    def has_dirichlet(self) -> bool:
        return any(t is BoundaryTag.DIRICHLET for t in self.boundary_tags)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and self.boundary_tags == other.boundary_tags
        )

    __hash__ = None


Tagger = Union[BoundaryTag, str, Callable[[float, float], object]]


def side_tagger(left="D", right="D", bottom="D", top="D", width=1.0, height=1.0, atol=1e-12):
    """Tag rule for a rectangle by side; corners go to the first matching side."""
    sides = {k: BoundaryTag.parse(v) for k, v in
             dict(left=left, right=right, bottom=bottom, top=top).items()}

    def rule(x, y):
        if abs(x) <= atol:
            return sides["left"]
        if abs(x - width) <= atol:
            return sides["right"]
        if abs(y) <= atol:
            return sides["bottom"]
        if abs(y - height) <= atol:
            return sides["top"]
        raise ValueError(f"edge midpoint ({x}, {y}) is not on the rectangle boundary")

    return rule


def generate_rect_mesh(nx: int, ny: int, width: float = 1.0, height: float = 1.0,
                       tagger: Tagger = BoundaryTag.DIRICHLET) -> Mesh:
    """Crisscross triangulation of ``[0, width] x [0, height]``.

    Every cell is split into four triangles through its center, which keeps
    the mesh invariant under the symmetries of the square.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    if not (width > 0 and height > 0):
        raise ValueError(f"width and height must be positive, got {width}, {height}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    corners = np.column_stack([gx.ravel(), gy.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    hx, hy = np.meshgrid(cx, cy, indexing="xy")
    centers = np.column_stack([hx.ravel(), hy.ravel()])
    vertices = np.vstack([corners, centers])

    def node(i, j):
        return j * (nx + 1) + i

    n_corner = (nx + 1) * (ny + 1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            bl, br = node(i, j), node(i + 1, j)
            tl, tr = node(i, j + 1), node(i + 1, j + 1)
            c = n_corner + j * nx + i
            tris += [(bl, br, c), (br, tr, c), (tr, tl, c), (tl, bl, c)]

    edges = []
    edges += [(node(i, 0), node(i + 1, 0)) for i in range(nx)]
    edges += [(node(nx, j), node(nx, j + 1)) for j in range(ny)]
    edges += [(node(i + 1, ny), node(i, ny)) for i in reversed(range(nx))]
    edges += [(node(0, j + 1), node(0, j)) for j in reversed(range(ny))]

    if callable(tagger) and not isinstance(tagger, BoundaryTag):
        tags = []
        for a, b in edges:
            mid = 0.5 * (vertices[a] + vertices[b])
            tags.append(BoundaryTag.parse(tagger(float(mid[0]), float(mid[1]))))
    else:
        tags = [BoundaryTag.parse(tagger)] * len(edges)

    return Mesh(vertices, np.array(tris), np.array(edges), tuple(tags))


def validate_mesh(mesh: Mesh) -> list[str]:
    """List of invariant violations; empty when the mesh is valid."""
    out = []
    nv = mesh.n_vertices
    tris = mesh.triangles
    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        out.append("triangle vertex index out of range")
        return out
    areas = mesh.signed_areas()
    for k in np.flatnonzero(~(areas > 0)):
        out.append(f"triangle {k} has non-positive area {areas[k]:.3e}")

    counts = Counter()
    for tri in tris.tolist():
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            counts[(min(a, b), max(a, b))] += 1
    for e, c in counts.items():
        if c > 2:
            out.append(f"edge {e} belongs to {c} triangles")
    topo = {e for e, c in counts.items() if c == 1}

    tagged = {}
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        e = (int(min(a, b)), int(max(a, b)))
        if e in tagged:
            if tagged[e] is not tag:
                out.append(f"boundary edge {e} carries both tags")
            else:
                out.append(f"boundary edge {e} is listed twice")
        tagged[e] = tag
        if e not in counts:
            out.append(f"tagged edge {e} is not an edge of the mesh")
        elif counts[e] != 1:
            out.append(f"tagged edge {e} is an interior edge")
    for e in sorted(topo - set(tagged)):
        out.append(f"boundary edge {e} is untagged")
    return out


def save_mesh(mesh: Mesh) -> str:
    lines = [f"# mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
             f"{len(mesh.boundary_edges)} boundary edges"]
    lines += [f"v {x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"t {i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"e {i} {j} {tag.value}" for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags)]
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    verts, tris, edges, tags = [], [], [], []
    tri_lines, edge_lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        try:
            if kind == "v":
                if len(args) != 2:
                    raise MeshFormatError("vertex record needs 2 coordinates", lineno)
                verts.append((float(args[0]), float(args[1])))
            elif kind == "t":
                if len(args) != 3:
                    raise MeshFormatError("triangle record needs 3 indices", lineno)
                tris.append(tuple(int(a) for a in args))
                tri_lines.append(lineno)
            elif kind == "e":
                if len(args) != 3:
                    raise MeshFormatError("edge record needs 2 indices and a tag", lineno)
                edges.append((int(args[0]), int(args[1])))
                tags.append(BoundaryTag.parse(args[2]))
                edge_lines.append(lineno)
            else:
                raise MeshFormatError(f"unknown record type {kind!r}", lineno)
        except MeshFormatError:
            raise
        except ValueError as exc:
            raise MeshFormatError(str(exc), lineno) from None

    nv = len(verts)
    for rec, ln in zip(tris, tri_lines):
        if any(i < 0 or i >= nv for i in rec):
            raise MeshFormatError(f"triangle index out of range (have {nv} vertices)", ln)
    for rec, ln in zip(edges, edge_lines):
        if any(i < 0 or i >= nv for i in rec):
            raise MeshFormatError(f"edge index out of range (have {nv} vertices)", ln)

    mesh = Mesh(np.array(verts, float).reshape(-1, 2), np.array(tris, np.int64).reshape(-1, 3),
                np.array(edges, np.int64).reshape(-1, 2), tuple(tags))
    problems = validate_mesh(mesh)
    if problems:
        raise MeshValidationError(problems)
    return mesh
