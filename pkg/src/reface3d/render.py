"""2D frontal face images from 3D T1w volumes.

The pipeline mirrors the manual face-generation workflow: winsorize at 3000,
histogram-equalize to [0, 255], Gaussian-smooth, run marching cubes at a
manually chosen threshold, then rasterize the mesh orthographically along
the anterior axis with matte (ambient + Lambert) shading on a black
background. Candidate renders at the five standard thresholds support the
manual threshold pick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DegenerateRange, EmptySurface
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE
from .nifti import NiftiImage
from .volume import winsorize

CANDIDATE_THRESHOLDS = (80, 90, 100, 110, 120)
RENDER_CAP = 3000.0

AMBIENT = 0.15
DIFFUSE = 0.85


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh in world coordinates (mm)."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    normals: np.ndarray  # (V, 3) float64, unit length

    def __post_init__(self):
        if len(self.triangles) and self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle index out of range")

    @property
    def edge_count(self) -> int:
        edges = set()
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                edges.add((min(u, v), max(u, v)))
        return len(edges)

    def euler_characteristic(self) -> int:
        return len(self.vertices) - self.edge_count + len(self.triangles)

    def surface_area(self) -> float:
        p = self.vertices[self.triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return float(0.5 * np.linalg.norm(cross, axis=1).sum())


@dataclass(frozen=True)
class RenderParams:
    image_size: int = 512
    light_direction: tuple[float, float, float] = (0.3, 0.3, -1.0)  # view space, travel dir
    margin: float = 0.05
    # (center_u, center_v, pixels-per-mm) in view space; None = auto-fit the bbox
    framing: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.image_size < 64:
            raise ValueError("image_size must be >= 64")


def equalize_histogram(img: NiftiImage, bins: int = 256) -> NiftiImage:
    """Histogram-equalize over nonzero voxels to the [0, 255] range.

    The remap is the (monotone) empirical CDF, so voxel rank order is
    preserved; zero voxels (air) stay zero.
    """
    data = img.data
    nonzero = data[data != 0]
    if nonzero.size == 0 or float(data.max()) == float(data.min()):
        raise DegenerateRange("constant volume cannot be equalized")
    lo, hi = float(nonzero.min()), float(nonzero.max())
    out = np.zeros_like(data)
    mask = data != 0
    if hi == lo:
        out[mask] = 255.0
        return img.with_data(out)
    hist, _ = np.histogram(nonzero, bins=bins, range=(lo, hi))
    cdf = np.cumsum(hist) / nonzero.size
    idx = np.clip(((data[mask] - lo) / (hi - lo) * bins).astype(np.int64), 0, bins - 1)
    out[mask] = (255.0 * cdf[idx]).astype(np.float32)
    return img.with_data(out)


def gaussian_smooth(img: NiftiImage, sigma: float = 1.0) -> NiftiImage:
    """Separable Gaussian blur (kernel truncated at 3 sigma, unit mass)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    smoothed = ndimage.gaussian_filter(img.data, sigma=sigma, truncate=3.0, mode="nearest")
    return img.with_data(smoothed)


def marching_cubes(img: NiftiImage, threshold: float) -> TriMesh:
    """Isosurface of {value >= threshold} via the 256-case table.

    Vertices are welded on shared grid edges and transformed to world
    coordinates through the affine; per-vertex normals are area-weighted
    triangle normals pointing toward the low-intensity side (out of the
    head).
    """
    data = np.asarray(img.data, dtype=np.float64)
    if not float(data.min()) < threshold < float(data.max()):
        raise EmptySurface(
            f"threshold {threshold} outside volume range "
            f"[{float(data.min())}, {float(data.max())}]"
        )

    below = data < threshold
    # cube index per cell: bit i set when corner i is below the threshold
    nx, ny, nz = (d - 1 for d in data.shape)
    cube_idx = np.zeros((nx, ny, nz), dtype=np.uint16)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        cube_idx |= (below[dx : dx + nx, dy : dy + ny, dz : dz + nz] << bit).astype(np.uint16)
    edge_lut = np.asarray(EDGE_TABLE, dtype=np.uint16)
    active = np.argwhere(edge_lut[cube_idx] != 0)
    if active.size == 0:
        raise EmptySurface("no cube is crossed by the threshold")

    vert_ids: dict[tuple[int, int, int, int], int] = {}
    positions: list[np.ndarray] = []
    triangles: list[tuple[int, int, int]] = []

    def edge_vertex(cx: int, cy: int, cz: int, edge: int) -> int:
        ca, cb = EDGE_CORNERS[edge]
        ax, ay, az = CORNER_OFFSETS[ca]
        bx, by, bz = CORNER_OFFSETS[cb]
        pa = (cx + ax, cy + ay, cz + az)
        pb = (cx + bx, cy + by, cz + bz)
        va, vb = data[pa], data[pb]
        t = 0.5 if vb == va else (threshold - va) / (vb - va)
        # when the surface passes exactly through a grid corner, weld there so
        # every incident edge shares one vertex (keeps the mesh manifold)
        if t <= 0.0:
            key = ("c", *pa)
        elif t >= 1.0:
            key = ("c", *pb)
        else:
            axis = 0 if ax != bx else (1 if ay != by else 2)
            key = ("e", min(pa[0], pb[0]), min(pa[1], pb[1]), min(pa[2], pb[2]), axis)
        vid = vert_ids.get(key)
        if vid is None:
            positions.append(np.array(pa, dtype=np.float64) * (1.0 - t) + np.array(pb) * t)
            vid = len(positions) - 1
            vert_ids[key] = vid
        return vid

    for cx, cy, cz in active:
        row = TRI_TABLE[cube_idx[cx, cy, cz]]
        for i in range(0, len(row), 3):
            a = edge_vertex(cx, cy, cz, row[i])
            b = edge_vertex(cx, cy, cz, row[i + 1])
            c = edge_vertex(cx, cy, cz, row[i + 2])
            if a != b and b != c and a != c:
                triangles.append((a, b, c))

    tris = np.asarray(triangles, dtype=np.int32)
    if tris.size == 0:
        raise EmptySurface("all candidate triangles were degenerate")
    verts_vox = np.asarray(positions)
    # drop vertices orphaned by degenerate-triangle filtering
    used = np.unique(tris)
    remap = np.full(len(verts_vox), -1, dtype=np.int32)
    remap[used] = np.arange(len(used), dtype=np.int32)
    verts_vox = verts_vox[used]
    tris = remap[tris]
    affine = np.asarray(img.affine, dtype=np.float64)
    verts = verts_vox @ affine[:3, :3].T + affine[:3, 3]

    p = verts[tris]
    face_normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])  # area-weighted
    normals = np.zeros_like(verts)
    for corner in range(3):
        np.add.at(normals, tris[:, corner], face_normals)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(norms == 0, 1.0, norms)
    return TriMesh(vertices=verts, triangles=tris, normals=normals)


def _view_transform(vertices: np.ndarray, normals: np.ndarray):
    """World (RAS) -> view space for a frontal (anterior) camera.

    The camera sits at +y looking toward -y: u = -x (subject's right on the
    image's left, as in a photograph), v = +z (up), depth = +y toward the
    viewer.
    """
    view = np.empty_like(vertices)
    view[:, 0] = -vertices[:, 0]
    view[:, 1] = vertices[:, 2]
    view[:, 2] = vertices[:, 1]
    nrm = np.empty_like(normals)
    nrm[:, 0] = -normals[:, 0]
    nrm[:, 1] = normals[:, 2]
    nrm[:, 2] = normals[:, 1]
    return view, nrm


def render_frontal(mesh: TriMesh, params: RenderParams = RenderParams()) -> np.ndarray:
    """Z-buffered orthographic rasterization with matte shading.

    Shade = AMBIENT + DIFFUSE * max(0, n . -light); normals are interpolated
    per pixel and renormalized. Returns a (size, size) uint8 image, black
    background.
    """
    if len(mesh.triangles) == 0:
        raise EmptySurface("empty mesh")
    size = params.image_size
    view, nrm = _view_transform(mesh.vertices, mesh.normals)
    light = np.asarray(params.light_direction, dtype=np.float64)
    light = light / np.linalg.norm(light)

    if params.framing is not None:
        center = np.array(params.framing[:2], dtype=np.float64)
        scale = float(params.framing[2])
    else:
        lo = view[:, :2].min(axis=0)
        hi = view[:, :2].max(axis=0)
        extent = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
        scale = size * (1.0 - 2.0 * params.margin) / extent
        center = (lo + hi) / 2.0

    # pixel coords: u right, v down
    px = (view[:, 0] - center[0]) * scale + size / 2.0
    py = size / 2.0 - (view[:, 1] - center[1]) * scale
    depth_v = view[:, 2]

    shade_buf = np.zeros((size, size), dtype=np.float64)
    z_buf = np.full((size, size), -np.inf)

    for a, b, c in mesh.triangles:
        xs = np.array([px[a], px[b], px[c]])
        ys = np.array([py[a], py[b], py[c]])
        x0 = max(int(np.floor(xs.min())), 0)
        x1 = min(int(np.ceil(xs.max())) + 1, size)
        y0 = max(int(np.floor(ys.min())), 0)
        y1 = min(int(np.ceil(ys.max())) + 1, size)
        if x0 >= x1 or y0 >= y1:
            continue
        denom = (ys[1] - ys[2]) * (xs[0] - xs[2]) + (xs[2] - xs[1]) * (ys[0] - ys[2])
        if abs(denom) < 1e-12:
            continue
        gx, gy = np.meshgrid(
            np.arange(x0, x1, dtype=np.float64) + 0.5,
            np.arange(y0, y1, dtype=np.float64) + 0.5,
        )
        w0 = ((ys[1] - ys[2]) * (gx - xs[2]) + (xs[2] - xs[1]) * (gy - ys[2])) / denom
        w1 = ((ys[2] - ys[0]) * (gx - xs[2]) + (xs[0] - xs[2]) * (gy - ys[2])) / denom
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        z = w0 * depth_v[a] + w1 * depth_v[b] + w2 * depth_v[c]
        sub_z = z_buf[y0:y1, x0:x1]
        update = inside & (z > sub_z)
        if not update.any():
            continue
        n = (
            w0[..., None] * nrm[a]
            + w1[..., None] * nrm[b]
            + w2[..., None] * nrm[c]
        )
        n_len = np.linalg.norm(n, axis=-1)
        n_len = np.where(n_len == 0, 1.0, n_len)
        lambert = np.maximum(0.0, -(n @ light) / n_len)
        shade = AMBIENT + DIFFUSE * lambert
        sub_z[update] = z[update]
        shade_buf[y0:y1, x0:x1][update] = shade[update]

    return np.clip(np.rint(shade_buf * 255.0), 0, 255).astype(np.uint8)


def preprocess_for_render(img: NiftiImage, cap: float = RENDER_CAP, sigma: float = 1.0) -> NiftiImage:
    """Winsorize -> equalize -> smooth, the standard pre-mesh conditioning."""
    return gaussian_smooth(equalize_histogram(winsorize(img, cap)), sigma=sigma)


def candidate_renders(
    img: NiftiImage, params: RenderParams = RenderParams()
) -> list[tuple[int, np.ndarray]]:
    """Renders at the five candidate thresholds for manual selection.

    Expects a volume already conditioned by preprocess_for_render.
    """
    return [(t, render_frontal(marching_cubes(img, t), params)) for t in CANDIDATE_THRESHOLDS]


def save_png(image: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(path, format="PNG")


def save_obj(mesh: TriMesh, path) -> None:
    """ASCII OBJ export with per-vertex normals (v/vn/f records)."""
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for x, y, z in mesh.normals:
            fh.write(f"vn {x:.6f} {y:.6f} {z:.6f}\n")
        for a, b, c in mesh.triangles + 1:
            fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
