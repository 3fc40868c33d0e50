"""
Reading and writing meshes, vertex functions and the CSV exports.

Mesh files are JSON objects::

    {
        "vertices": 4,
        "faces": [[0, 1, 2], [0, 2, 3]],
        "positions": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        "model": "euclidean",
        "lengths": {"0-1": 1.0, ...}
    }

``positions`` and ``lengths`` are optional and independent of each other. With
``"model": "poincare"`` the positions are read as points of the Poincaré disk.
Floats are written in their shortest round-trip form.
"""
import csv
import json
from typing import Any, Dict, Mapping, Optional

from attr import attrs

from .complex import PlanarEmbedding, Triangulation, edge_key
from .exceptions import MeshFormatError
from .flow import FlowTrajectory
from .hyperbolic import DiskEmbedding
from .layout import DilatationReport
from .metric import ConformalFactor, Curvature, EdgeWeights, PLMetric, curvature


@attrs(auto_attribs=True, frozen=True)
class Mesh:
    triangulation: Triangulation
    embedding: Optional[PlanarEmbedding] = None
    metric: Optional[PLMetric] = None

    def require_embedding(self) -> PlanarEmbedding:
        if self.embedding is None:
            raise MeshFormatError("the mesh file has no positions")
        return self.embedding

    def require_metric(self) -> PLMetric:
        """
        The stored lengths, or else the lengths induced by the stored positions.
        """
        if self.metric is not None:
            return self.metric
        elif self.embedding is not None:
            return PLMetric.from_embedding(self.embedding)
        else:
            raise MeshFormatError("the mesh file has neither lengths nor positions")


def read_mesh(path: str) -> Mesh:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise MeshFormatError(f"{path}: not valid JSON ({e})") from None

    return mesh_from_json(data, source=path)


def mesh_from_json(data: Any, *, source: str = "<mesh>") -> Mesh:
    if not isinstance(data, dict):
        raise MeshFormatError(f"{source}: expected a JSON object")

    count = data.get("vertices")
    faces = data.get("faces")
    if not isinstance(count, int) or count < 3:
        raise MeshFormatError(f"{source}: 'vertices' must be an integer >= 3")
    if not isinstance(faces, list):
        raise MeshFormatError(f"{source}: 'faces' must be a list")

    for face in faces:
        if not isinstance(face, list) or any(
            not isinstance(i, int) or not 0 <= i < count for i in face
        ):
            raise MeshFormatError(f"{source}: bad face {face!r}")

    T = Triangulation(faces)
    missing = set(range(count)) - set(T.vertices)
    if missing:
        raise MeshFormatError(
            f"{source}: vertices {sorted(missing)} belong to no face"
        )

    embedding: Optional[PlanarEmbedding] = None
    if "positions" in data:
        positions = data["positions"]
        if not isinstance(positions, list) or len(positions) != count:
            raise MeshFormatError(f"{source}: 'positions' must list every vertex")

        try:
            points = [complex(float(x), float(y)) for x, y in positions]
        except (TypeError, ValueError):
            raise MeshFormatError(
                f"{source}: positions must be [x, y] pairs"
            ) from None

        model = data.get("model", "euclidean")
        if model == "euclidean":
            embedding = PlanarEmbedding(T, points)
        elif model == "poincare":
            embedding = DiskEmbedding(T, points)
        else:
            raise MeshFormatError(f"{source}: unknown model {model!r}")

    metric: Optional[PLMetric] = None
    if "lengths" in data:
        lengths = data["lengths"]
        if not isinstance(lengths, dict):
            raise MeshFormatError(f"{source}: 'lengths' must be an object")

        parsed = {}
        for key, value in lengths.items():
            try:
                i, j = (int(part) for part in key.split("-"))
                parsed[edge_key(i, j)] = float(value)
            except (TypeError, ValueError):
                raise MeshFormatError(
                    f"{source}: bad length entry {key!r}"
                ) from None
        metric = PLMetric(T, parsed)

    return Mesh(triangulation=T, embedding=embedding, metric=metric)


def write_mesh(
    path: str,
    T: Triangulation,
    *,
    embedding: Optional[PlanarEmbedding] = None,
    metric: Optional[PLMetric] = None,
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(mesh_to_json(T, embedding=embedding, metric=metric))


def mesh_to_json(
    T: Triangulation,
    *,
    embedding: Optional[PlanarEmbedding] = None,
    metric: Optional[PLMetric] = None,
) -> str:
    data: Dict[str, Any] = {
        "vertices": T.n_labels,
        "faces": [list(face) for face in T.faces],
    }
    if embedding is not None:
        data["positions"] = [
            [float(z.real), float(z.imag)] for z in embedding.positions
        ]
        data["model"] = embedding.model
    if metric is not None:
        data["lengths"] = {f"{i}-{j}": metric[i, j] for i, j in T.edges}

    return dump_json(data)


def read_factor(path: str) -> ConformalFactor:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise MeshFormatError(f"{path}: not valid JSON ({e})") from None

    if not isinstance(data, dict) or not isinstance(data.get("u"), dict):
        raise MeshFormatError(f"{path}: expected an object with a 'u' object")

    try:
        return {int(key): float(value) for key, value in data["u"].items()}
    except (TypeError, ValueError):
        raise MeshFormatError(f"{path}: bad vertex function entry") from None


def write_factor(path: str, u: Mapping[int, float]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_json({"u": {str(v): u[v] for v in sorted(u)}}))


def write_curvature_csv(path: str, K: Curvature) -> None:
    """
    One row per vertex: the curvature at interior vertices, the boundary turning
    ``pi - (angle sum)`` at boundary vertices.
    """
    values = {**K.interior, **K.boundary}
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["vertex", "K"])
        for v in sorted(values):
            writer.writerow([v, repr(float(values[v]))])


def write_weights_csv(path: str, weights: EdgeWeights) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "j", "mu"])
        for i, j in sorted(weights.mu):
            writer.writerow([i, j, repr(float(weights.mu[(i, j)]))])


def write_trajectory_csv(path: str, trajectory: FlowTrajectory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "vertex", "u", "K"])
        for state in trajectory.states:
            K = curvature(state.metric)
            values = {**K.interior, **K.boundary}
            t = repr(float(state.time))
            for v in sorted(state.u):
                u, k = float(state.u[v]), float(values[v])
                writer.writerow([t, v, repr(u), repr(k)])


def write_dilatation_csv(path: str, report: DilatationReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["face", "dilatation"])
        for face, value in enumerate(report.per_face):
            writer.writerow([face, repr(float(value))])


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def load_mesh_or_error(path: str) -> Mesh:
    """
    Like ``read_mesh``, but an unreadable file raises ``MeshFormatError``.
    """
    try:
        return read_mesh(path)
    except OSError as e:
        raise MeshFormatError(f"could not read {path}: {e.strerror}") from None
