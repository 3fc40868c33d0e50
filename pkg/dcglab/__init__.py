from . import flow, harmonic, hyperbolic, layout, metric, network
from .complex import (
    OneRing,
    PlanarEmbedding,
    Triangulation,
    VertexSubset,
    build_triangulation,
    classify_subset,
    gen_hex_patch,
    gen_random_delaunay_disk,
    one_ring,
    subcomplex_generated_by,
)
from .exceptions import (
    CheckFailedError,
    DcglabApiError,
    DcglabError,
    DcglabWarning,
    HypothesisViolatedError,
    NumericalError,
)
from .formats import Mesh, read_mesh, write_mesh
from .hyperbolic import DiskEmbedding, PHMetric
from .metric import PLMetric
