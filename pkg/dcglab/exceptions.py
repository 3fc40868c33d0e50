from typing import Any, Iterable, List, Optional, Tuple


class DcglabError(Exception):
    pass


class DcglabApiError(DcglabError):
    pass


class DcglabWarning(UserWarning):
    pass


# Combinatorics of the triangulation.


class TopologyError(DcglabError):
    pass


class NonManifoldError(TopologyError):
    pass


class DisconnectedError(TopologyError):
    pass


class InconsistentOrientationError(TopologyError):
    def __init__(self, message: str, *, edge: Tuple[int, int]) -> None:
        super().__init__(message)
        self.edge = edge


class NotADiskError(TopologyError):
    pass


class EmptySubcomplexError(TopologyError):
    pass


# Geometry of metrics and embeddings.


class GeometryError(DcglabError):
    pass


class ViolatedTriangleInequalityError(GeometryError):
    def __init__(
        self, message: str, *, face: Tuple[int, int, int], metric: Any = None
    ) -> None:
        super().__init__(message)
        self.face = face
        # The offending metric, kept for inspection.
        self.metric = metric


class DegenerateInputError(GeometryError):
    pass


class DegenerateFaceError(GeometryError):
    def __init__(self, message: str, *, face: Tuple[int, int, int]) -> None:
        super().__init__(message)
        self.face = face


class OutsideDiskError(GeometryError):
    pass


class FoldOverError(GeometryError):
    def __init__(self, message: str, *, face: Tuple[int, int, int]) -> None:
        super().__init__(message)
        self.face = face


class NotFlatError(GeometryError):
    def __init__(self, message: str, *, vertex: int, curvature: float) -> None:
        super().__init__(message)
        self.vertex = vertex
        self.curvature = curvature


class NotConformalPairError(GeometryError):
    def __init__(self, message: str, *, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


class BadRadiiError(GeometryError):
    pass


# Numerical failures. The command-line tool exits with code 3 for these.


class NumericalError(DcglabError):
    pass


class NumericalFailureError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class StepFailureError(NumericalError):
    def __init__(self, message: str, *, time: float) -> None:
        super().__init__(message)
        self.time = time


class NoConvergenceError(NumericalError):
    def __init__(
        self, message: str, *, best: Any, residual: float, iterations: int
    ) -> None:
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class TriangleCollapseError(NumericalError):
    pass


class LeftDomainError(NumericalError):
    def __init__(self, message: str, *, time: float, norm: float) -> None:
        super().__init__(message)
        self.time = time
        self.norm = norm


class WeightDegenerateError(NumericalError):
    def __init__(self, message: str, *, edge: Tuple[int, int], weight: float) -> None:
        super().__init__(message)
        self.edge = edge
        self.weight = weight


class IterationLimitError(NumericalError):
    def __init__(self, message: str, *, best: Any) -> None:
        super().__init__(message)
        # A feasible (rescaled) solution, so the caller still gets an upper bound.
        self.best = best


# A hypothesis of a verified statement does not hold for the given input.


class HypothesisViolatedError(DcglabError):
    def __init__(
        self, message: str, *, hypothesis: str = "", witness: Optional[Any] = None
    ) -> None:
        super().__init__(message)
        self.hypothesis = hypothesis
        self.witness = witness


class ConditionViolatedError(HypothesisViolatedError):
    def __init__(self, message: str, *, spokes: Iterable[Tuple[int, int]]) -> None:
        spokes = list(spokes)
        super().__init__(message, hypothesis="spoke length", witness=spokes)
        self.spokes: List[Tuple[int, int]] = spokes


class AngleHypothesisViolatedError(HypothesisViolatedError):
    pass


class SeparationViolatedError(HypothesisViolatedError):
    pass


class ZeroWeightAtInteriorError(HypothesisViolatedError):
    pass


class NotHarmonicError(HypothesisViolatedError):
    pass


class DisconnectedTerminalsError(HypothesisViolatedError):
    pass


# The conclusion of a verified statement failed even though its hypotheses held.


class CheckFailedError(DcglabError):
    def __init__(self, message: str, *, margin: Optional[float] = None) -> None:
        super().__init__(message)
        self.margin = margin


# Input files.


class MeshFormatError(DcglabError):
    pass
