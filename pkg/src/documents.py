"""
JSON documents read and written by the CLI.

Kernels, edge functions, families and distributions are validated with
pydantic models that reject unknown fields. Output is deterministic: keys are
sorted and floats are written with 17 significant digits.
"""
import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Annotated, Any, Iterator, Type, TypeVar

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, FiniteFloat, ValidationError

from .errors import InvalidDocument, InvalidInput
from .exp_family import ExponentialFamily
from .function_space import EdgeFunction
from .kernel_graph import Distribution, EdgeMeasure, KernelGraph, MarkovKernel

StateId = Annotated[str, BeforeValidator(lambda v: str(v) if isinstance(v, (int, str)) else v)]

DocumentT = TypeVar("DocumentT", bound=BaseModel)


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class EdgeRef(_Document):
    source: StateId = Field(alias="from")
    target: StateId = Field(alias="to")


class WeightedEdge(EdgeRef):
    p: FiniteFloat


class ValuedEdge(EdgeRef):
    v: FiniteFloat


def _graph_from(states: list[str], edges: list[EdgeRef]) -> tuple[KernelGraph, list[int]]:
    """Graph plus the canonical position of every document edge."""
    graph = KernelGraph.from_pairs(states, [(e.source, e.target) for e in edges])
    positions = [
        graph.edge_position[(graph.state_index(e.source), graph.state_index(e.target))]
        for e in edges
    ]
    return graph, positions


def _canonical(values: list[float], positions: list[int]) -> np.ndarray:
    ordered = np.zeros(len(positions))
    ordered[positions] = values
    return ordered


class KernelDocument(_Document):
    """{"states": [...], "edges": [{"from": s, "to": s, "p": float}, ...]}"""
    states: list[StateId]
    edges: list[WeightedEdge]

    def to_kernel(self) -> MarkovKernel:
        graph, positions = _graph_from(self.states, self.edges)
        return MarkovKernel(graph, _canonical([e.p for e in self.edges], positions))

    def to_edge_measure(self) -> EdgeMeasure:
        graph, positions = _graph_from(self.states, self.edges)
        return EdgeMeasure(graph, _canonical([e.p for e in self.edges], positions))

    @classmethod
    def from_values(cls, graph: KernelGraph, values) -> "KernelDocument":
        return cls(
            states=list(graph.states),
            edges=[
                WeightedEdge(source=a, target=b, p=float(p))
                for (a, b), p in zip(graph.edge_labels(), values)
            ],
        )


class EdgeFunctionDocument(_Document):
    """Mirror of the kernel document with "v" in place of "p"."""
    states: list[StateId]
    edges: list[ValuedEdge]

    def to_edge_function(self) -> EdgeFunction:
        graph, positions = _graph_from(self.states, self.edges)
        return EdgeFunction(graph, _canonical([e.v for e in self.edges], positions))

    @classmethod
    def from_function(cls, f: EdgeFunction) -> "EdgeFunctionDocument":
        return cls(
            states=list(f.graph.states),
            edges=[
                ValuedEdge(source=a, target=b, v=float(v))
                for (a, b), v in zip(f.graph.edge_labels(), f.values)
            ],
        )


class GraphDocument(_Document):
    states: list[StateId]
    edges: list[EdgeRef]

    def to_graph(self) -> KernelGraph:
        return _graph_from(self.states, self.edges)[0]


class FamilyDocument(_Document):
    """{"graph": {...}, "carrier": [...per edge...], "basis": [[...], ...]}, values in graph edge order."""
    graph: GraphDocument
    carrier: list[FiniteFloat]
    basis: list[list[FiniteFloat]]

    def to_family(self) -> ExponentialFamily:
        graph, positions = _graph_from(self.graph.states, self.graph.edges)
        for row in (self.carrier, *self.basis):
            if len(row) != graph.n_edges:
                raise InvalidInput(
                    "family vectors must have one entry per edge",
                    expected=graph.n_edges,
                    length=len(row),
                )
        return ExponentialFamily(
            graph,
            EdgeFunction(graph, _canonical(self.carrier, positions)),
            tuple(EdgeFunction(graph, _canonical(row, positions)) for row in self.basis),
        )

    @classmethod
    def from_family(cls, family: ExponentialFamily) -> "FamilyDocument":
        graph = family.graph
        return cls(
            graph=GraphDocument(
                states=list(graph.states),
                edges=[EdgeRef(source=a, target=b) for a, b in graph.edge_labels()],
            ),
            carrier=[float(v) for v in family.carrier.values],
            basis=[[float(v) for v in f.values] for f in family.basis],
        )


class DistributionDocument(_Document):
    """{"states": [...], "p": [...]}"""
    states: list[StateId]
    p: list[FiniteFloat]

    def to_distribution(self, graph: KernelGraph) -> Distribution:
        if len(self.states) != len(self.p):
            raise InvalidInput("states and p must have equal length")
        if sorted(self.states) != sorted(graph.states):
            raise InvalidInput(
                "distribution states differ from the kernel states",
                states=self.states,
                expected=list(graph.states),
            )
        probs = np.zeros(graph.n_states)
        for state, value in zip(self.states, self.p):
            probs[graph.state_index(state)] = value
        return Distribution(probs)

    @classmethod
    def from_distribution(cls, graph: KernelGraph, q: Distribution) -> "DistributionDocument":
        return cls(states=list(graph.states), p=[float(v) for v in q.probs])


def kernel_document(w: MarkovKernel) -> dict:
    return KernelDocument.from_values(w.graph, w.probs).model_dump(by_alias=True)


def measure_document(p2: EdgeMeasure) -> dict:
    return KernelDocument.from_values(p2.graph, p2.probs).model_dump(by_alias=True)


def function_document(f: EdgeFunction) -> dict:
    return EdgeFunctionDocument.from_function(f).model_dump(by_alias=True)


def family_document(family: ExponentialFamily) -> dict:
    return FamilyDocument.from_family(family).model_dump(by_alias=True)


def distribution_document(graph: KernelGraph, q: Distribution) -> dict:
    return DistributionDocument.from_distribution(graph, q).model_dump(by_alias=True)


def parse_document(text: str | bytes, model: Type[DocumentT], source: str = "<input>") -> DocumentT:
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise InvalidDocument(
            f"{source} is not a valid {model.__name__}",
            source=source,
            errors=[
                {"loc": [str(part) for part in err["loc"]], "msg": err["msg"]}
                for err in exc.errors(include_url=False)
            ],
        ) from None


def load_document(path: Path, model: Type[DocumentT]) -> DocumentT:
    return parse_document(Path(path).read_bytes(), model, source=str(path))


def read_trajectory(path: Path) -> list[str]:
    """One state identifier per line; blank lines are skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise InvalidDocument(f"{path} is not UTF-8 text", source=str(path), position=exc.start) from None
    return [line.strip() for line in lines if line.strip()]


def file_digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _plain(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(by_alias=True)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _encode_float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    return format(value, ".17g")


def _encode(value: Any, indent: int, level: int) -> str:
    value = _plain(value)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k))}: {_encode(value[k], indent, level + 1)}"
            for k in sorted(value, key=str)
        ]
        return "{\n" + ",\n".join(items) + f"\n{end}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{end}]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _encode_float(value)
    return json.dumps(str(value))


def dumps(payload: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, %.17g floats, non-finite floats as null."""
    return _encode(payload, indent, 0) + "\n"


def _flatten(value: Any, path: str) -> Iterator[tuple[str, Any]]:
    value = _plain(value)
    if isinstance(value, dict):
        for key in sorted(value, key=str):
            yield from _flatten(value[key], f"{path}.{key}" if path else str(key))
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _flatten(item, f"{path}.{i}" if path else str(i))
    else:
        yield path, value


def to_csv(payload: Any) -> str:
    """Flatten a payload into `path,value` rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["path", "value"])
    for path, value in _flatten(payload, ""):
        if isinstance(value, float):
            value = _encode_float(value)
        elif value is None:
            value = ""
        writer.writerow([path, value])
    return buffer.getvalue()
