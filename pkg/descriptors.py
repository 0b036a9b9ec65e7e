"""
JSON descriptors for scalars, lattices, subspaces, domains and eps ladders.

Descriptor formats:
    scalar    1, "3/4", 0.5 (float, inexact) or {"field": "Z[sqrt2]", "coords": ["0", "1"]}
              / {"minpoly": [-2, 0, 1], "coords": [...], "embedding": 0}
    lattice   {"basis": [[...], ...]}, {"standard": n}, {"preset": "Z[sqrt2]"}
              or {"minpoly": [...], "generators": [[coords], ...]}
    subspace  {"rows": [[...], ...]} or {"axes": [0, 2]}
    domain    {"kind": "ball", "center": [...], "radius": "5/2"} (or "radius_sq"),
              {"kind": "ellipsoid", "center", "shape"}, {"kind": "box", "center",
              "half_widths", "frame"}, {"kind": "product", "factors":
              [{"frame": [[...]], "domain": {...}}, ...]},
              {"kind": "lp_ball", "center", "radius", "exponent"}
    eps       a scalar, a list of scalars, or {"base": 2, "from": 4, "to": 14}
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from domains import (
    KIND_BALL, KIND_BOX, KIND_ELLIPSOID, KIND_LP_BALL, KIND_PRODUCT, Ball, Box,
    Domain, Ellipsoid, LpBall, Product,
)
from exact_scalar import (
    FieldElement, GeometryError, format_scalar, is_exact, parse_rational,
    scalar_to_json, to_float,
)
from lattice_core import Lattice, NonPositiveParameter
from numberfield import PRESETS, ModuleLattice, analyze_field, canonical_embedding, preset_lattice
from splitter import SubspaceSpec
from asymptotics import eps_ladder

logger = logging.getLogger(__name__)


class ConfigError(GeometryError):
    """Raised for malformed configuration or descriptor input"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message, field=field, line=line)

    def __str__(self):
        parts = []
        if self.field:
            parts.append(f"field {self.field}")
        if self.line:
            parts.append(f"line {self.line}")
        return f"{self.message} ({', '.join(parts)})" if parts else self.message


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON file, reporting syntax errors with their line"""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}", field=str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e.msg}", field=str(path), line=e.lineno)


def _require(data: Dict[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise ConfigError(f"Missing '{key}'", field=f"{where}.{key}")
    return data[key]


def parse_int(value: Any, where: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"Expected an integer, got {value!r}", field=where)
    try:
        return int(value)
    except (ValueError, TypeError):
        raise ConfigError(f"Expected an integer, got {value!r}", field=where)


def parse_float(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"Expected a number, got {value!r}", field=where)
    try:
        return float(value)
    except (ValueError, TypeError):
        raise ConfigError(f"Expected a number, got {value!r}", field=where)


def parse_scalar(value: Any, where: str = "scalar"):
    """Exact scalar from a descriptor; plain JSON floats stay floats"""
    if isinstance(value, dict):
        if "field" in value:
            name = value["field"]
            if name not in PRESETS:
                raise ConfigError(f"Unknown field preset {name!r}", field=where)
            field = analyze_field(PRESETS[name])
        else:
            field = analyze_field(_require(value, "minpoly", where))
        coords = [parse_scalar(c, where) for c in _require(value, "coords", where)]
        return FieldElement(field, coords, embedding=parse_int(value.get("embedding", 0), f"{where}.embedding"))
    if isinstance(value, float):
        return value
    try:
        return parse_rational(value)
    except GeometryError as e:
        raise ConfigError(str(e), field=where)


def parse_vector(values: Sequence[Any], where: str) -> List[Any]:
    if not isinstance(values, list):
        raise ConfigError("Expected a list", field=where)
    return [parse_scalar(v, f"{where}[{i}]") for i, v in enumerate(values)]


def parse_matrix(rows: Sequence[Sequence[Any]], where: str) -> List[List[Any]]:
    if not isinstance(rows, list):
        raise ConfigError("Expected a list of rows", field=where)
    return [parse_vector(row, f"{where}[{i}]") for i, row in enumerate(rows)]


def parse_lattice(data: Dict[str, Any], where: str = "lattice") -> Union[Lattice, ModuleLattice]:
    """A Lattice, or a ModuleLattice for number-field descriptors"""
    if "standard" in data:
        return Lattice.standard(parse_int(data["standard"], f"{where}.standard"))
    if "preset" in data:
        try:
            return preset_lattice(data["preset"])
        except KeyError as e:
            raise ConfigError(str(e), field=f"{where}.preset")
    if "minpoly" in data:
        field = analyze_field(data["minpoly"])
        generators = parse_matrix(_require(data, "generators", where), f"{where}.generators")
        return canonical_embedding(field, generators)
    basis = parse_matrix(_require(data, "basis", where), f"{where}.basis")
    return Lattice(basis, label=data.get("label", ""))


def embedded(lattice: Union[Lattice, ModuleLattice]) -> Lattice:
    return lattice.embedded if isinstance(lattice, ModuleLattice) else lattice


def parse_subspace(data: Dict[str, Any], dim: int, where: str = "subspace") -> SubspaceSpec:
    if "axes" in data:
        return SubspaceSpec.axes(dim, [parse_int(i, f"{where}.axes[{k}]") for k, i in enumerate(data["axes"])])
    rows = parse_matrix(_require(data, "rows", where), f"{where}.rows")
    return SubspaceSpec(rows, dim=dim, label=data.get("label", ""))


def parse_domain(data: Dict[str, Any], where: str = "domain") -> Domain:
    kind = _require(data, "kind", where)
    try:
        if kind == KIND_BALL:
            center = parse_vector(_require(data, "center", where), f"{where}.center")
            if "radius_sq" in data:
                return Ball(center, radius_sq=parse_scalar(data["radius_sq"], f"{where}.radius_sq"))
            return Ball(center, radius=parse_scalar(_require(data, "radius", where), f"{where}.radius"))
        if kind == KIND_ELLIPSOID:
            return Ellipsoid(parse_vector(_require(data, "center", where), f"{where}.center"),
                             parse_matrix(_require(data, "shape", where), f"{where}.shape"))
        if kind == KIND_BOX:
            frame = parse_matrix(data["frame"], f"{where}.frame") if "frame" in data else None
            return Box(parse_vector(_require(data, "center", where), f"{where}.center"),
                       parse_vector(_require(data, "half_widths", where), f"{where}.half_widths"), frame)
        if kind == KIND_PRODUCT:
            factors = []
            for i, factor in enumerate(_require(data, "factors", where)):
                label = f"{where}.factors[{i}]"
                factors.append((parse_matrix(_require(factor, "frame", label), f"{label}.frame"),
                                parse_domain(_require(factor, "domain", label), f"{label}.domain")))
            return Product(factors)
        if kind == KIND_LP_BALL:
            return LpBall(parse_vector(_require(data, "center", where), f"{where}.center"),
                          parse_scalar(_require(data, "radius", where), f"{where}.radius"),
                          parse_scalar(_require(data, "exponent", where), f"{where}.exponent"))
    except (ValueError, TypeError, NonPositiveParameter) as e:
        raise ConfigError(str(e), field=where)
    raise ConfigError(f"Unknown domain kind {kind!r}", field=f"{where}.kind")


def parse_eps_list(value: Any, where: str = "eps") -> List[Any]:
    if isinstance(value, dict):
        return eps_ladder(parse_scalar(_require(value, "base", where), f"{where}.base"),
                          parse_int(_require(value, "from", where), f"{where}.from"),
                          parse_int(_require(value, "to", where), f"{where}.to"))
    if isinstance(value, list):
        return [parse_scalar(v, f"{where}[{i}]") for i, v in enumerate(value)]
    return [parse_scalar(value, where)]


def parse_multiplier(values: Sequence[Any], where: str = "multiplier") -> List[Any]:
    """Multiplier entries; complex components are [re, im] pairs"""
    parsed = []
    for i, v in enumerate(values):
        if isinstance(v, list):
            parsed.append([parse_scalar(x, f"{where}[{i}]") for x in v])
        else:
            parsed.append(parse_scalar(v, f"{where}[{i}]"))
    return parsed


def scalar_json(value: Any) -> Any:
    if is_exact(value):
        return scalar_to_json(value)
    return float(value)


def lattice_json(lattice: Lattice) -> Dict[str, Any]:
    data = {"label": lattice.describe(), "rank": lattice.rank, "dim": lattice.dim, "exact": lattice.exact}
    if lattice.exact:
        data["basis"] = [[scalar_json(x) for x in row] for row in lattice.basis]
    else:
        data["basis"] = lattice.basis_float.tolist()
    data["covolume"] = lattice.covolume
    return data


def eps_label(eps: Any) -> str:
    return format_scalar(eps) if is_exact(eps) else repr(to_float(eps))
