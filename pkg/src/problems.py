"""
Poisson interface problems and the preset catalog

A problem is  Laplacian u = f  in Omega- and Omega+,  u = u_b  on the outer boundary, with
jumps [[u]] = gamma, [[du/dn]] = rho across the interface, where [[q]] = q+ - q-.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import sympy as sp

from .errors import ConfigError, UnsupportedGeometryError
from .expressions import ClosedFormField, ScalarField, evaluate_gradient, parse_expression
from .geometry import (
    InterfaceGeometry,
    InterfaceSampleSet,
    catalog,
    ellipse,
    ellipsoid,
    geometry_from_expressions,
    inside_mask,
    superellipse,
)
from .training import JumpDataset, JumpFunction, build_dataset

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]
Expression = Union[str, sp.Expr]


def _piecewise(minus: PointFunction, plus: PointFunction, points: np.ndarray,
               inside: np.ndarray) -> np.ndarray:
    """Evaluate each closed form only on its own side"""
    out = np.empty(points.shape[0])
    out[inside] = minus(points[inside])
    out[~inside] = plus(points[~inside])
    return out


@dataclass(eq=False)
class ExactSolution:
    """Piecewise closed-form solution used for error reporting"""

    u_minus: ScalarField
    u_plus: ScalarField

    def __post_init__(self):
        self.grad_minus = self.u_minus.gradient()
        self.grad_plus = self.u_plus.gradient()

    def u(self, points: np.ndarray, inside: np.ndarray) -> np.ndarray:
        return _piecewise(self.u_minus, self.u_plus, points, inside)

    def grad(self, points: np.ndarray, inside: np.ndarray) -> np.ndarray:
        """(N, d) exact gradient"""
        out = np.empty(points.shape)
        out[inside] = evaluate_gradient(self.grad_minus, points[inside])
        out[~inside] = evaluate_gradient(self.grad_plus, points[~inside])
        return out

    def singular_part(self) -> ClosedFormField:
        """V = u- - u+ in closed form, the exact target of the jump network"""
        return ClosedFormField([self.u_minus.expr - self.u_plus.expr], self.u_minus.dim)


@dataclass(eq=False)
class PoissonInterfaceProblem:
    """Sources, jumps, boundary data and domain of one interface problem"""

    name: str
    geometry: InterfaceGeometry
    bounds: Tuple[Tuple[float, float], ...]
    f_minus: PointFunction
    f_plus: PointFunction
    gamma: JumpFunction
    rho: JumpFunction
    fjump: JumpFunction
    u_b: PointFunction
    exact: Optional[ExactSolution] = None

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def source(self, points: np.ndarray, inside: Optional[np.ndarray] = None) -> np.ndarray:
        """f on both sides, phi = 0 counting as outside"""
        if inside is None:
            inside = inside_mask(self.geometry, points)
        return _piecewise(self.f_minus, self.f_plus, points, inside)

    def jump_dataset(self, samples: InterfaceSampleSet) -> JumpDataset:
        return build_dataset(samples, self.gamma, self.rho, self.fjump)

    def clearance(self, samples: InterfaceSampleSet) -> float:
        """Smallest distance from an interface sample to the outer boundary"""
        lows = np.array([lo for lo, _ in self.bounds])
        highs = np.array([hi for _, hi in self.bounds])
        gaps = np.minimum(samples.points - lows, highs - samples.points)
        return float(gaps.min())

    def check_clearance(self, samples: InterfaceSampleSet, h: float):
        """Raise if the interface comes within 2h of the outer boundary"""
        gap = self.clearance(samples)
        if gap < 2.0 * h:
            raise UnsupportedGeometryError(
                f"interface of '{self.name}' is {gap:.3g} from the boundary, needs >= 2h = {2 * h:.3g}"
            )


def _field(expr: Expression, dim: int, geom: Optional[InterfaceGeometry] = None,
           allow_s: bool = False) -> ScalarField:
    if isinstance(expr, str):
        expr = parse_expression(expr, dim, allow_s=allow_s)
    param_of = geom.parameter_of if geom is not None else None
    return ScalarField(expr, dim, param_of)


def _square(bounds, dim: int) -> Tuple[Tuple[float, float], ...]:
    if len(bounds) == 2 and np.isscalar(bounds[0]):
        return ((float(bounds[0]), float(bounds[1])),) * dim
    return tuple((float(lo), float(hi)) for lo, hi in bounds)


def manufactured_problem(name: str, geometry: InterfaceGeometry, bounds,
                         u_minus: Expression, u_plus: Expression) -> PoissonInterfaceProblem:
    """
    Problem built from a known piecewise solution

    Sources are the symbolic Laplacians of u-/u+, the jumps are evaluated from the two
    closed forms at the interface and u_b is u+ on the outer boundary.
    """
    dim = geometry.dim
    um, up = _field(u_minus, dim), _field(u_plus, dim)
    fm, fp = um.laplacian(), up.laplacian()
    gm, gp = um.gradient(), up.gradient()

    def gamma(samples: InterfaceSampleSet) -> np.ndarray:
        return up(samples.points) - um(samples.points)

    def rho(samples: InterfaceSampleSet) -> np.ndarray:
        jump = evaluate_gradient(gp, samples.points) - evaluate_gradient(gm, samples.points)
        return np.sum(jump * samples.normals, axis=1)

    def fjump(samples: InterfaceSampleSet) -> np.ndarray:
        return fp(samples.points) - fm(samples.points)

    return PoissonInterfaceProblem(
        name, geometry, _square(bounds, dim), fm, fp, gamma, rho, fjump, up,
        ExactSolution(um, up),
    )


def source_problem(name: str, geometry: InterfaceGeometry, bounds,
                   f_minus: Expression, f_plus: Expression,
                   gamma: Expression, rho: Expression,
                   u_b: Expression = "0") -> PoissonInterfaceProblem:
    """
    Problem given by sources and jump data, without an exact solution

    gamma and rho may be written in the curve parameter s of a parameterized 2D interface.
    [[f]] is f+ - f- evaluated at the interface points.
    """
    dim = geometry.dim
    fm, fp = _field(f_minus, dim), _field(f_plus, dim)
    gamma_field = _field(gamma, dim, geometry, allow_s=True)
    rho_field = _field(rho, dim, geometry, allow_s=True)
    boundary = _field(u_b, dim)

    def curve_params(samples: InterfaceSampleSet) -> Optional[np.ndarray]:
        if samples.params is not None and samples.params.ndim == 1:
            return samples.params
        return None

    def gamma_fn(samples: InterfaceSampleSet) -> np.ndarray:
        return gamma_field(samples.points, curve_params(samples))

    def rho_fn(samples: InterfaceSampleSet) -> np.ndarray:
        return rho_field(samples.points, curve_params(samples))

    def fjump(samples: InterfaceSampleSet) -> np.ndarray:
        return fp(samples.points) - fm(samples.points)

    return PoissonInterfaceProblem(
        name, geometry, _square(bounds, dim), fm, fp, gamma_fn, rho_fn, fjump, boundary,
    )


# Presets ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PresetSettings:
    """Network and sweep hyperparameters of a preset"""
    width: int
    n_samples: int
    n_outputs: int
    sweep: Tuple[int, ...]
    mode: str = "exact"
    kind: str = "poisson"


PRESET_SETTINGS: Dict[str, PresetSettings] = {
    "example1": PresetSettings(40, 200, 1, (64, 128, 256, 512)),
    "example2": PresetSettings(40, 200, 1, (64, 128, 256, 512)),
    "example3": PresetSettings(150, 300, 1, (80, 160, 320, 640), mode="successive"),
    "example4": PresetSettings(40, 200, 1, (16, 32, 64)),
    "plateau": PresetSettings(40, 200, 1, (2048, 4096)),  # example1 past the error floor
    "stokes": PresetSettings(50, 200, 3, (64, 128, 256), kind="stokes"),
}


def example1() -> PoissonInterfaceProblem:
    """Ellipse (0.8, 0.2) in [-1, 1]^2, u = e^x cos y inside, e^(x^2) cos y outside"""
    return manufactured_problem(
        "example1", ellipse(0.8, 0.2), (-1.0, 1.0), "exp(x)*cos(y)", "exp(x^2)*cos(y)",
    )


def example2() -> PoissonInterfaceProblem:
    """Super-ellipse (x/a)^4 + (y/b)^4 = 1 with a^2 = 0.7, b^2 = 0.1"""
    return manufactured_problem(
        "example2", superellipse(np.sqrt(0.7), np.sqrt(0.1)), (-1.0, 1.0),
        "exp(x)*cos(y)", "exp(x^2)*cos(y)",
    )


def example3() -> PoissonInterfaceProblem:
    """No exact solution: f = e^(x sin y) / e^(y cos x), [[u]] = sin s, [[du/dn]] = cos s"""
    return source_problem(
        "example3", ellipse(np.sqrt(0.7), np.sqrt(0.1)), (-1.0, 1.0),
        "exp(x*sin(y))", "exp(y*cos(x))", "sin(s)", "cos(s)", "0",
    )


def example4() -> PoissonInterfaceProblem:
    """Ellipsoid (0.7, 0.5, 0.3) in [-1, 1]^3"""
    return manufactured_problem(
        "example4", ellipsoid(0.7, 0.5, 0.3), (-1.0, 1.0),
        "exp(x + y + z)", "sin(x)*sin(y)*sin(z)",
    )


_BUILDERS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "plateau": example1,
}


def preset_problem(name: str) -> PoissonInterfaceProblem:
    if name not in _BUILDERS:
        raise ConfigError(f"unknown Poisson preset '{name}', expected one of {sorted(_BUILDERS)}")
    return _BUILDERS[name]()


def _number(token: str) -> float:
    value = parse_expression(token, 0)
    if value.free_symbols:
        raise ConfigError(f"'{token}' is not a number")
    return float(value)


def _numbers(text: str) -> List[float]:
    return [_number(tok) for tok in text.split()]


def problem_from_config(block: Dict[str, str]) -> PoissonInterfaceProblem:
    """
    Build a problem from a [problem] config block

    Keys:
        geometry: catalog entry with parameters, e.g. 'ellipse 0.8 0.2', or 'custom'
        level_set, curve_x, curve_y, dim: custom interface (curve in the parameter s)
        bounds: 'lo hi' for a square or cube domain
        u_minus, u_plus: exact solution (manufactured problem), or
        f_minus, f_plus, gamma, rho, u_b: sources and jumps
    """
    name = block.get("name", "custom")
    geometry_text = block.get("geometry", "custom").split()
    if not geometry_text:
        raise ConfigError("[problem] geometry is empty")

    if geometry_text[0] == "custom":
        if "level_set" not in block:
            raise ConfigError("custom geometry needs a level_set expression")
        dim = int(block.get("dim", "2"))
        curve: Optional[Sequence[str]] = None
        if "curve_x" in block or "curve_y" in block:
            curve = (block.get("curve_x", "0"), block.get("curve_y", "0"))
        domain = tuple(_numbers(block.get("param_domain", "0 2*pi")))
        geometry = geometry_from_expressions(block["level_set"], dim, curve, domain, name)
    else:
        geometry = catalog(geometry_text[0], *_numbers(" ".join(geometry_text[1:])))

    bounds = _numbers(block.get("bounds", "-1 1"))
    if len(bounds) != 2 or bounds[0] >= bounds[1]:
        raise ConfigError(f"bounds must be 'lo hi', got '{block.get('bounds')}'")

    if "u_minus" in block or "u_plus" in block:
        missing = [k for k in ("u_minus", "u_plus") if k not in block]
        if missing:
            raise ConfigError(f"manufactured problem is missing {missing}")
        problem = manufactured_problem(name, geometry, bounds, block["u_minus"], block["u_plus"])
    else:
        missing = [k for k in ("f_minus", "f_plus", "gamma", "rho") if k not in block]
        if missing:
            raise ConfigError(f"[problem] is missing {missing}")
        problem = source_problem(
            name, geometry, bounds, block["f_minus"], block["f_plus"],
            block["gamma"], block["rho"], block.get("u_b", "0"),
        )
    logger.info(f"built problem '{name}' on {geometry.name}")
    return problem
