"""Run configuration: YAML in, validated :class:`RunConfig` out.

Every key is checked before any computation starts. Errors carry the
``file:line`` of the offending entry, taken from the YAML node marks.

Example::

    problem: cantilever_homogeneous
    method: pikan
    network: {shape: [2, 5, 5, 5, 2], grid_size: 20, order: 3, grid_range: [0, 1]}
    quadrature: {scheme: TriangleCentroid, density: 0.05}
    optimizer: {epochs: 300}
    seed: 0
    output: runs/beam

Missing ``network`` and ``quadrature`` entries fall back to the problem's
recommended defaults.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import yaml

from . import geometry as geo
from . import problems
from .optimize import LbfgsConfig

METHODS = ("pikan", "dem_mlp", "cenn")
MLP_SHAPES = {"dem_mlp": [2, 30, 30, 30, 30, 2], "cenn": [2, 20, 20, 20, 20, 20, 2]}
MESH_SCHEMES = (geo.TRIANGLE_CENTROID, geo.DELAUNAY_AREA)

_TOP = {"problem", "method", "network", "quadrature", "optimizer", "cenn", "seed", "workers", "output", "chunk_size"}
_NETWORK = {"shape", "grid_size", "order", "grid_range", "activation", "extrapolation"}
_QUAD = {"scheme", "density", "boundary_scale", "random", "seed"}
_OPT = {"history", "lr", "max_inner", "c1", "c2", "epochs", "tol"}
_CENN = {"beta", "n_interface"}


class ConfigError(ValueError):
    """Validation failure; ``where`` is ``file:line`` when known."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class NetworkConfig:
    shape: tuple
    grid_size: int = 10
    order: int = 3
    grid_range: tuple = (0.0, 1.0)
    activation: str = "silu"
    extrapolation: str = "zero"


@dataclass(frozen=True)
class QuadratureConfig:
    scheme: str
    density: object  # edge length (mesh schemes) or (nx, ny)
    boundary_scale: float = 1.0
    random: bool = False
    seed: int = 0


@dataclass(frozen=True)
class CennConfig:
    beta: float | None = None
    n_interface: int = 50


@dataclass(frozen=True)
class RunConfig:
    problem: object  # builtin name or inline problem mapping
    method: str
    network: NetworkConfig
    quadrature: QuadratureConfig
    optimizer: LbfgsConfig
    cenn: CennConfig = field(default_factory=CennConfig)
    seed: int = 0
    workers: int = 1
    chunk_size: int = 16384
    output: str = "run"

    def problem_spec(self) -> problems.ProblemSpec:
        if isinstance(self.problem, str):
            return problems.builtin(self.problem)
        return problems.from_dict(self.problem)

    @property
    def problem_name(self) -> str:
        return self.problem if isinstance(self.problem, str) else str(self.problem.get("name", "inline"))

    def to_dict(self) -> dict:
        d = asdict(self)
        opt = d["optimizer"]
        opt.pop("check_wolfe", None)
        opt.pop("grad_tol", None)
        d["network"]["shape"] = list(self.network.shape)
        d["network"]["grid_range"] = list(self.network.grid_range)
        if self.method != "pikan":
            d["network"] = {"shape": d["network"]["shape"]}
        if isinstance(self.quadrature.density, tuple):
            d["quadrature"]["density"] = list(self.quadrature.density)
        return _plain(d)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# YAML with line numbers


def _lines(node, path=(), out=None) -> dict:
    """Map key paths to 1-based line numbers from a composed YAML node."""
    if out is None:
        out = {}
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = k.start_mark.line + 1
            _lines(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _lines(v, path + (i,), out)
    return out


class _Where:
    def __init__(self, filename: str, lines: dict):
        self.filename, self.lines = filename, lines

    def __call__(self, *path) -> str:
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        return f"{self.filename}:{line}" if line else self.filename


def load(path) -> RunConfig:
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path) from None
    return loads(text, path)


def loads(text: str, filename: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{filename}:{mark.line + 1}" if mark else filename
        raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}", where) from None
    where = _Where(filename, _lines(node) if node is not None else {})
    return from_dict(data, where)


def from_dict(data, where=None) -> RunConfig:
    where = where or _Where("<config>", {})
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", where())
    _keys(data, _TOP, where)
    if "problem" not in data:
        raise ConfigError("missing required key 'problem'", where())

    prob = data["problem"]
    if isinstance(prob, str):
        if prob not in problems.names():
            raise ConfigError(f"unknown problem {prob!r}; choose from {', '.join(problems.names())}", where("problem"))
    elif not isinstance(prob, dict):
        raise ConfigError("problem must be a builtin name or an inline mapping", where("problem"))
    try:
        spec = problems.builtin(prob) if isinstance(prob, str) else problems.from_dict(prob)
    except (problems.ProblemError, geo.GeometryError, ValueError) as e:
        raise ConfigError(str(e), where("problem")) from None
    defaults = spec.defaults

    method = data.get("method", "pikan")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {method!r}", where("method"))

    net_default = defaults.get("network", {}) if method == "pikan" else {"shape": MLP_SHAPES[method]}
    network = _network(data.get("network") or {}, net_default, where)
    if method != "pikan" and "network" in data:
        extra = set(data["network"]) - {"shape"}
        if extra:
            raise ConfigError(f"keys {sorted(extra)} apply to KAN networks only", where("network"))
    quadrature = _quadrature(data.get("quadrature") or {}, defaults.get("quadrature", {}), where)
    optimizer = _optimizer(data.get("optimizer") or {}, where)
    cenn = _cenn(data.get("cenn") or {}, where)
    seed = _int(data.get("seed", 0), where("seed"), "seed", minimum=0)
    workers = _int(data.get("workers", 1), where("workers"), "workers", minimum=1)
    chunk = _int(data.get("chunk_size", 16384), where("chunk_size"), "chunk_size", minimum=1)
    output = data.get("output", f"runs/{spec.name}")
    if not isinstance(output, str) or not output:
        raise ConfigError("output must be a non-empty path", where("output"))
    return RunConfig(copy.deepcopy(prob), method, network, quadrature, optimizer, cenn, seed, workers, chunk, output)


def _keys(d, allowed, where, *path):
    if not isinstance(d, dict):
        raise ConfigError(f"{'.'.join(map(str, path)) or 'config'} must be a mapping", where(*path))
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {'.'.join(map(str, path + (k,)))!r}", where(*path, k))


def _int(v, at, name, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}", at)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name} must be at least {minimum}, got {v}", at)
    return v


def _float(v, at, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}", at)
    return float(v)


def _network(d, default, where) -> NetworkConfig:
    _keys(d, _NETWORK, where, "network")
    merged = {**default, **d}
    at = lambda k: where("network", k) if k in d else where("network")  # noqa: E731
    shape = merged.get("shape")
    if not isinstance(shape, list) or len(shape) < 2 or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 1 for s in shape):
        raise ConfigError(f"network.shape must be a list of at least two positive integers, got {shape!r}", at("shape"))
    if shape[0] != 2 or shape[-1] != 2:
        raise ConfigError(f"network.shape must start and end with 2 (coordinates in, displacements out), got {shape}", at("shape"))
    g = _int(merged.get("grid_size", 10), at("grid_size"), "network.grid_size", minimum=1)
    k = _int(merged.get("order", 3), at("order"), "network.order", minimum=1)
    rng = merged.get("grid_range", [0.0, 1.0])
    if not isinstance(rng, list) or len(rng) != 2:
        raise ConfigError("network.grid_range must be [low, high]", at("grid_range"))
    lo, hi = (_float(v, at("grid_range"), "network.grid_range") for v in rng)
    if not lo < hi:
        raise ConfigError("network.grid_range needs low < high", at("grid_range"))
    act = merged.get("activation", "silu")
    if act not in ("silu", "tanh"):
        raise ConfigError(f"network.activation must be silu or tanh, got {act!r}", at("activation"))
    ext = merged.get("extrapolation", "zero")
    if ext not in ("zero", "polynomial"):
        raise ConfigError(f"network.extrapolation must be zero or polynomial, got {ext!r}", at("extrapolation"))
    return NetworkConfig(tuple(shape), g, k, (lo, hi), act, ext)


def _quadrature(d, default, where) -> QuadratureConfig:
    _keys(d, _QUAD, where, "quadrature")
    at = lambda k: where("quadrature", k) if k in d else where("quadrature")  # noqa: E731
    merged = dict(default)
    if "scheme" in d and "density" not in d and d["scheme"] != default.get("scheme"):
        merged.pop("density", None)
    merged.update(d)
    scheme = merged.get("scheme")
    if scheme not in geo.SCHEMES:
        raise ConfigError(f"quadrature.scheme must be one of {', '.join(geo.SCHEMES)}, got {scheme!r}", at("scheme"))
    if "density" not in merged:
        raise ConfigError(f"quadrature.density is required for scheme {scheme}", at("scheme"))
    dens = merged["density"]
    if scheme in MESH_SCHEMES:
        dens = _float(dens, at("density"), "quadrature.density")
        if not dens > 0:
            raise ConfigError("quadrature.density (target edge length) must be positive", at("density"))
    else:
        if not isinstance(dens, list) or len(dens) != 2:
            raise ConfigError(f"quadrature.density for {scheme} must be [nx, ny]", at("density"))
        dens = tuple(_int(v, at("density"), "quadrature.density", minimum=2) for v in dens)
        if scheme == geo.SIMPSON and (dens[0] % 2 == 0 or dens[1] % 2 == 0):
            raise ConfigError(f"Simpson needs odd point counts, got {list(dens)}", at("density"))
    scale = _float(merged.get("boundary_scale", 1.0), at("boundary_scale"), "quadrature.boundary_scale")
    if not 0 < scale <= 1:
        raise ConfigError("quadrature.boundary_scale must lie in (0, 1]", at("boundary_scale"))
    rnd = merged.get("random", False)
    if not isinstance(rnd, bool):
        raise ConfigError("quadrature.random must be true or false", at("random"))
    if rnd and scheme != geo.MONTE_CARLO:
        raise ConfigError("quadrature.random applies to MonteCarlo only", at("random"))
    seed = _int(merged.get("seed", 0), at("seed"), "quadrature.seed", minimum=0)
    return QuadratureConfig(scheme, dens, scale, rnd, seed)


def _optimizer(d, where) -> LbfgsConfig:
    _keys(d, _OPT, where, "optimizer")
    kw = {}
    for k, v in d.items():
        at = where("optimizer", k)
        if k in ("history", "max_inner", "epochs"):
            kw[k] = _int(v, at, f"optimizer.{k}", minimum=0)
        else:
            kw[k] = _float(v, at, f"optimizer.{k}")
    try:
        return LbfgsConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"optimizer: {e}", where("optimizer")) from None


def _cenn(d, where) -> CennConfig:
    _keys(d, _CENN, where, "cenn")
    beta = d.get("beta")
    if beta is not None:
        beta = _float(beta, where("cenn", "beta"), "cenn.beta")
        if beta < 0:
            raise ConfigError("cenn.beta must be non-negative", where("cenn", "beta"))
    n = _int(d.get("n_interface", 50), where("cenn", "n_interface"), "cenn.n_interface", minimum=1)
    return CennConfig(beta, n)


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
