"""Run configuration: an INI-style text format parsed with :mod:`configparser`.

Grammar
-------
Lines are ``key = value``; ``#`` and ``;`` start comments. Sections::

    [run]            experiment, tau, h, h_list, seed, jobs, out
    [domain]         shape = polygon | rectangle | disk | annulus | triangle | notched | arcs
                     plus the shape keys (vertices, ids, box, center, radius, r0, R,
                     A, B, C, width, height, notch_depth, notch_halfwidth, eps)
    [arc.<id>]       for shape = arcs, in boundary order:
                     type = segment | circle | polyline with start/end, center/radius/t0/t1
                     or points
    [data]           default = <expr>, or exact = plane a b c | fmp a | catenoid r0
    [piece.<arc id>] value = <expr>; overrides [data] on that arc
    [params]         experiment-specific keys

Lists are separated by commas or blanks; points are written ``(x, y)``.
Expressions are arithmetic in the variables ``s`` (arclength on the arc),
``x1``, ``x2``, ``tau``, ``pi`` and ``e`` with the functions listed in
:data:`FUNCTIONS`; comparisons evaluate to 0 or 1.
"""
from __future__ import annotations

import ast
import configparser
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import BoundaryData, CircularArc, Domain2D, DomainError, Polyline, Segment
from .exact import CatenoidGraph, FmpSol, PlaneSol, VerticalCatenoidProfile

EXPERIMENTS = ("dirichlet", "scherk", "wedge", "halfplane", "reflect", "nonexist", "growth", "catenoid", "verify")


class ConfigError(ValueError):
    pass


FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "abs": np.abs, "sign": np.sign, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh, "arctan": np.arctan,
    "arcsinh": np.arcsinh, "minimum": np.minimum, "maximum": np.maximum, "where": np.where, "clip": np.clip,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow, ast.Mod: operator.mod}
_CMPOPS = {ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt, ast.GtE: operator.ge,
           ast.Eq: operator.eq, ast.NotEq: operator.ne}


class Expression:
    """Whitelisted arithmetic expression, vectorized over numpy arrays."""

    def __init__(self, text: str, names=("s", "x1", "x2", "tau")):
        self.text = text.strip()
        try:
            self.tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self.names = set(names)
        self._check(self.tree.body)
        funcs = {id(n.func) for n in ast.walk(self.tree) if isinstance(n, ast.Call)}
        self.variables = {n.id for n in ast.walk(self.tree)
                          if isinstance(n, ast.Name) and id(n) not in funcs and n.id not in CONSTANTS}

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"only numeric constants are allowed in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.names and node.id not in CONSTANTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left), self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Compare) and all(type(op) in _CMPOPS for op in node.ops):
            for n in [node.left, *node.comparators]:
                self._check(n)
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS:
            if node.keywords:
                raise ConfigError(f"keyword arguments are not allowed in {self.text!r}")
            for a in node.args:
                self._check(a)
        else:
            raise ConfigError(f"unsupported syntax in expression {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, env)
            out = True
            for op, comp in zip(node.ops, node.comparators):
                right = self._eval(comp, env)
                out = np.logical_and(out, _CMPOPS[type(op)](left, right))
                left = right
            return np.asarray(out, dtype=float)
        return FUNCTIONS[node.func.id](*(self._eval(a, env) for a in node.args))

    def __call__(self, **env):
        missing = self.variables - set(env)
        if missing:
            raise ConfigError(f"expression {self.text!r} needs {sorted(missing)}")
        with np.errstate(all="ignore"):
            return self._eval(self.tree.body, env)

    def is_constant(self) -> bool:
        return not self.variables


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_floats(text: str, what: str) -> list[float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        return [float(Expression(p, names=())()) for p in parts]
    except ConfigError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None


def parse_points(text: str, what: str) -> list[tuple[float, float]]:
    nums = [float(x) for x in re.findall(_NUM, text)]
    if not nums or len(nums) % 2:
        raise ConfigError(f"{what}: expected (x, y) pairs, got {text!r}")
    return list(zip(nums[0::2], nums[1::2]))


class Section:
    """Typed access to one section; every value read (or defaulted) is recorded for the manifest."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)
        self.resolved: dict[str, str] = {}

    def _get(self, key, default):
        if key in self.raw:
            return self.raw[key]
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] is missing the key {key!r}")
        return default

    def float(self, key, default=None, positive=False, nonneg=False):
        v = self._get(key, default)
        if v is None:
            return None
        val = parse_floats(v, f"[{self.name}] {key}") if isinstance(v, str) else [float(v)]
        if len(val) != 1:
            raise ConfigError(f"[{self.name}] {key}: expected one number")
        x = val[0]
        if not math.isfinite(x) or (positive and x <= 0) or (nonneg and x < 0):
            cond = "positive" if positive else "non-negative" if nonneg else "finite"
            raise ConfigError(f"[{self.name}] {key} must be {cond}, got {x}")
        self.resolved[key] = repr(x)
        return x

    def int(self, key, default=None, positive=False):
        x = self.float(key, default, positive=positive)
        if x is None:
            return None
        if x != int(x):
            raise ConfigError(f"[{self.name}] {key} must be an integer")
        self.resolved[key] = str(int(x))
        return int(x)

    def floats(self, key, default=None, positive=False):
        v = self._get(key, default)
        if v is None:
            return None
        vals = parse_floats(v, f"[{self.name}] {key}") if isinstance(v, str) else [float(x) for x in v]
        if positive and any(x <= 0 for x in vals):
            raise ConfigError(f"[{self.name}] {key} must be positive")
        self.resolved[key] = " ".join(repr(x) for x in vals)
        return vals

    def str(self, key, default=None, choices=None):
        v = self._get(key, default)
        if v is None:
            return None
        v = str(v).strip()
        if choices is not None and v not in choices:
            raise ConfigError(f"[{self.name}] {key} must be one of {', '.join(choices)}; got {v!r}")
        self.resolved[key] = v
        return v

    def expr(self, key, default=None, names=("s", "x1", "x2", "tau")):
        v = self._get(key, default)
        if v is None:
            return None
        e = Expression(str(v), names)
        self.resolved[key] = e.text
        return e


_REQUIRED = object()
REQUIRED = _REQUIRED


@dataclass
class RunConfig:
    experiment: str
    tau: float
    h: float | None
    h_list: list | None
    seed: int
    jobs: int
    out: str | None
    domain: Domain2D | None
    sections: dict
    source: str = ""
    data_spec: dict = field(default_factory=dict)

    @property
    def params(self) -> Section:
        return self.sections["params"]

    def data(self, dom: Domain2D | None = None) -> BoundaryData:
        """Boundary data on ``dom`` (default: the configured domain)."""
        dom = dom or self.domain
        if dom is None:
            raise ConfigError("no domain configured")
        return build_data(dom, self.data_spec, self.tau)

    def manifest_lines(self) -> list[str]:
        lines = [f"experiment = {self.experiment}"]
        for name in sorted(self.sections):
            sec = self.sections[name]
            keys = sorted(set(sec.raw) | set(sec.resolved))
            if not keys:
                continue
            lines.append(f"[{name}]")
            for k in keys:
                lines.append(f"{k} = {sec.resolved.get(k, sec.raw.get(k, '')).strip()}")
        return lines


def _exact_graph(spec: str, tau: float):
    parts = spec.split()
    if not parts:
        raise ConfigError("[data] exact is empty")
    kind, args = parts[0], parse_floats(" ".join(parts[1:]), "[data] exact") if len(parts) > 1 else []
    if kind == "plane":
        if len(args) not in (2, 3):
            raise ConfigError("[data] exact = plane a b [c]")
        return PlaneSol(*args)
    if kind == "fmp":
        if len(args) != 1:
            raise ConfigError("[data] exact = fmp a")
        return FmpSol(args[0], tau)
    if kind == "catenoid":
        if len(args) != 1 or args[0] <= 0:
            raise ConfigError("[data] exact = catenoid r0 with r0 > 0")
        if abs(tau - 0.5) > 1e-15:
            raise ConfigError("the catenoid family is defined for tau = 1/2")
        return CatenoidGraph(VerticalCatenoidProfile(args[0]))
    raise ConfigError(f"[data] exact: unknown family {kind!r}")


def build_data(dom: Domain2D, spec: dict, tau: float) -> BoundaryData:
    if "exact" in spec:
        g = _exact_graph(spec["exact"], tau)
        return BoundaryData.from_function(dom, g)
    default = spec.get("default")
    pieces = {}
    for a in dom.arcs:
        e = spec.get("pieces", {}).get(a.id, default)
        if e is None:
            raise ConfigError(f"no data for arc {a.id!r}")
        pieces[a.id] = (lambda expr, arc: lambda s: _eval_on_arc(expr, arc, s, tau))(e, a)
    return BoundaryData.build(dom, pieces)


def _eval_on_arc(expr: Expression, arc, s, tau):
    s = np.asarray(s, dtype=float)
    pts = np.asarray(arc.point(s), dtype=float).reshape(s.shape + (2,))
    val = expr(s=s, x1=pts[..., 0], x2=pts[..., 1], tau=tau)
    return np.broadcast_to(np.asarray(val, dtype=float), s.shape).copy()


def exact_graph(cfg: RunConfig):
    spec = cfg.data_spec.get("exact")
    return None if spec is None else _exact_graph(spec, cfg.tau)


def _build_domain(sec: Section, arcs: list[tuple[str, Section]]) -> Domain2D | None:
    shape = sec.str("shape", None, choices=("polygon", "rectangle", "disk", "annulus", "triangle", "notched", "arcs"))
    if shape is None:
        return None
    try:
        if shape == "polygon":
            pts = parse_points(sec._get("vertices", _REQUIRED), "[domain] vertices")
            sec.resolved["vertices"] = ", ".join(f"({x!r}, {y!r})" for x, y in pts)
            ids = sec.raw.get("ids")
            ids = re.split(r"[,\s]+", ids.strip()) if ids else None
            if ids is not None and len(ids) != len(pts):
                raise ConfigError("[domain] ids must name every side")
            return Domain2D.polygon(pts, ids=ids)
        if shape == "rectangle":
            box = sec.floats("box", _REQUIRED)
            if len(box) != 4 or box[2] <= box[0] or box[3] <= box[1]:
                raise ConfigError("[domain] box = x0 y0 x1 y1 with x1 > x0 and y1 > y0")
            return Domain2D.rectangle(*box)
        if shape == "disk":
            c = sec.floats("center", "0 0")
            return Domain2D.disk(tuple(c), sec.float("radius", 1.0, positive=True))
        if shape == "annulus":
            c = sec.floats("center", "0 0")
            return Domain2D.annulus(sec.float("r0", _REQUIRED, positive=True), sec.float("R", _REQUIRED, positive=True),
                                    tuple(c))
        if shape == "triangle":
            P = [parse_points(sec._get(k, d), f"[domain] {k}")[0]
                 for k, d in (("A", "0 0"), ("B", "1 0"), ("C", "0.5 0.85"))]
            for k, p in zip("ABC", P):
                sec.resolved[k] = f"{p[0]!r} {p[1]!r}"
            return Domain2D.triangle(*P)
        if shape == "notched":
            kw = {k: sec.float(k, d, positive=True) for k, d in
                  (("width", 2.0), ("height", 2.0), ("notch_depth", 0.8), ("notch_halfwidth", 0.4), ("eps", 0.2))}
            return Domain2D.notched_rectangle(**kw)
        built = []
        for aid, a in arcs:
            kind = a.str("type", _REQUIRED, choices=("segment", "circle", "polyline"))
            if kind == "segment":
                built.append(Segment(aid, tuple(a.floats("start", _REQUIRED)), tuple(a.floats("end", _REQUIRED))))
            elif kind == "circle":
                built.append(CircularArc(aid, tuple(a.floats("center", _REQUIRED)), a.float("radius", _REQUIRED,
                                                                                          positive=True),
                                         a.float("t0", _REQUIRED), a.float("t1", _REQUIRED)))
            else:
                built.append(Polyline(aid, tuple(parse_points(a._get("points", _REQUIRED), f"[arc.{aid}] points"))))
        if not built:
            raise ConfigError("shape = arcs needs [arc.<id>] sections")
        return Domain2D(tuple(built))
    except DomainError as exc:
        raise ConfigError(f"[domain] {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"[domain] malformed coordinates: {exc}") from None


def parse_config(text: str, experiment: str | None = None, source: str = "") -> RunConfig:
    """Parse and validate a configuration text; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"run", "domain", "data", "params"}
    for name in cp.sections():
        if name not in known and not name.startswith(("arc.", "piece.")):
            raise ConfigError(f"unknown section [{name}]")
    sections = {name: Section(name, dict(cp[name])) for name in cp.sections()}
    for name in known:
        sections.setdefault(name, Section(name, {}))
    run = sections["run"]
    exp = run.raw.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for experiment {exp!r}, not {experiment!r}")
    exp = run.str("experiment", exp, choices=EXPERIMENTS) if exp is not None else None
    if exp is None:
        raise ConfigError("no experiment named")
    tau = run.float("tau", 0.5, nonneg=True)
    h = run.float("h", None, positive=True)
    h_list = run.floats("h_list", None, positive=True)
    if h_list is not None and any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ConfigError("[run] h_list must be strictly decreasing")
    seed = run.int("seed", 0)
    jobs = run.int("jobs", 1, positive=True)
    out = run.str("out", None)
    arcs = [(name[4:], sec) for name, sec in sections.items() if name.startswith("arc.")]
    domain = _build_domain(sections["domain"], arcs)
    data_sec = sections["data"]
    spec: dict = {}
    if "exact" in data_sec.raw:
        spec["exact"] = data_sec.str("exact")
    if "default" in data_sec.raw:
        spec["default"] = data_sec.expr("default")
    pieces = {}
    for name, sec in sections.items():
        if name.startswith("piece."):
            aid = name[6:]
            if domain is None or aid not in domain.arc_ids:
                raise ConfigError(f"[{name}] does not name an arc of the domain")
            pieces[aid] = sec.expr("value", _REQUIRED)
    if pieces:
        spec["pieces"] = pieces
    if domain is not None and (spec.get("default") is not None or pieces) and "exact" not in spec:
        missing = [a for a in domain.arc_ids if a not in pieces and spec.get("default") is None]
        if missing:
            raise ConfigError(f"no data for arcs {missing}")
    cfg = RunConfig(exp, tau, h, h_list, seed, jobs, out, domain, sections, source, spec)
    if domain is not None and spec:
        # resolve data once so that bad expressions fail at parse time
        try:
            build_data(domain, spec, tau)
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"[data] {exc}") from None
    return cfg


def load_config(path, experiment: str | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, experiment, source=str(p))
