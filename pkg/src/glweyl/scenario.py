"""Scenario files (TOML) and the built-in catalog.

Layout::

    [scenario]
    name = "sphere"          # optional, defaults to the file stem
    n = 2
    seed = 42
    points = 64
    engine = "symbolic"      # or "fd"
    fd_step = 1e-5
    tolerance = 1e-9         # optional override of the engine default
    exclusions = ["sin(x1)"] # reject points where |expr| < exclusion_eps
    exclusion_eps = 1e-3

    [scenario.box]           # unspecified coordinates range over [-1, 1]
    x1 = [0.3, 2.8]

    [metric]
    signature = [2, 0]       # optional
    g_1_1 = "1"              # upper triangle suffices, missing entries are 0
    g_2_2 = "sin(x1)^2"

    [nonlinear]              # omitted section means N = 0
    kind = "canonical"       # or entries N_j_i = "expr" for N^j_i

    [weyl]
    w_1 = "0.4"

    [gauges]
    exprs = ["0", "0.3*x1"]
"""

from __future__ import annotations

import re
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import tomli_w

from . import expr as ex
from .manifold import SampleBox
from .verify import Scenario, ScenarioError

__all__ = ["ScenarioFileError", "CATALOG", "CATALOG_SUMMARY", "load_scenario",
           "loads_scenario", "dumps_scenario", "catalog_names"]


class ScenarioFileError(ValueError):
    """Input error with file, line and field context."""

    def __init__(self, message: str, source: str = "<string>", line: int | None = None,
                 field: str | None = None):
        self.source, self.line, self.field = source, line, field
        where = source if line is None else f"{source}:{line}"
        if field:
            where += f": {field}"
        super().__init__(f"{where}: {message}")


CATALOG: dict[str, str] = {
    "euclidean": """
[scenario]
name = "euclidean"
n = 2

[metric]
signature = [2, 0]
g_1_1 = "1"
g_2_2 = "1"

[gauges]
exprs = ["0", "x1"]
""",
    "sphere": """
[scenario]
name = "sphere"
n = 2
exclusions = ["sin(x1)"]

[scenario.box]
x1 = [0.3, 2.8]
x2 = [-3.0, 3.0]

[metric]
signature = [2, 0]
g_1_1 = "1"
g_2_2 = "sin(x1)^2"

[nonlinear]
kind = "canonical"

[gauges]
exprs = ["0", "sin(x2)"]
""",
    "euclid-weyl": """
[scenario]
name = "euclid-weyl"
n = 2

[metric]
signature = [2, 0]
g_1_1 = "1"
g_2_2 = "1"

[weyl]
w_1 = "0.4"
w_2 = "0"

[gauges]
exprs = ["0", "0.3*x1"]
""",
    "gl-quadratic": """
[scenario]
name = "gl-quadratic"
n = 3

[metric]
signature = [3, 0]
g_1_1 = "1 + x1^2 + y1^2 + y2^2 + y3^2"
g_2_2 = "1 + x1^2 + y1^2 + y2^2 + y3^2"
g_3_3 = "1 + x1^2 + y1^2 + y2^2 + y3^2"

[weyl]
w_1 = "x2*0.2"

[gauges]
exprs = ["0", "sin(x2)*0.1"]
""",
}

CATALOG_SUMMARY = {
    "euclidean": "flat metric delta_ij, N = 0, w = 0, n = 2",
    "sphere": "diag(1, sin(x1)^2), canonical N, w = 0, x1 in [0.3, 2.8]",
    "euclid-weyl": "flat metric, N = 0, w0 = (0.4, 0), gauges {0, 0.3*x1}",
    "gl-quadratic": "(1 + x1^2 + |y|^2) delta_ij, N = 0, w0 = (0.2*x2, 0, 0), "
                    "gauges {0, 0.1*sin(x2)}, n = 3",
}


def catalog_names() -> list[str]:
    return list(CATALOG)


_ENTRY = {
    "metric": re.compile(r"g_(\d+)_(\d+)$"),
    "nonlinear": re.compile(r"N_(\d+)_(\d+)$"),
    "weyl": re.compile(r"w_(\d+)$"),
}


def _locate(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[([^\[\]]+)\]$", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return lineno
    return None


class _Reader:
    def __init__(self, text: str, source: str):
        self.text, self.source = text, source

    def fail(self, message, section, key=None):
        line = _locate(self.text, section, key) if key else None
        if line is None:
            line = _locate_section(self.text, section)
        field = f"{section}.{key}" if key else section
        raise ScenarioFileError(message, self.source, line, field)

    def expr(self, value, n, section, key):
        if not isinstance(value, str):
            self.fail("expected an expression string", section, key)
        try:
            return ex.parse(value, n)
        except ex.ExprError as err:
            self.fail(str(err), section, key)


def _locate_section(text: str, section: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def _number(r: _Reader, table, section, key, kind, default):
    v = table.get(key, default)
    if v is None:
        return None
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        r.fail(f"{key} must be an integer", section, key)
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            r.fail(f"{key} must be a number", section, key)
        v = float(v)
    return v


def loads_scenario(text: str, source: str = "<string>", default_name: str = "scenario") -> Scenario:
    """Parse scenario text.  Raises ScenarioFileError on any input problem."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+)", str(err))
        raise ScenarioFileError(f"invalid TOML: {err}", source,
                                int(m.group(1)) if m else None) from None
    r = _Reader(text, source)
    unknown = set(data) - {"scenario", "metric", "nonlinear", "weyl", "gauges"}
    if unknown:
        r.fail(f"unknown section(s) {sorted(unknown)}", sorted(unknown)[0])
    sc = data.get("scenario")
    if not isinstance(sc, dict):
        raise ScenarioFileError("missing [scenario] section", source)
    allowed = {"name", "n", "seed", "points", "engine", "fd_step", "tolerance",
               "exclusions", "exclusion_eps", "box"}
    for key in sc:
        if key not in allowed:
            r.fail(f"unknown key {key!r}", "scenario", key)
    n = _number(r, sc, "scenario", "n", int, None)
    if n is None or n < 1:
        r.fail("n must be a positive integer", "scenario", "n")

    box_table = sc.get("box", {})
    if not isinstance(box_table, dict):
        r.fail("box must be a table", "scenario", "box")
    bounds = {}
    for key, v in box_table.items():
        m = re.fullmatch(r"([xy])(\d+)", key)
        if not m or not 1 <= int(m.group(2)) <= n:
            r.fail(f"unknown box coordinate {key!r}", "scenario.box", key)
        if (not isinstance(v, list) or len(v) != 2
                or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in v)
                or not v[0] <= v[1]):
            r.fail("box entries must be [lo, hi] with lo <= hi", "scenario.box", key)
        bounds[m.group(1), int(m.group(2))] = (float(v[0]), float(v[1]))
    exclusions = sc.get("exclusions", [])
    if not isinstance(exclusions, list):
        r.fail("exclusions must be a list", "scenario", "exclusions")
    box = SampleBox(
        tuple(bounds.get(("x", i), (-1.0, 1.0)) for i in range(1, n + 1)),
        tuple(bounds.get(("y", i), (-1.0, 1.0)) for i in range(1, n + 1)),
        tuple(r.expr(e, n, "scenario", "exclusions") for e in exclusions),
        _number(r, sc, "scenario", "exclusion_eps", float, 1e-3),
    )

    def entries(section, allow_extra=()):
        table = data.get(section, {})
        if not isinstance(table, dict):
            r.fail("expected a table", section)
        out = {}
        for key, value in table.items():
            if key in allow_extra:
                continue
            m = _ENTRY[section].match(key)
            if not m:
                r.fail(f"unknown key {key!r}", section, key)
            idx = tuple(int(g) - 1 for g in m.groups())
            if not all(0 <= i < n for i in idx):
                r.fail(f"index outside 1..{n}", section, key)
            out[idx if len(idx) > 1 else idx[0]] = r.expr(value, n, section, key)
        return out

    metric = entries("metric", allow_extra=("signature",))
    if not metric:
        r.fail("metric needs at least one entry", "metric")
    signature = data.get("metric", {}).get("signature")
    if signature is not None:
        if (not isinstance(signature, list) or len(signature) != 2
                or not all(isinstance(v, int) and v >= 0 for v in signature)
                or sum(signature) != n):
            r.fail(f"signature must be [p_plus, p_minus] adding up to {n}", "metric", "signature")
        signature = tuple(signature)

    nl_table = data.get("nonlinear")
    if nl_table is None:
        nonlinear = None
    else:
        kind = nl_table.get("kind") if isinstance(nl_table, dict) else None
        if kind is not None:
            if kind != "canonical":
                r.fail("kind must be \"canonical\"", "nonlinear", "kind")
            if len(nl_table) > 1:
                r.fail("kind = \"canonical\" cannot be mixed with entries", "nonlinear", "kind")
            nonlinear = "canonical"
        else:
            nonlinear = entries("nonlinear")

    w = entries("weyl")
    weyl = tuple(w.get(i, ex.const(0.0)) for i in range(n))

    g_table = data.get("gauges", {})
    if not isinstance(g_table, dict) or set(g_table) - {"exprs"}:
        r.fail("gauges must contain only 'exprs'", "gauges")
    g_list = g_table.get("exprs", [])
    if not isinstance(g_list, list):
        r.fail("exprs must be a list of expressions", "gauges", "exprs")
    gauges = tuple(r.expr(e, n, "gauges", "exprs") for e in g_list)

    engine = sc.get("engine", "symbolic")
    if engine not in ("symbolic", "fd"):
        r.fail("engine must be \"symbolic\" or \"fd\"", "scenario", "engine")
    name = sc.get("name", default_name)
    if not isinstance(name, str):
        r.fail("name must be a string", "scenario", "name")
    try:
        return Scenario(
            name=name, n=n, metric=metric, weyl=weyl, gauges=gauges,
            nonlinear=nonlinear, signature=signature, box=box,
            seed=_number(r, sc, "scenario", "seed", int, 42),
            points=_number(r, sc, "scenario", "points", int, 64),
            engine=engine,
            fd_step=_number(r, sc, "scenario", "fd_step", float, 1e-5),
            tolerance=_number(r, sc, "scenario", "tolerance", float, None),
        )
    except (ScenarioError, ValueError) as err:
        field = getattr(err, "field", None)
        if field and "." in field:
            section, key = field.split(".", 1)
            r.fail(str(err), section, key)
        r.fail(str(err), field or "scenario")


def load_scenario(source: str) -> Scenario:
    """Load a catalog entry by name, or a scenario file by path."""
    if source in CATALOG:
        return loads_scenario(CATALOG[source], f"<catalog:{source}>", source)
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ScenarioFileError(f"cannot read scenario ({err.strerror or err})", source) from None
    except UnicodeDecodeError:
        raise ScenarioFileError("scenario file is not valid UTF-8", source) from None
    return loads_scenario(text, source, path.stem)


def dumps_scenario(s: Scenario) -> str:
    """Serialize a scenario; ``loads_scenario`` of the result is equivalent."""
    sc = {"name": s.name, "n": s.n, "seed": s.seed, "points": s.points,
          "engine": s.engine, "fd_step": s.fd_step}
    if s.tolerance is not None:
        sc["tolerance"] = s.tolerance
    if s.box.exclusions:
        sc["exclusions"] = [ex.to_text(e) for e in s.box.exclusions]
    sc["exclusion_eps"] = s.box.exclusion_eps
    box = {}
    for kind, bounds in (("x", s.box.x_bounds), ("y", s.box.y_bounds)):
        for i, b in enumerate(bounds, 1):
            box[f"{kind}{i}"] = list(b)
    sc["box"] = box
    metric: dict = {}
    if s.signature is not None:
        metric["signature"] = list(s.signature)
    for (i, j), e in sorted(s.metric.items()):
        metric[f"g_{i + 1}_{j + 1}"] = ex.to_text(e)
    data = {"scenario": sc, "metric": metric}
    if s.nonlinear == "canonical":
        data["nonlinear"] = {"kind": "canonical"}
    elif s.nonlinear:
        data["nonlinear"] = {f"N_{j + 1}_{i + 1}": ex.to_text(e)
                             for (j, i), e in sorted(s.nonlinear.items())}
    data["weyl"] = {f"w_{i + 1}": ex.to_text(e) for i, e in enumerate(s.weyl)}
    data["gauges"] = {"exprs": [ex.to_text(e) for e in s.gauges]}
    return tomli_w.dumps(data)
