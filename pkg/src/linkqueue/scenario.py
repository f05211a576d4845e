"""Line-oriented scenario files.

Grammar (``#`` starts a comment, blank lines are ignored)::

    file        := section+
    section     := "[" name "]" NEWLINE line*
    name        := network | boundary | initial | simulation | experiment

    [network]
    link <id> normal length=<mi> lanes=<n> [v=<mph>] [w=<mph>] [kj=<vpmpl>]
    link <id> origin [queue]
    link <id> destination
    junction <id> up=<ids> down=<ids> [rule=<rule>] [alpha=<x>] [beta=<x>]
             [signal=<cycle>:<start>-<end>[;<start>-<end>...]]
    commodity <id> path=<ids>

    [boundary]
    demand|arrival|supply <link> constant <vph>
    demand|arrival|supply <link> half_sine <peak vph> <period h>
    demand|arrival|supply <link> piecewise <t>:<vph> [<t>:<vph> ...]
    split <origin> <commodity>=<share> [...]

    [initial]
    density <link> <vpm>
    commodity <link> <commodity> <vpm>
    queue <origin> <veh>
    commodity_queue <origin> <commodity> <veh>

    [simulation]                        (key = value)
    engine, dt, horizon, record_every, dx, ctm_dt, cfl_override

    [experiment]                        (key = value)
    kind = single-link-oracle | ring-mfd | dm2-regime | stability
    ...kind-specific keys, see EXPERIMENT_KEYS

``<ids>`` is a comma-separated list; ``<rule>`` is one of linear,
fair_merge, priority_merge, fifo_diverge, evacuation_diverge, unified.
Times are hours, lengths miles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from linkqueue.fd import TriangularFD
from linkqueue.lqm import check_cfl
from linkqueue.network import (
    BoundaryConditions,
    Commodity,
    Constant,
    EvacuationDiverge,
    FairMerge,
    FifoDiverge,
    HalfSine,
    Junction,
    Linear,
    Link,
    LinkKind,
    Network,
    NetworkError,
    NetworkState,
    Piecewise,
    PriorityMerge,
    SignalProgram,
    UnifiedFairFifo,
    build_network,
    validate_state,
)
from linkqueue.networks import K_JAM_PER_LANE, V_FREE, W_BACK

SECTIONS = ("network", "boundary", "initial", "simulation", "experiment")
ENGINES = ("lq", "ctm")
RULES = {
    "linear": Linear,
    "fair_merge": FairMerge,
    "priority_merge": PriorityMerge,
    "fifo_diverge": FifoDiverge,
    "evacuation_diverge": EvacuationDiverge,
    "unified": UnifiedFairFifo,
}
RULE_NAMES = {cls: name for name, cls in RULES.items()}
EXPERIMENT_KEYS = {
    "single-link-oracle": set(),
    "ring-mfd": {"densities", "cycle_minutes", "average_cycles"},
    "dm2-regime": {"series"},
    "stability": {"xi"},
}


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ScenarioSyntaxError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


@dataclass
class SimulationSpec:
    engines: tuple[str, ...] = ("lq",)
    dt: float = 1e-4
    horizon: float = 1.0
    record_every: int = 1
    dx: float | None = None
    ctm_dt: float | None = None
    cfl_override: bool = False


@dataclass
class ExperimentSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    network: Network
    boundary: BoundaryConditions
    initial: NetworkState
    simulation: SimulationSpec
    experiment: ExperimentSpec | None = None
    name: str = field(default="scenario", compare=False)

    @property
    def ctm_dt(self) -> float:
        """CTM step: explicit, or the largest step with CFL number one."""
        if self.simulation.ctm_dt is not None:
            return self.simulation.ctm_dt
        if self.simulation.dx is None:
            raise ValueError("scenario has no cell size for the CTM")
        return self.simulation.dx / max(l.fd.v_free for l in self.network.normal_links)


# --- tokenizing -------------------------------------------------------------


@dataclass
class _Token:
    text: str
    line: int
    col: int


def _tokens(raw: str, lineno: int) -> list[_Token]:
    out = []
    i, n = 0, len(raw)
    while i < n:
        if raw[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not raw[j].isspace():
            j += 1
        out.append(_Token(raw[i:j], lineno, i + 1))
        i = j
    return out


def _strip_comment(raw: str) -> str:
    pos = raw.find("#")
    return raw if pos < 0 else raw[:pos]


def _num(tok: _Token, text: str | None = None) -> float:
    text = tok.text if text is None else text
    try:
        value = float(text)
    except ValueError:
        raise ScenarioSyntaxError(f"expected a number, got {text!r}", tok.line, tok.col) from None
    if not math.isfinite(value):
        raise ScenarioSyntaxError(f"non-finite number {text!r}", tok.line, tok.col)
    return value


def _int(tok: _Token, text: str | None = None) -> int:
    text = tok.text if text is None else text
    try:
        return int(text)
    except ValueError:
        raise ScenarioSyntaxError(f"expected an integer, got {text!r}", tok.line, tok.col) from None


def _ids(tok: _Token, text: str) -> tuple[int, ...]:
    if not text:
        raise ScenarioSyntaxError("empty id list", tok.line, tok.col)
    return tuple(_int(tok, part.strip()) for part in text.split(","))


def _options(tokens: list[_Token], allowed: set[str]) -> dict[str, _Token]:
    """Parse trailing key=value tokens; the value token keeps the key's position."""
    opts = {}
    for tok in tokens:
        key, sep, value = tok.text.partition("=")
        if not sep:
            raise ScenarioSyntaxError(f"expected key=value, got {tok.text!r}", tok.line, tok.col)
        if key not in allowed:
            raise ScenarioSyntaxError(f"unknown key {key!r}", tok.line, tok.col)
        if key in opts:
            raise ScenarioSyntaxError(f"duplicate key {key!r}", tok.line, tok.col)
        opts[key] = _Token(value, tok.line, tok.col + len(key) + 1)
    return opts


def _need(tokens: list[_Token], count: int, what: str, line: int) -> None:
    if len(tokens) < count:
        col = tokens[-1].col + len(tokens[-1].text) if tokens else 1
        raise ScenarioSyntaxError(f"{what}: expected {count - 1} argument(s)", line, col)


# --- section parsers --------------------------------------------------------


def _parse_link(toks, line):
    _need(toks, 3, "link", line)
    lid = _int(toks[1])
    kind = toks[2].text
    if kind == "normal":
        opts = _options(toks[3:], {"length", "lanes", "v", "w", "kj"})
        for key in ("length", "lanes"):
            if key not in opts:
                raise ScenarioSyntaxError(f"normal link needs {key}=", line, toks[2].col)
        fd = TriangularFD(
            _num(opts["v"]) if "v" in opts else V_FREE,
            _num(opts["w"]) if "w" in opts else W_BACK,
            _num(opts["kj"]) if "kj" in opts else K_JAM_PER_LANE,
            _int(opts["lanes"]),
        )
        return Link(lid, LinkKind.NORMAL, _num(opts["length"]), fd)
    if kind == "origin":
        extra = toks[3:]
        if len(extra) > 1 or (extra and extra[0].text != "queue"):
            bad = extra[1] if len(extra) > 1 else extra[0]
            raise ScenarioSyntaxError(f"unexpected {bad.text!r}", line, bad.col)
        return Link(lid, LinkKind.ORIGIN, point_queue=bool(extra))
    if kind == "destination":
        if len(toks) > 3:
            raise ScenarioSyntaxError(f"unexpected {toks[3].text!r}", line, toks[3].col)
        return Link(lid, LinkKind.DESTINATION)
    raise ScenarioSyntaxError(f"unknown link kind {kind!r}", line, toks[2].col)


def _parse_signal(tok: _Token) -> SignalProgram:
    cycle_text, sep, rest = tok.text.partition(":")
    if not sep:
        raise ScenarioSyntaxError("signal must look like cycle:start-end", tok.line, tok.col)
    intervals = []
    for part in rest.split(";"):
        start, dash, end = part.partition("-")
        if not dash:
            raise ScenarioSyntaxError(f"bad green interval {part!r}", tok.line, tok.col)
        intervals.append((_num(tok, start), _num(tok, end)))
    return SignalProgram(_num(tok, cycle_text), tuple(intervals))


def _parse_junction(toks, line):
    _need(toks, 2, "junction", line)
    jid = _int(toks[1])
    opts = _options(toks[2:], {"up", "down", "rule", "alpha", "beta", "signal"})
    for key in ("up", "down"):
        if key not in opts:
            raise ScenarioSyntaxError(f"junction needs {key}=", line, toks[1].col)
    rule_name = opts["rule"].text if "rule" in opts else "linear"
    if rule_name not in RULES:
        tok = opts["rule"]
        raise ScenarioSyntaxError(f"unknown rule {rule_name!r}", tok.line, tok.col)
    if "alpha" in opts and rule_name != "priority_merge":
        raise ScenarioSyntaxError("alpha= only applies to priority_merge", line, opts["alpha"].col)
    if "beta" in opts and rule_name != "evacuation_diverge":
        raise ScenarioSyntaxError("beta= only applies to evacuation_diverge", line, opts["beta"].col)
    if rule_name == "priority_merge":
        if "alpha" not in opts:
            raise ScenarioSyntaxError("priority_merge needs alpha=", line, toks[1].col)
        rule = PriorityMerge(_num(opts["alpha"]))
    elif rule_name == "evacuation_diverge":
        if "beta" not in opts:
            raise ScenarioSyntaxError("evacuation_diverge needs beta=", line, toks[1].col)
        rule = EvacuationDiverge(_num(opts["beta"]))
    else:
        rule = RULES[rule_name]()
    signal = _parse_signal(opts["signal"]) if "signal" in opts else None
    return Junction(jid, _ids(opts["up"], opts["up"].text), _ids(opts["down"], opts["down"].text), rule, signal)


def _parse_rate(toks, line):
    _need(toks, 4, toks[0].text, line)
    form = toks[2].text
    args = toks[3:]
    if form == "constant":
        if len(args) != 1:
            raise ScenarioSyntaxError("constant takes one value", line, toks[2].col)
        return Constant(_num(args[0]))
    if form == "half_sine":
        if len(args) != 2:
            raise ScenarioSyntaxError("half_sine takes a peak and a period", line, toks[2].col)
        return HalfSine(_num(args[0]), _num(args[1]))
    if form == "piecewise":
        times, values = [], []
        for tok in args:
            t, sep, v = tok.text.partition(":")
            if not sep:
                raise ScenarioSyntaxError("piecewise entries look like t:value", tok.line, tok.col)
            times.append(_num(tok, t))
            values.append(_num(tok, v))
        return Piecewise(tuple(times), tuple(values))
    raise ScenarioSyntaxError(f"unknown rate form {form!r}", line, toks[2].col)


def _parse_bool(tok: _Token) -> bool:
    if tok.text in ("true", "yes", "1"):
        return True
    if tok.text in ("false", "no", "0"):
        return False
    raise ScenarioSyntaxError(f"expected true or false, got {tok.text!r}", tok.line, tok.col)


def _key_values(lines) -> dict[str, tuple[_Token, _Token]]:
    """``key = value`` lines; returns key -> (key token, value token)."""
    out = {}
    for raw, lineno in lines:
        key, sep, value = raw.partition("=")
        if not sep:
            toks = _tokens(raw, lineno)
            raise ScenarioSyntaxError("expected key = value", lineno, toks[0].col)
        kcol = len(raw) - len(raw.lstrip()) + 1
        vcol = len(key) + 2 + (len(value) - len(value.lstrip()))
        ktok = _Token(key.strip(), lineno, kcol)
        if not ktok.text:
            raise ScenarioSyntaxError("missing key", lineno, kcol)
        vtok = _Token(value.strip(), lineno, vcol)
        if not vtok.text:
            raise ScenarioSyntaxError(f"missing value for {ktok.text!r}", lineno, vcol)
        if ktok.text in out:
            raise ScenarioSyntaxError(f"duplicate key {ktok.text!r}", lineno, kcol)
        out[ktok.text] = (ktok, vtok)
    return out


def _list(tok: _Token, conv) -> tuple:
    parts = [p.strip() for p in tok.text.split(",")]
    if not all(parts):
        raise ScenarioSyntaxError("empty list entry", tok.line, tok.col)
    return tuple(conv(tok, p) for p in parts)


def _parse_simulation(lines, header_line):
    kv = _key_values(lines)
    allowed = {"engine", "dt", "horizon", "record_every", "dx", "ctm_dt", "cfl_override"}
    for key, (ktok, _) in kv.items():
        if key not in allowed:
            raise ScenarioSyntaxError(f"unknown key {key!r}", ktok.line, ktok.col)
    for key in ("dt", "horizon"):
        if key not in kv:
            raise ScenarioSyntaxError(f"simulation needs {key}", header_line)
    spec = SimulationSpec()
    if "engine" in kv:
        tok = kv["engine"][1]
        engines = tuple(p.strip() for p in tok.text.split(","))
        for e in engines:
            if e not in ENGINES:
                raise ScenarioSyntaxError(f"unknown engine {e!r}", tok.line, tok.col)
        if len(set(engines)) != len(engines):
            raise ScenarioSyntaxError("engine listed twice", tok.line, tok.col)
        spec.engines = engines
    positive = {}
    for key in ("dt", "horizon", "dx", "ctm_dt"):
        if key in kv:
            tok = kv[key][1]
            value = _num(tok)
            if not value > 0:
                raise ScenarioSyntaxError(f"{key} must be positive", tok.line, tok.col)
            positive[key] = value
    spec.dt = positive["dt"]
    spec.horizon = positive["horizon"]
    spec.dx = positive.get("dx")
    spec.ctm_dt = positive.get("ctm_dt")
    if "record_every" in kv:
        tok = kv["record_every"][1]
        spec.record_every = _int(tok)
        if spec.record_every < 1:
            raise ScenarioSyntaxError("record_every must be at least 1", tok.line, tok.col)
    if "cfl_override" in kv:
        spec.cfl_override = _parse_bool(kv["cfl_override"][1])
    if spec.horizon < spec.dt:
        raise ScenarioSyntaxError("horizon shorter than one step", kv["horizon"][1].line, kv["horizon"][1].col)
    return spec, kv


def _parse_experiment(lines, header_line):
    kv = _key_values(lines)
    if "kind" not in kv:
        raise ScenarioSyntaxError("experiment needs kind", header_line)
    kind_tok = kv.pop("kind")[1]
    kind = kind_tok.text
    if kind not in EXPERIMENT_KEYS:
        raise ScenarioSyntaxError(f"unknown experiment kind {kind!r}", kind_tok.line, kind_tok.col)
    params = {}
    for key, (ktok, vtok) in kv.items():
        if key not in EXPERIMENT_KEYS[kind]:
            raise ScenarioSyntaxError(f"unknown key {key!r} for {kind}", ktok.line, ktok.col)
        if key == "series":
            params[key] = _list(vtok, _int)
        elif key == "average_cycles":
            params[key] = _int(vtok)
        elif key == "xi":
            params[key] = _num(vtok)
        else:
            params[key] = _list(vtok, _num)
    return ExperimentSpec(kind, params)


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    sections: dict[str, tuple[int, list[tuple[str, int]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        stripped = body.strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            col = body.index("[") + 1
            if not stripped.endswith("]"):
                raise ScenarioSyntaxError("unterminated section header", lineno, col)
            sec = stripped[1:-1].strip()
            if sec not in SECTIONS:
                raise ScenarioSyntaxError(f"unknown section {sec!r}", lineno, col + 1)
            if sec in sections:
                raise ScenarioSyntaxError(f"duplicate section {sec!r}", lineno, col + 1)
            sections[sec] = (lineno, [])
            current = sec
            continue
        if current is None:
            col = len(body) - len(body.lstrip()) + 1
            raise ScenarioSyntaxError("content before the first section header", lineno, col)
        sections[current][1].append((body, lineno))
    if "network" not in sections:
        raise ScenarioSyntaxError("missing [network] section", 1)
    if "simulation" not in sections:
        raise ScenarioSyntaxError("missing [simulation] section", 1)

    # network
    net_line, net_lines = sections["network"]
    links, junctions, commodities = [], [], []
    for raw, lineno in net_lines:
        toks = _tokens(raw, lineno)
        head = toks[0]
        try:
            if head.text == "link":
                links.append(_parse_link(toks, lineno))
            elif head.text == "junction":
                junctions.append(_parse_junction(toks, lineno))
            elif head.text == "commodity":
                _need(toks, 2, "commodity", lineno)
                opts = _options(toks[2:], {"path"})
                if "path" not in opts:
                    raise ScenarioSyntaxError("commodity needs path=", lineno, toks[1].col)
                commodities.append(Commodity(_int(toks[1]), _ids(opts["path"], opts["path"].text)))
            else:
                raise ScenarioSyntaxError(f"unknown network entry {head.text!r}", lineno, head.col)
        except (NetworkError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioValidationError(str(exc), lineno, head.col) from None
    try:
        network = build_network(links, junctions, commodities)
    except (NetworkError, ValueError) as exc:
        raise ScenarioValidationError(str(exc), net_line) from None

    # boundary
    bc = BoundaryConditions()
    if "boundary" in sections:
        b_line, b_lines = sections["boundary"]
        for raw, lineno in b_lines:
            toks = _tokens(raw, lineno)
            head = toks[0]
            try:
                if head.text in ("demand", "arrival", "supply"):
                    _need(toks, 2, head.text, lineno)
                    lid = _int(toks[1])
                    table = getattr(bc, head.text)
                    if lid in table:
                        raise ScenarioSyntaxError(f"duplicate {head.text} for link {lid}", lineno, toks[1].col)
                    table[lid] = _parse_rate(toks, lineno)
                elif head.text == "split":
                    _need(toks, 3, "split", lineno)
                    lid = _int(toks[1])
                    if lid in bc.split:
                        raise ScenarioSyntaxError(f"duplicate split for link {lid}", lineno, toks[1].col)
                    shares = {}
                    for tok in toks[2:]:
                        w, sep, x = tok.text.partition("=")
                        if not sep:
                            raise ScenarioSyntaxError("split entries look like commodity=share", lineno, tok.col)
                        shares[_int(tok, w)] = _num(tok, x)
                    bc.split[lid] = shares
                else:
                    raise ScenarioSyntaxError(f"unknown boundary entry {head.text!r}", lineno, head.col)
            except ScenarioError:
                raise
            except ValueError as exc:
                raise ScenarioValidationError(str(exc), lineno, head.col) from None
        try:
            bc.validate(network)
            for o in network.origins if network.routed else ():
                bc.origin_split(network, o.id, 0.0)
        except ValueError as exc:
            raise ScenarioValidationError(str(exc), b_line) from None

    # initial state
    state = NetworkState.empty(network)
    if "initial" in sections:
        i_line, i_lines = sections["initial"]
        for raw, lineno in i_lines:
            toks = _tokens(raw, lineno)
            head = toks[0]
            if head.text in ("density", "queue"):
                if len(toks) != 3:
                    raise ScenarioSyntaxError(f"{head.text} takes a link and a value", lineno, head.col)
                target = state.density if head.text == "density" else state.queue
                lid = _int(toks[1])
                if lid not in target:
                    kind = "normal link" if head.text == "density" else "point-queue origin"
                    raise ScenarioValidationError(f"link {lid} is not a {kind}", lineno, toks[1].col)
                target[lid] = _num(toks[2])
            elif head.text in ("commodity", "commodity_queue"):
                if len(toks) != 4:
                    raise ScenarioSyntaxError(f"{head.text} takes a link, a commodity and a value", lineno, head.col)
                target = state.commodity_density if head.text == "commodity" else state.commodity_queue
                lid, w = _int(toks[1]), _int(toks[2])
                if lid not in target or w not in target[lid]:
                    raise ScenarioValidationError(f"commodity {w} does not use link {lid}", lineno, toks[1].col)
                target[lid][w] = _num(toks[3])
            else:
                raise ScenarioSyntaxError(f"unknown initial entry {head.text!r}", lineno, head.col)
        problems = validate_state(network, state)
        if problems:
            raise ScenarioValidationError("; ".join(problems), i_line)

    # simulation
    s_line, s_lines = sections["simulation"]
    sim, kv = _parse_simulation(s_lines, s_line)
    if "ctm" in sim.engines and sim.dx is None:
        raise ScenarioSyntaxError("the ctm engine needs dx", s_line)
    if not sim.cfl_override:
        _check_scenario_cfl(network, sim, kv)

    experiment = None
    if "experiment" in sections:
        e_line, e_lines = sections["experiment"]
        experiment = _parse_experiment(e_lines, e_line)
    return Scenario(network, bc, state, sim, experiment, name)


def _check_scenario_cfl(network, sim, kv):
    if "lq" in sim.engines:
        violation = check_cfl(network, sim.dt)
        if violation is not None:
            tok = kv["dt"][1]
            raise ScenarioValidationError(
                f"dt={sim.dt} violates the CFL bound {violation.bound!r} h (link {violation.link}); "
                "set cfl_override = true to run anyway",
                tok.line,
                tok.col,
            )
    if "ctm" in sim.engines and sim.ctm_dt is not None and network.normal_links:
        bound = min(
            (l.length / max(1, round(l.length / sim.dx))) / l.fd.v_free for l in network.normal_links
        )
        if sim.ctm_dt > bound * (1 + 1e-12):
            tok = kv["ctm_dt"][1]
            raise ScenarioValidationError(
                f"ctm_dt={sim.ctm_dt} violates the CFL bound {bound!r} h; set cfl_override = true to run anyway",
                tok.line,
                tok.col,
            )


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


# --- serialization ------------------------------------------------------------


def _f(x: float) -> str:
    return repr(float(x))


def _rate_text(fn) -> str:
    if isinstance(fn, Constant):
        return f"constant {_f(fn.value)}"
    if isinstance(fn, HalfSine):
        return f"half_sine {_f(fn.peak)} {_f(fn.period)}"
    if isinstance(fn, Piecewise):
        return "piecewise " + " ".join(f"{_f(t)}:{_f(v)}" for t, v in zip(fn.times, fn.values))
    raise ValueError(f"rate {fn!r} has no scenario-file form")


def _ids_text(ids) -> str:
    return ",".join(str(i) for i in ids)


def serialize_scenario(sc: Scenario) -> str:
    net = sc.network
    out = ["[network]"]
    for link in net.links:
        if link.kind is LinkKind.NORMAL:
            fd = link.fd
            out.append(
                f"link {link.id} normal length={_f(link.length)} lanes={fd.lanes} "
                f"v={_f(fd.v_free)} w={_f(fd.w_back)} kj={_f(fd.k_jam_per_lane)}"
            )
        elif link.kind is LinkKind.ORIGIN:
            out.append(f"link {link.id} origin" + (" queue" if link.point_queue else ""))
        else:
            out.append(f"link {link.id} destination")
    for j in net.junctions:
        text = f"junction {j.id} up={_ids_text(j.upstream)} down={_ids_text(j.downstream)} rule={RULE_NAMES[type(j.rule)]}"
        if isinstance(j.rule, PriorityMerge):
            text += f" alpha={_f(j.rule.alpha)}"
        if isinstance(j.rule, EvacuationDiverge):
            text += f" beta={_f(j.rule.beta)}"
        if j.signal is not None:
            greens = ";".join(f"{_f(a)}-{_f(b)}" for a, b in j.signal.green)
            text += f" signal={_f(j.signal.cycle)}:{greens}"
        out.append(text)
    for c in net.commodities:
        out.append(f"commodity {c.id} path={_ids_text(c.path)}")

    bc = sc.boundary
    out += ["", "[boundary]"]
    for key in ("demand", "arrival", "supply"):
        for lid, fn in getattr(bc, key).items():
            out.append(f"{key} {lid} {_rate_text(fn)}")
    for lid, shares in bc.split.items():
        if any(callable(x) for x in shares.values()):
            raise ValueError("time-varying splits have no scenario-file form")
        out.append(f"split {lid} " + " ".join(f"{w}={_f(x)}" for w, x in shares.items()))

    st = sc.initial
    out += ["", "[initial]"]
    for lid, k in st.density.items():
        out.append(f"density {lid} {_f(k)}")
        for w, kw in st.commodity_density.get(lid, {}).items():
            out.append(f"commodity {lid} {w} {_f(kw)}")
    for lid, K in st.queue.items():
        out.append(f"queue {lid} {_f(K)}")
        for w, kw in st.commodity_queue.get(lid, {}).items():
            out.append(f"commodity_queue {lid} {w} {_f(kw)}")

    sim = sc.simulation
    out += ["", "[simulation]", f"engine = {','.join(sim.engines)}", f"dt = {_f(sim.dt)}", f"horizon = {_f(sim.horizon)}"]
    out.append(f"record_every = {sim.record_every}")
    if sim.dx is not None:
        out.append(f"dx = {_f(sim.dx)}")
    if sim.ctm_dt is not None:
        out.append(f"ctm_dt = {_f(sim.ctm_dt)}")
    out.append(f"cfl_override = {'true' if sim.cfl_override else 'false'}")

    if sc.experiment is not None:
        out += ["", "[experiment]", f"kind = {sc.experiment.kind}"]
        for key, value in sc.experiment.params.items():
            if isinstance(value, tuple):
                text = ",".join(str(v) if isinstance(v, int) else _f(v) for v in value)
            else:
                text = str(value) if isinstance(value, int) else _f(value)
            out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


BUNDLED_DIR = Path(__file__).parent / "scenarios"


def bundled_scenarios() -> list[Path]:
    return sorted(BUNDLED_DIR.glob("*.scn"))
