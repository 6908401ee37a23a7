"""Hole solving: exhaustive enumeration and solver-backed CEGIS.

Both backends decide the same question: does some assignment to the
sketch's holes make every output agree with the design on every input?
Enumeration is the trustworthy oracle for small hole spaces; CEGIS asks an
external SMT-LIB solver and scales to spaces enumeration cannot touch.
Solver interaction is deliberately primitive: one fresh subprocess and one
QF_BV script per query, no incremental mode, so any SMT-LIB v2 solver works.
"""

from __future__ import annotations

import re
import subprocess
import time
from dataclasses import dataclass, field

from . import ir, semantics, templates
from .errors import (
    BudgetExceeded,
    Infeasible,
    LimitExceeded,
    MissingSymbol,
    SolverProtocolError,
    SolverSpawnError,
    SolverUnknown,
    TemplateInfeasible,
    ValidationError,
)


@dataclass(frozen=True)
class SynthesisProblem:
    """∃ holes ∀ inputs: sketch outputs == design outputs."""

    design: ir.Design
    sketch_exprs: tuple  # of (output name, hole-bearing expr), aligned with design outputs
    holes: tuple  # of (name, width)
    inputs: tuple  # of (name, width)

    def __post_init__(self):
        object.__setattr__(self, "sketch_exprs", tuple(self.sketch_exprs))
        object.__setattr__(self, "holes", tuple(self.holes))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        design_outs = [(n, e.width) for n, e in self.design.outputs]
        sketch_outs = [(n, e.width) for n, e in self.sketch_exprs]
        if design_outs != sketch_outs:
            raise ValidationError(
                f"sketch outputs {sketch_outs} do not align with design outputs {design_outs}"
            )
        env = dict(self.inputs)
        hole_widths = dict(self.holes)
        for _, expr in self.sketch_exprs:
            ir.validate(expr, env, allow_holes=True)
            _, holes_used = ir.free_symbols(expr)
            for name, width in holes_used.items():
                if hole_widths.get(name) != width:
                    raise ValidationError(f"hole '{name}' not declared with width {width}")

    @property
    def hole_space(self):
        """Exact number of hole assignments: the product of 2^width."""
        return 1 << sum(w for _, w in self.holes)

    @property
    def total_input_bits(self):
        return sum(w for _, w in self.inputs)


def problem_from_sketch(design, sketch, library):
    exprs = templates.sketch_to_exprs(sketch, library)
    order = {name: i for i, (name, _) in enumerate(design.outputs)}
    exprs.sort(key=lambda item: order.get(item[0], len(order)))
    return SynthesisProblem(
        design, tuple(exprs), tuple(templates.sketch_holes(sketch)), tuple(design.inputs)
    )


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    solver_calls: int
    wall_ms: float


@dataclass(frozen=True)
class Solution:
    """A total hole assignment that makes sketch and design equivalent."""

    assignment: dict
    backend: str  # 'brute' | 'cegis'
    stats: SolveStats


def decode_assignment(holes, index):
    """Assignment number `index`, first hole in the least-significant bits."""
    out = {}
    shift = 0
    for name, width in holes:
        out[name] = (index >> shift) & ((1 << width) - 1)
        shift += width
    return out


def solve_brute_force(problem, max_hole_space=1 << 20, max_input_bits=16):
    """Enumerate hole assignments in ascending order; first full match wins.

    Exhaustive and deterministic, hence the reference backend: when it
    raises Infeasible, no configuration of this sketch implements the
    design. Limits guard against accidentally unbounded runs.
    """
    started = time.perf_counter()
    space = problem.hole_space
    if space > max_hole_space:
        raise LimitExceeded("hole space", space, max_hole_space)
    total_bits = problem.total_input_bits
    if total_bits > max_input_bits:
        raise LimitExceeded("input bits", total_bits, max_input_bits)

    rows = []
    for row in range(1 << total_bits):
        env = semantics.row_env(problem.inputs, row)
        want = tuple(semantics.eval_concrete(e, env) for _, e in problem.design.outputs)
        rows.append((env, want))
    sketch_exprs = [e for _, e in problem.sketch_exprs]

    for index in range(space):
        assignment = decode_assignment(problem.holes, index)
        ok = True
        for env, want in rows:
            got = semantics.eval_many(sketch_exprs, env, assignment)
            if tuple(got) != want:
                ok = False
                break
        if ok:
            wall_ms = (time.perf_counter() - started) * 1000.0
            return Solution(assignment, "brute", SolveStats(index + 1, 0, wall_ms))
    raise Infeasible(f"no assignment among {space} implements '{problem.design.name}'")


# ---------------------------------------------------------------------------
# Solver plumbing


@dataclass(frozen=True)
class SolverConfig:
    """How to reach an SMT-LIB v2 solver.

    The executable gets one full script on stdin per query and must print
    the check-sat status and get-value response on stdout. Known-good
    configurations:
        z3:    SolverConfig("z3", ("-in", "-smt2"))
        cvc5:  SolverConfig("cvc5", ("--lang", "smt2"))
        bundled fallback: SolverConfig(sys.executable, ("-m", "techmap.minismt"))
    """

    path: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


_SMT_RESERVED = {
    "_", "as", "let", "forall", "exists", "match", "par", "true", "false",
    "not", "and", "or", "xor", "ite", "distinct", "concat",
}


def _sanitize(name):
    out = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not out or out[0].isdigit():
        out = "_" + out
    if out in _SMT_RESERVED or out.startswith("bv"):
        out = out + "_"
    return out


def symbol_table(problem):
    """Deterministic renaming of inputs and holes to SMT-LIB simple symbols."""
    table = {}
    used = set()
    for name, _ in tuple(problem.inputs) + tuple(problem.holes):
        base = _sanitize(name)
        candidate = base
        k = 2
        while candidate in used:
            candidate = f"{base}_{k}"
            k += 1
        used.add(candidate)
        table[name] = candidate
    return table


_HEADER = "(set-option :produce-models true)\n(set-logic QF_BV)\n"


def _const_env(env, widths):
    return {name: ir.Const(widths[name], value) for name, value in env.items()}


def emit_synth_query(problem, examples):
    """Script asking for hole values consistent with every example env."""
    table = symbol_table(problem)
    widths = dict(problem.inputs)
    lines = [_HEADER.rstrip("\n")]
    for name, width in problem.holes:
        lines.append(f"(declare-const {table[name]} (_ BitVec {width}))")
    for env in examples:
        consts = _const_env(env, widths)
        for (_, dexpr), (_, sexpr) in zip(problem.design.outputs, problem.sketch_exprs):
            dterm = semantics.lower_to_smt(ir.substitute(dexpr, consts, "vars"), table)
            sterm = semantics.lower_to_smt(ir.substitute(sexpr, consts, "vars"), table)
            lines.append(f"(assert (= {dterm} {sterm}))")
    lines.append("(check-sat)")
    if problem.holes:
        lines.append("(get-value (" + " ".join(table[n] for n, _ in problem.holes) + "))")
    return "\n".join(lines) + "\n"


def emit_verify_query(problem, assignment):
    """Script searching for an input where the filled sketch disagrees."""
    table = symbol_table(problem)
    lines = [_HEADER.rstrip("\n")]
    for name, width in problem.inputs:
        lines.append(f"(declare-const {table[name]} (_ BitVec {width}))")
    hole_consts = {
        name: ir.Const(width, assignment[name]) for name, width in problem.holes
    }
    equalities = []
    for (_, dexpr), (_, sexpr) in zip(problem.design.outputs, problem.sketch_exprs):
        dterm = semantics.lower_to_smt(dexpr, table)
        sterm = semantics.lower_to_smt(ir.substitute(sexpr, hole_consts, "holes"), table)
        equalities.append(f"(= {dterm} {sterm})")
    if len(equalities) == 1:
        lines.append(f"(assert (not {equalities[0]}))")
    else:
        lines.append("(assert (not (and " + " ".join(equalities) + ")))")
    lines.append("(check-sat)")
    if problem.inputs:
        lines.append("(get-value (" + " ".join(table[n] for n, _ in problem.inputs) + "))")
    return "\n".join(lines) + "\n"


def run_solver(config, script):
    """One fresh solver process; returns its stdout text."""
    try:
        proc = subprocess.run(
            [config.path, *config.args],
            input=script.encode(),
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
    except (FileNotFoundError, PermissionError, NotADirectoryError) as exc:
        raise SolverSpawnError(f"cannot run solver '{config.path}': {exc}")
    out = proc.stdout.decode(errors="replace")
    if not out.strip():
        raise SolverProtocolError(
            f"solver produced no output (exit {proc.returncode})",
            proc.stderr.decode(errors="replace"),
        )
    return out


def _status(stdout):
    for line in stdout.splitlines():
        line = line.strip()
        if line:
            return line
    return ""


_VALUE_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_model(stdout, expected):
    """Extract `((sym val) ...)` bindings following a `sat` line.

    `expected` maps SMT symbol -> (original name, width). Values may be
    #b/#x literals or `(_ bvN w)`. Returns {original name: value}.
    """
    lines = stdout.splitlines()
    try:
        at = next(i for i, line in enumerate(lines) if line.strip() == "sat")
    except StopIteration:
        raise SolverProtocolError("no 'sat' line before model", stdout)
    rest = "\n".join(lines[at + 1:])
    tokens = _VALUE_TOKEN.findall(rest)

    def parse_sexpr(pos):
        if pos >= len(tokens):
            raise SolverProtocolError("unbalanced model s-expression", stdout)
        if tokens[pos] == "(":
            items = []
            pos += 1
            while pos < len(tokens) and tokens[pos] != ")":
                item, pos = parse_sexpr(pos)
                items.append(item)
            if pos >= len(tokens):
                raise SolverProtocolError("unbalanced model s-expression", stdout)
            return items, pos + 1
        return tokens[pos], pos + 1

    if not tokens:
        raise SolverProtocolError("missing model after 'sat'", stdout)
    tree, end = parse_sexpr(0)
    if not isinstance(tree, list):
        raise SolverProtocolError("model is not a parenthesized list", stdout)

    out = {}
    for entry in tree:
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
            raise SolverProtocolError(f"malformed model entry {entry!r}", stdout)
        sym, val = entry
        if sym not in expected:
            continue
        name, width = expected[sym]
        out[name] = _parse_value(val, width, stdout)
    return out


def _parse_value(val, width, transcript):
    if isinstance(val, str) and val.startswith("#b"):
        digits = val[2:]
        if not re.fullmatch(r"[01]+", digits) or len(digits) != width:
            raise SolverProtocolError(f"bad binary value {val!r} for width {width}", transcript)
        return int(digits, 2)
    if isinstance(val, str) and val.startswith("#x"):
        digits = val[2:]
        if not re.fullmatch(r"[0-9a-fA-F]+", digits) or len(digits) != (width + 3) // 4:
            raise SolverProtocolError(f"bad hex value {val!r} for width {width}", transcript)
        value = int(digits, 16)
        if value >= 1 << width:
            raise SolverProtocolError(f"value {val!r} exceeds width {width}", transcript)
        return value
    if isinstance(val, list) and len(val) == 3 and val[0] == "_" and val[1].startswith("bv"):
        if not val[1][2:].isdigit() or not val[2].isdigit() or int(val[2]) != width:
            raise SolverProtocolError(f"bad value {val!r} for width {width}", transcript)
        value = int(val[1][2:])
        if value >= 1 << width:
            raise SolverProtocolError(f"value {val!r} exceeds width {width}", transcript)
        return value
    raise SolverProtocolError(f"unrecognized value form {val!r}", transcript)


# ---------------------------------------------------------------------------
# CEGIS


class _Lcg:
    """64-bit linear congruential generator (Knuth MMIX constants).

    state' = (6364136223846793005 * state + 1442695040888963407) mod 2^64;
    an n-bit draw takes the top n bits of the new state. Fixed here so
    seeded runs are reproducible across platforms.
    """

    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed):
        self.state = seed & self.MASK

    def _next(self):
        self.state = (self.MULTIPLIER * self.state + self.INCREMENT) & self.MASK
        return self.state

    def draw(self, width):
        value = 0
        remaining = width
        while remaining > 0:
            take = min(64, remaining)
            value = (value << take) | (self._next() >> (64 - take))
            remaining -= take
        return value


def initial_examples(problem, seed, count):
    """All-zeros plus seeded pseudo-random envs, deduplicated in order."""
    rng = _Lcg(seed)
    envs = [{name: 0 for name, _ in problem.inputs}]
    for _ in range(max(count - 1, 0)):
        envs.append({name: rng.draw(width) for name, width in problem.inputs})
    unique = []
    for env in envs:
        if env not in unique:
            unique.append(env)
    return unique


def solve_cegis(problem, solver, max_iters=64, seed=0, init_examples=4):
    """Counterexample-guided synthesis against an external solver.

    Alternates a SYNTH query (find holes matching the collected example
    envs) with a VERIFY query (find an input refuting the candidate).
    An unsat SYNTH answer is definitive infeasibility, because examples
    only ever constrain the hole space.
    """
    started = time.perf_counter()
    table = symbol_table(problem)
    hole_syms = {table[n]: (n, w) for n, w in problem.holes}
    input_syms = {table[n]: (n, w) for n, w in problem.inputs}
    calls = 0

    def finish(assignment, iterations):
        wall_ms = (time.perf_counter() - started) * 1000.0
        return Solution(dict(assignment), "cegis", SolveStats(iterations, calls, wall_ms))

    if not problem.holes:
        out = run_solver(solver, emit_verify_query(problem, {}))
        calls += 1
        status = _status(out)
        if status == "unsat":
            return finish({}, 0)
        if status == "sat":
            raise TemplateInfeasible("sketch (with no holes) differs from the design")
        if status == "unknown":
            raise SolverUnknown()
        raise SolverProtocolError(f"unexpected solver reply {status!r}", out)

    examples = initial_examples(problem, seed, init_examples)
    for iteration in range(1, max_iters + 1):
        out = run_solver(solver, emit_synth_query(problem, examples))
        calls += 1
        status = _status(out)
        if status == "unsat":
            raise TemplateInfeasible(
                f"no hole assignment matches {len(examples)} example(s)"
            )
        if status == "unknown":
            raise SolverUnknown()
        if status != "sat":
            raise SolverProtocolError(f"unexpected solver reply {status!r}", out)
        model = parse_model(out, hole_syms)
        # Unconstrained holes may be absent from the model; any value
        # verifies, zero is the canonical pick.
        assignment = {name: model.get(name, 0) for name, _ in problem.holes}

        out = run_solver(solver, emit_verify_query(problem, assignment))
        calls += 1
        status = _status(out)
        if status == "unsat":
            return finish(assignment, iteration)
        if status == "unknown":
            raise SolverUnknown()
        if status != "sat":
            raise SolverProtocolError(f"unexpected solver reply {status!r}", out)
        cex = parse_model(out, input_syms)
        for name, _ in problem.inputs:
            if name not in cex:
                raise MissingSymbol(name)
        assert cex not in examples, "solver returned a repeated counterexample"
        examples.append(cex)
    raise BudgetExceeded(max_iters)


def exhaustive_counterexample(problem, assignment, max_input_bits=16):
    """Check a candidate assignment on every input row; None when sound."""
    total_bits = problem.total_input_bits
    if total_bits > max_input_bits:
        raise LimitExceeded("input bits", total_bits, max_input_bits)
    sketch_exprs = [e for _, e in problem.sketch_exprs]
    for row in range(1 << total_bits):
        env = semantics.row_env(problem.inputs, row)
        want = [semantics.eval_concrete(e, env) for _, e in problem.design.outputs]
        got = semantics.eval_many(sketch_exprs, env, assignment)
        if got != want:
            return env
    return None
