"""Concrete evaluation, SMT-LIB lowering, and truth-table enumeration.

The three views of an expression's meaning. Concrete evaluation is the
simulation/oracle path, the SMT lowering feeds the solver-backed search,
and truth tables are the exhaustive cross-check between them.
"""

from __future__ import annotations

from . import ir
from .errors import HolePresent, TooManyInputBits, UnknownVar, UnmappedSymbol, ValidationError


def eval_concrete(expr, env, holes=None):
    """Evaluate an expression to an unsigned integer.

    `env` maps variable names to values; `holes`, when given, does the same
    for hole names (used by the enumerating backend). Values must fit the
    symbol's width. Shared DAG nodes are evaluated once.
    """
    return _eval(expr, env, holes, {})


def eval_many(exprs, env, holes=None):
    """Evaluate several expressions sharing one memo (and thus DAG work)."""
    memo = {}
    return [_eval(e, env, holes, memo) for e in exprs]


def _eval(expr, env, holes, memo):
    def ev(node):
        got = memo.get(id(node))
        if got is not None:
            return got
        t = type(node)
        if t is ir.Var:
            try:
                val = env[node.name]
            except KeyError:
                raise UnknownVar(node.name)
            if not 0 <= val < (1 << node.width):
                raise ValidationError(
                    f"value {val} for '{node.name}' does not fit width {node.width}"
                )
        elif t is ir.Const:
            val = node.value
        elif t is ir.Hole:
            if holes is None or node.name not in holes:
                raise HolePresent(node.name)
            val = holes[node.name]
            if not 0 <= val < (1 << node.width):
                raise ValidationError(
                    f"value {val} for hole '{node.name}' does not fit width {node.width}"
                )
        elif t is ir.Not:
            val = ~ev(node.a) & ((1 << node.width) - 1)
        elif t is ir.Neg:
            val = -ev(node.a) & ((1 << node.width) - 1)
        elif t is ir.ReduceAnd:
            val = 1 if ev(node.a) == (1 << node.a.width) - 1 else 0
        elif t is ir.ReduceOr:
            val = 1 if ev(node.a) != 0 else 0
        elif t is ir.ReduceXor:
            val = ev(node.a).bit_count() & 1
        elif t is ir.And:
            val = ev(node.a) & ev(node.b)
        elif t is ir.Or:
            val = ev(node.a) | ev(node.b)
        elif t is ir.Xor:
            val = ev(node.a) ^ ev(node.b)
        elif t is ir.Add:
            val = (ev(node.a) + ev(node.b)) & ((1 << node.width) - 1)
        elif t is ir.Sub:
            val = (ev(node.a) - ev(node.b)) & ((1 << node.width) - 1)
        elif t is ir.Mul:
            val = (ev(node.a) * ev(node.b)) & ((1 << node.width) - 1)
        elif t is ir.Shl:
            amount = ev(node.b)
            val = (ev(node.a) << amount) & ((1 << node.width) - 1) if amount < node.width else 0
        elif t is ir.LShr:
            amount = ev(node.b)
            val = ev(node.a) >> amount if amount < node.width else 0
        elif t is ir.Eq:
            val = 1 if ev(node.a) == ev(node.b) else 0
        elif t is ir.Ult:
            val = 1 if ev(node.a) < ev(node.b) else 0
        elif t is ir.Mux:
            val = ev(node.a) if ev(node.cond) else ev(node.b)
        elif t is ir.Extract:
            val = (ev(node.a) >> node.lo) & ((1 << node.width) - 1)
        elif t is ir.Concat:
            val = (ev(node.hi) << node.lo.width) | ev(node.lo)
        elif t is ir.ZeroExt:
            val = ev(node.a)
        elif t is ir.SignExt:
            val = ev(node.a)
            if val >> (node.a.width - 1):
                val |= ((1 << node.width) - 1) ^ ((1 << node.a.width) - 1)
        else:
            raise TypeError(f"not a BitVecExpr: {node!r}")
        memo[id(node)] = val
        return val

    return ev(expr)


def eval_design(design, env):
    """Evaluate every design output; returns {output name: value}."""
    return {name: eval_concrete(expr, env) for name, expr in design.outputs}


def _bin_const(value, width):
    return "#b" + format(value, f"0{width}b")


def lower_to_smt(expr, symbol_map):
    """Render an expression as an SMT-LIB v2 QF_BV term.

    Every Var and Hole must be mapped to an SMT identifier in `symbol_map`.
    Reductions are expanded over extracted bits, Eq/Ult wrap their boolean
    in an ite producing a 1-bit vector, and shifts equalize operand widths
    by zero-extension before truncating back to the operand width.
    """

    def lower(node):
        t = type(node)
        if t is ir.Var or t is ir.Hole:
            try:
                return symbol_map[node.name]
            except KeyError:
                raise UnmappedSymbol(node.name)
        if t is ir.Const:
            return _bin_const(node.value, node.width)
        if t is ir.Not:
            return f"(bvnot {lower(node.a)})"
        if t is ir.Neg:
            return f"(bvneg {lower(node.a)})"
        if t in (ir.ReduceAnd, ir.ReduceOr, ir.ReduceXor):
            op = {ir.ReduceAnd: "bvand", ir.ReduceOr: "bvor", ir.ReduceXor: "bvxor"}[t]
            inner = lower(node.a)
            acc = f"((_ extract 0 0) {inner})"
            for i in range(1, node.a.width):
                acc = f"({op} {acc} ((_ extract {i} {i}) {inner}))"
            return acc
        if t in (ir.And, ir.Or, ir.Xor, ir.Add, ir.Sub, ir.Mul):
            op = {
                ir.And: "bvand", ir.Or: "bvor", ir.Xor: "bvxor",
                ir.Add: "bvadd", ir.Sub: "bvsub", ir.Mul: "bvmul",
            }[t]
            return f"({op} {lower(node.a)} {lower(node.b)})"
        if t in (ir.Shl, ir.LShr):
            op = "bvshl" if t is ir.Shl else "bvlshr"
            wa, wb = node.a.width, node.b.width
            a, b = lower(node.a), lower(node.b)
            w = max(wa, wb)
            if wa < w:
                a = f"((_ zero_extend {w - wa}) {a})"
            if wb < w:
                b = f"((_ zero_extend {w - wb}) {b})"
            term = f"({op} {a} {b})"
            if w > wa:
                term = f"((_ extract {wa - 1} 0) {term})"
            return term
        if t is ir.Eq:
            return f"(ite (= {lower(node.a)} {lower(node.b)}) #b1 #b0)"
        if t is ir.Ult:
            return f"(ite (bvult {lower(node.a)} {lower(node.b)}) #b1 #b0)"
        if t is ir.Mux:
            return f"(ite (= {lower(node.cond)} #b1) {lower(node.a)} {lower(node.b)})"
        if t is ir.Extract:
            return f"((_ extract {node.hi} {node.lo}) {lower(node.a)})"
        if t is ir.Concat:
            return f"(concat {lower(node.hi)} {lower(node.lo)})"
        if t is ir.ZeroExt:
            if node.width == node.a.width:
                return lower(node.a)
            return f"((_ zero_extend {node.width - node.a.width}) {lower(node.a)})"
        if t is ir.SignExt:
            if node.width == node.a.width:
                return lower(node.a)
            return f"((_ sign_extend {node.width - node.a.width}) {lower(node.a)})"
        raise TypeError(f"not a BitVecExpr: {node!r}")

    return lower(expr)


def row_env(inputs, row):
    """Decode row index `row` into an env over the ordered (name, width) list.

    The first input occupies the least-significant bits of the row index,
    matching the LUT convention where input k indexes bit k.
    """
    env = {}
    shift = 0
    for name, width in inputs:
        env[name] = (row >> shift) & ((1 << width) - 1)
        shift += width
    return env


def truth_table(obj, max_input_bits=20, param_binding=None):
    """Enumerate all input rows of a Design or PrimitiveSemantics.

    Returns a list of (input tuple, output tuple) in ascending row order,
    inputs and outputs in declaration order. Semantics objects need a
    `param_binding` only if their parameters should not take defaults.
    """
    inputs = list(obj.inputs)
    extra = {}
    if hasattr(obj, "params"):
        binding = dict(param_binding or {})
        for name, width, default in obj.params:
            value = binding.pop(name, default)
            if not 0 <= value < (1 << width):
                raise ValidationError(f"parameter {name}={value} does not fit width {width}")
            extra[name] = value
        if binding:
            raise UnknownVar(next(iter(binding)))
    elif param_binding:
        raise ValidationError("param_binding given for an object without parameters")

    total = sum(w for _, w in inputs)
    if total > max_input_bits:
        raise TooManyInputBits(total, max_input_bits)

    rows = []
    for row in range(1 << total):
        env = row_env(inputs, row)
        env.update(extra)
        values = tuple(env[name] for name, _ in inputs)
        outs = tuple(eval_concrete(e, env) for _, e in obj.outputs)
        rows.append((values, outs))
    return rows
