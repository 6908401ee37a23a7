"""Self-contained SMT-LIB v2 solver for the QF_BV fragment this package emits.

A fallback so the CEGIS backend works out of the box: `techmap-smt` (or
`python -m techmap.minismt`) reads one script on stdin, answers check-sat
with sat/unsat, and prints `((sym #b...) ...)` for get-value, exactly the
subprocess contract the synthesis module speaks. Mainstream solvers (z3,
cvc5) are drop-in replacements and preferred when installed.

Internals: terms are bit-blasted to CNF through an AND/XOR gate layer with
structural hashing and constant folding, then decided by a small CDCL SAT
solver (two watched literals, first-UIP learning, activity-ordered
decisions, geometric restarts). Everything is deterministic: identical
input scripts produce identical output bytes.

Supported commands: set-option, set-logic, declare-const, declare-fun
(zero arity), assert, check-sat, get-value, echo, exit. Terms: true/false,
not/and/or/xor/=/ite, bvnot/bvneg/bvand/bvor/bvxor/bvadd/bvsub/bvmul/
bvshl/bvlshr/bvult, concat, (_ extract i j), (_ zero_extend n),
(_ sign_extend n), #b/#x literals and (_ bvN w).

Only the standard library is used, and importing this module stays cheap
because a fresh process is spawned per query.
"""

import heapq
import sys


class SmtInputError(Exception):
    pass


# ---------------------------------------------------------------------------
# S-expression reading


def tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise SmtInputError("unterminated string literal")
            tokens.append(text[i:j + 1])
            i = j + 1
        elif c == "|":
            j = i + 1
            while j < n and text[j] != "|":
                j += 1
            if j >= n:
                raise SmtInputError("unterminated quoted symbol")
            tokens.append(text[i + 1:j])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"|":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse_forms(tokens):
    forms = []
    pos = 0

    def read(pos):
        if pos >= len(tokens):
            raise SmtInputError("unexpected end of input")
        tok = tokens[pos]
        if tok == "(":
            items = []
            pos += 1
            while pos < len(tokens) and tokens[pos] != ")":
                item, pos = read(pos)
                items.append(item)
            if pos >= len(tokens):
                raise SmtInputError("missing ')'")
            return tuple(items), pos + 1
        if tok == ")":
            raise SmtInputError("unexpected ')'")
        return tok, pos + 1

    while pos < len(tokens):
        form, pos = read(pos)
        forms.append(form)
    return forms


# ---------------------------------------------------------------------------
# CDCL SAT


class SatSolver:
    def __init__(self):
        self.nvars = 0
        self.clauses = []
        self.watches = {}
        self.assign = [0]
        self.level = [0]
        self.reason = [None]
        self.activity = [0.0]
        self.phase = [False]
        self.trail = []
        self.trail_lim = []
        self.qhead = 0
        self.act_inc = 1.0
        self.heap = []
        self.ok = True

    def new_var(self):
        self.nvars += 1
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(False)
        return self.nvars

    def value(self, lit):
        v = self.assign[lit if lit > 0 else -lit]
        return v if lit > 0 else -v

    def add_clause(self, lits):
        if not self.ok:
            return
        seen = set()
        out = []
        for lit in lits:
            if -lit in seen:
                return  # tautology
            if lit not in seen:
                seen.add(lit)
                out.append(lit)
        if not out:
            self.ok = False
            return
        if len(out) == 1:
            if not self.enqueue(out[0], None):
                self.ok = False
            return
        self._attach(out)

    def _attach(self, lits):
        idx = len(self.clauses)
        self.clauses.append(lits)
        self.watches.setdefault(lits[0], []).append(idx)
        self.watches.setdefault(lits[1], []).append(idx)
        return idx

    def enqueue(self, lit, reason):
        val = self.value(lit)
        if val == 1:
            return True
        if val == -1:
            return False
        var = lit if lit > 0 else -lit
        self.assign[var] = 1 if lit > 0 else -1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)
        return True

    def propagate(self):
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            flit = -lit
            idx_list = self.watches.get(flit)
            if not idx_list:
                continue
            keep = []
            i = 0
            while i < len(idx_list):
                ci = idx_list[i]
                i += 1
                clause = self.clauses[ci]
                if clause[0] == flit:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                if self.value(first) == 1:
                    keep.append(ci)
                    continue
                for k in range(2, len(clause)):
                    if self.value(clause[k]) != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches.setdefault(clause[1], []).append(ci)
                        break
                else:
                    keep.append(ci)
                    if not self.enqueue(first, ci):
                        keep.extend(idx_list[i:])
                        self.watches[flit] = keep
                        return ci
            self.watches[flit] = keep
        return None

    def bump(self, var):
        act = self.activity[var] + self.act_inc
        self.activity[var] = act
        if act > 1e100:
            for v in range(1, self.nvars + 1):
                self.activity[v] *= 1e-100
            self.act_inc *= 1e-100
            self._rebuild_heap()
            return
        heapq.heappush(self.heap, (-act, var))
        if len(self.heap) > 4 * self.nvars + 16:
            self._rebuild_heap()

    def _rebuild_heap(self):
        self.heap = [
            (-self.activity[v], v) for v in range(1, self.nvars + 1) if self.assign[v] == 0
        ]
        heapq.heapify(self.heap)

    def analyze(self, confl):
        learnt = [0]
        seen = set()
        counter = 0
        cur_level = len(self.trail_lim)
        idx = len(self.trail) - 1
        p = None
        reason_lits = self.clauses[confl]
        while True:
            for q in reason_lits:
                if q == p:
                    continue
                var = q if q > 0 else -q
                if var not in seen and self.level[var] > 0:
                    seen.add(var)
                    self.bump(var)
                    if self.level[var] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while (self.trail[idx] if self.trail[idx] > 0 else -self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            reason_lits = self.clauses[self.reason[p if p > 0 else -p]]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        # The second literal must sit at the backtrack level for watching.
        best = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def backtrack(self, target):
        while len(self.trail_lim) > target:
            lim = self.trail_lim.pop()
            for lit in self.trail[lim:]:
                var = lit if lit > 0 else -lit
                self.phase[var] = lit > 0
                self.assign[var] = 0
                self.reason[var] = None
                heapq.heappush(self.heap, (-self.activity[var], var))
            del self.trail[lim:]
        self.qhead = len(self.trail)

    def pick_branch(self):
        while self.heap:
            negact, var = heapq.heappop(self.heap)
            if self.assign[var] == 0 and -self.activity[var] == negact:
                return var
        for var in range(1, self.nvars + 1):
            if self.assign[var] == 0:
                return var
        return None

    def solve(self):
        if not self.ok:
            return None
        self.heap = [(0.0, v) for v in range(1, self.nvars + 1)]
        heapq.heapify(self.heap)
        if self.propagate() is not None:
            return None
        conflicts = 0
        restart_limit = 100
        while True:
            confl = self.propagate()
            if confl is not None:
                if not self.trail_lim:
                    return None
                conflicts += 1
                self.act_inc /= 0.95
                learnt, bt = self.analyze(confl)
                self.backtrack(bt)
                if len(learnt) == 1:
                    if not self.enqueue(learnt[0], None):
                        return None
                else:
                    ci = self._attach(learnt)
                    self.enqueue(learnt[0], ci)
                if conflicts >= restart_limit:
                    conflicts = 0
                    restart_limit = int(restart_limit * 1.5) + 1
                    self.backtrack(0)
            else:
                var = self.pick_branch()
                if var is None:
                    return list(self.assign)
                self.trail_lim.append(len(self.trail))
                self.enqueue(var if self.phase[var] else -var, None)


# ---------------------------------------------------------------------------
# Bit blasting

TRUE = 1  # literal of the reserved constant-true variable


class Blaster:
    def __init__(self):
        self.sat = SatSolver()
        assert self.sat.new_var() == 1
        self.sat.add_clause([TRUE])
        self.and_cache = {}
        self.xor_cache = {}

    def fresh(self):
        return self.sat.new_var()

    def lit_and(self, a, b):
        if a == -TRUE or b == -TRUE:
            return -TRUE
        if a == TRUE:
            return b
        if b == TRUE:
            return a
        if a == b:
            return a
        if a == -b:
            return -TRUE
        key = (a, b) if a < b else (b, a)
        out = self.and_cache.get(key)
        if out is None:
            out = self.fresh()
            add = self.sat.add_clause
            add([-out, a])
            add([-out, b])
            add([out, -a, -b])
            self.and_cache[key] = out
        return out

    def lit_or(self, a, b):
        return -self.lit_and(-a, -b)

    def lit_xor(self, a, b):
        if a in (TRUE, -TRUE):
            return -b if a == TRUE else b
        if b in (TRUE, -TRUE):
            return -a if b == TRUE else a
        sign = 1
        if a < 0:
            a = -a
            sign = -sign
        if b < 0:
            b = -b
            sign = -sign
        if a == b:
            return -sign * TRUE
        key = (a, b) if a < b else (b, a)
        out = self.xor_cache.get(key)
        if out is None:
            out = self.fresh()
            add = self.sat.add_clause
            add([-out, a, b])
            add([-out, -a, -b])
            add([out, -a, b])
            add([out, a, -b])
            self.xor_cache[key] = out
        return sign * out

    def lit_mux(self, sel, a, b):
        """sel ? a : b"""
        if sel == TRUE:
            return a
        if sel == -TRUE:
            return b
        if a == b:
            return a
        return self.lit_or(self.lit_and(sel, a), self.lit_and(-sel, b))

    # Vectors are LSB-first literal lists.
    def bv_const(self, value, width):
        return [TRUE if (value >> i) & 1 else -TRUE for i in range(width)]

    def bv_add(self, a, b, carry=-TRUE):
        out = []
        for x, y in zip(a, b):
            xy = self.lit_xor(x, y)
            out.append(self.lit_xor(xy, carry))
            carry = self.lit_or(self.lit_and(x, y), self.lit_and(carry, xy))
        return out, carry

    def bv_mul(self, a, b):
        width = len(a)
        acc = self.bv_const(0, width)
        for i, bit in enumerate(b):
            partial = [-TRUE] * i + [self.lit_and(bit, a[j]) for j in range(width - i)]
            acc, _ = self.bv_add(acc, partial)
        return acc

    def bv_shift(self, a, amount, left):
        width = len(a)
        acc = list(a)
        for k, bit in enumerate(amount):
            if (1 << k) >= width:
                # This amount bit alone shifts everything out.
                acc = [self.lit_mux(bit, -TRUE, lit) for lit in acc]
                continue
            step = 1 << k
            if left:
                shifted = [-TRUE] * step + acc[: width - step]
            else:
                shifted = acc[step:] + [-TRUE] * step
            acc = [self.lit_mux(bit, s, lit) for s, lit in zip(shifted, acc)]
        return acc

    def bv_ult(self, a, b):
        lt = -TRUE
        for x, y in zip(a, b):
            lt = self.lit_mux(self.lit_xor(x, y), y, lt)
        return lt

    def bv_eq(self, a, b):
        acc = TRUE
        for x, y in zip(a, b):
            acc = self.lit_and(acc, -self.lit_xor(x, y))
        return acc


# ---------------------------------------------------------------------------
# Script interpretation


def _is_int(text):
    return text.isdigit()


class Interpreter:
    def __init__(self, out):
        self.out = out
        self.blaster = Blaster()
        self.symbols = {}  # name -> vector
        self.term_cache = {}
        self.last_model = None

    def run(self, forms):
        for form in forms:
            if not isinstance(form, tuple) or not form:
                raise SmtInputError(f"bad command {form!r}")
            head = form[0]
            if head in ("set-option", "set-logic", "set-info"):
                continue
            if head == "echo":
                print(form[1].strip('"') if len(form) > 1 else "", file=self.out)
            elif head in ("declare-const", "declare-fun"):
                self.declare(form)
            elif head == "assert":
                if len(form) != 2:
                    raise SmtInputError("assert takes one term")
                lit = self.bool_term(form[1])
                self.blaster.sat.add_clause([lit])
            elif head == "check-sat":
                self.last_model = self.blaster.sat.solve()
                print("sat" if self.last_model is not None else "unsat", file=self.out)
            elif head == "get-value":
                self.get_value(form)
            elif head == "exit":
                break
            else:
                raise SmtInputError(f"unsupported command {head!r}")
        self.out.flush()

    def declare(self, form):
        if form[0] == "declare-fun":
            if len(form) != 4 or form[2] != ():
                raise SmtInputError("only zero-arity declare-fun is supported")
            name, sort = form[1], form[3]
        else:
            if len(form) != 3:
                raise SmtInputError("declare-const takes a name and a sort")
            name, sort = form[1], form[2]
        if not (isinstance(sort, tuple) and len(sort) == 3 and sort[:2] == ("_", "BitVec")):
            raise SmtInputError(f"unsupported sort {sort!r}")
        width = int(sort[2])
        if width < 1:
            raise SmtInputError("BitVec width must be >= 1")
        if name in self.symbols:
            raise SmtInputError(f"symbol {name!r} redeclared")
        self.symbols[name] = [self.blaster.fresh() for _ in range(width)]

    def get_value(self, form):
        if self.last_model is None:
            raise SmtInputError("get-value without a preceding sat answer")
        if len(form) != 2 or not isinstance(form[1], tuple):
            raise SmtInputError("get-value takes a parenthesized symbol list")
        model = self.last_model
        parts = []
        for sym in form[1]:
            vec = self.symbols.get(sym)
            if vec is None:
                raise SmtInputError(f"unknown symbol {sym!r} in get-value")
            bits = ""
            for lit in reversed(vec):
                var = lit if lit > 0 else -lit
                val = model[var]
                if lit < 0:
                    val = -val
                bits += "1" if val == 1 else "0"
            parts.append(f"({sym} #b{bits})")
        print("(" + " ".join(parts) + ")", file=self.out)

    # -- terms ---------------------------------------------------------------
    def bool_term(self, term):
        value = self.term(term)
        if not isinstance(value, int):
            raise SmtInputError(f"expected a boolean term, got a bitvector: {term!r}")
        return value

    def bv_term(self, term):
        value = self.term(term)
        if isinstance(value, int):
            raise SmtInputError(f"expected a bitvector term, got a boolean: {term!r}")
        return value

    def term(self, term):
        key = term
        cached = self.term_cache.get(key)
        if cached is not None:
            return cached
        value = self._term(term)
        self.term_cache[key] = value
        return value

    def _term(self, term):
        bl = self.blaster
        if isinstance(term, str):
            if term == "true":
                return TRUE
            if term == "false":
                return -TRUE
            if term.startswith("#b"):
                digits = term[2:]
                if not digits or any(c not in "01" for c in digits):
                    raise SmtInputError(f"bad binary literal {term!r}")
                return bl.bv_const(int(digits, 2), len(digits))
            if term.startswith("#x"):
                digits = term[2:]
                try:
                    value = int(digits, 16)
                except ValueError:
                    raise SmtInputError(f"bad hex literal {term!r}")
                return bl.bv_const(value, 4 * len(digits))
            vec = self.symbols.get(term)
            if vec is None:
                raise SmtInputError(f"unknown symbol {term!r}")
            return vec
        if not term:
            raise SmtInputError("empty term")
        head = term[0]
        if head == "_":
            if len(term) == 3 and term[1].startswith("bv") and _is_int(term[1][2:]):
                return bl.bv_const(int(term[1][2:]), int(term[2]))
            raise SmtInputError(f"unsupported indexed constant {term!r}")
        if isinstance(head, tuple) and head and head[0] == "_":
            op = head[1]
            arg = self.bv_term(term[1])
            if op == "extract":
                hi, lo = int(head[2]), int(head[3])
                if not 0 <= lo <= hi < len(arg):
                    raise SmtInputError(f"extract [{hi}:{lo}] out of range")
                return arg[lo:hi + 1]
            if op == "zero_extend":
                return arg + [-TRUE] * int(head[2])
            if op == "sign_extend":
                return arg + [arg[-1]] * int(head[2])
            raise SmtInputError(f"unsupported indexed op {op!r}")
        args = term[1:]
        if head == "not":
            return -self.bool_term(args[0])
        if head in ("and", "or", "xor"):
            fold = {"and": bl.lit_and, "or": bl.lit_or, "xor": bl.lit_xor}[head]
            acc = self.bool_term(args[0])
            for a in args[1:]:
                acc = fold(acc, self.bool_term(a))
            return acc
        if head == "=":
            lhs = self.term(args[0])
            rhs = self.term(args[1])
            if isinstance(lhs, int) != isinstance(rhs, int):
                raise SmtInputError("= over mixed sorts")
            if isinstance(lhs, int):
                return -bl.lit_xor(lhs, rhs)
            self._same_width(lhs, rhs, term)
            return bl.bv_eq(lhs, rhs)
        if head == "ite":
            cond = self.bool_term(args[0])
            a = self.term(args[1])
            b = self.term(args[2])
            if isinstance(a, int) != isinstance(b, int):
                raise SmtInputError("ite branches of mixed sorts")
            if isinstance(a, int):
                return bl.lit_mux(cond, a, b)
            self._same_width(a, b, term)
            return [bl.lit_mux(cond, x, y) for x, y in zip(a, b)]
        if head == "bvult":
            a, b = self.bv_term(args[0]), self.bv_term(args[1])
            self._same_width(a, b, term)
            return bl.bv_ult(a, b)
        if head == "bvnot":
            return [-lit for lit in self.bv_term(args[0])]
        if head == "bvneg":
            arg = self.bv_term(args[0])
            out, _ = bl.bv_add([-lit for lit in arg], bl.bv_const(0, len(arg)), carry=TRUE)
            return out
        if head in ("bvand", "bvor", "bvxor"):
            fold = {"bvand": bl.lit_and, "bvor": bl.lit_or, "bvxor": bl.lit_xor}[head]
            acc = self.bv_term(args[0])
            for a in args[1:]:
                other = self.bv_term(a)
                self._same_width(acc, other, term)
                acc = [fold(x, y) for x, y in zip(acc, other)]
            return acc
        if head in ("bvadd", "bvsub", "bvmul"):
            acc = self.bv_term(args[0])
            for a in args[1:]:
                other = self.bv_term(a)
                self._same_width(acc, other, term)
                if head == "bvadd":
                    acc, _ = bl.bv_add(acc, other)
                elif head == "bvsub":
                    acc, _ = bl.bv_add(acc, [-lit for lit in other], carry=TRUE)
                else:
                    acc = bl.bv_mul(acc, other)
            return acc
        if head in ("bvshl", "bvlshr"):
            a, b = self.bv_term(args[0]), self.bv_term(args[1])
            self._same_width(a, b, term)
            return bl.bv_shift(a, b, left=(head == "bvshl"))
        if head == "concat":
            acc = self.bv_term(args[0])
            for a in args[1:]:
                acc = self.bv_term(a) + acc
            return acc
        raise SmtInputError(f"unsupported operator {head!r}")

    @staticmethod
    def _same_width(a, b, term):
        if len(a) != len(b):
            raise SmtInputError(f"width mismatch ({len(a)} vs {len(b)}) in {term!r}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv:
        with open(argv[0], "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    try:
        forms = parse_forms(tokenize(text))
        Interpreter(sys.stdout).run(forms)
    except SmtInputError as exc:
        print(f'(error "{exc}")')
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
