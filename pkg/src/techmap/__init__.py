"""techmap: solver-aided FPGA technology mapping.

Imports primitive semantics from combinational Verilog models and searches,
by exhaustive enumeration or counterexample-guided synthesis against an
SMT solver, for primitive configurations that implement a given design.
"""

__version__ = "0.1.0"
