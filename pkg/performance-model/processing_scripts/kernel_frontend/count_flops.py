from enum import Enum
from typing import Dict

from pycparser import c_ast


class FlopKind(Enum):
    """Enum for counted floating-point operation classes."""
    ADD = "ADD"
    MUL = "MUL"
    DIV = "DIV"


OPERATOR_KIND = {
    "+": FlopKind.ADD,
    "-": FlopKind.ADD,
    "*": FlopKind.MUL,
    "/": FlopKind.DIV,
}


class FlopCounter(c_ast.NodeVisitor):
    """Count binary arithmetic operators as written, subtraction included under ADD."""

    def __init__(self):
        self.counts = {kind: 0 for kind in FlopKind}

    def visit_BinaryOp(self, node):
        if node.op in OPERATOR_KIND:
            self.counts[OPERATOR_KIND[node.op]] += 1
        self.generic_visit(node)

    def visit_Assignment(self, node):
        if node.op != "=" and node.op[:-1] in OPERATOR_KIND:
            self.counts[OPERATOR_KIND[node.op[:-1]]] += 1
        self.visit(node.rvalue)

    def visit_Decl(self, node):
        if node.init is not None:
            self.visit(node.init)

    def visit_ArrayRef(self, node):
        # subscripts are integer arithmetic
        pass


def count_flops(ir) -> Dict[str, int]:
    """
    Count floating-point operations per iteration of the innermost loop body.

    Args:
        ir (KernelIR): Parsed kernel.

    Returns:
        dict: Counts for ADD, MUL and DIV plus their total.
    """
    counter = FlopCounter()
    for node in ir.statement_nodes:
        counter.visit(node)
    counts = {kind.value: count for kind, count in counter.counts.items()}
    counts["total"] = sum(counts.values())
    return counts
