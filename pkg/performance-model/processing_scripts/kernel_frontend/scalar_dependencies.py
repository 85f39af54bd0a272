import logging
from typing import List

import networkx as nx
from pycparser import c_ast

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


class ScalarReads(c_ast.NodeVisitor):
    def __init__(self):
        self.names = []

    def visit_ID(self, node):
        self.names.append(node.name)

    def visit_ArrayRef(self, node):
        # only scalars feed the dependency graph
        pass


def build_dependency_graph(ir) -> nx.DiGraph:
    """
    Build the scalar def-use graph of the loop body: an edge u -> v means v is computed from u.
    """
    graph = nx.DiGraph()
    scalars = set(ir.scalars)
    for node in ir.statement_nodes:
        if isinstance(node, c_ast.Decl):
            target, value, op = node.name, node.init, "="
        else:
            target = node.lvalue.name if isinstance(node.lvalue, c_ast.ID) else None
            value, op = node.rvalue, node.op
        if target is None:
            continue
        reads = ScalarReads()
        reads.visit(value)
        sources = [name for name in reads.names if name in scalars]
        if op != "=":
            sources.append(target)
        graph.add_node(target)
        for source in sources:
            graph.add_edge(source, target)
    return graph


def loop_carried_scalars(ir) -> List[List[str]]:
    """
    Find scalar recurrences carried from one loop iteration to the next.

    Args:
        ir (KernelIR): Parsed kernel.

    Returns:
        list: Each recurrence as a sorted list of scalar names.
    """
    graph = build_dependency_graph(ir)
    cycles = sorted(sorted(cycle) for cycle in nx.simple_cycles(graph))
    for cycle in cycles:
        logger.warning(
            f"Loop-carried dependency through scalars {', '.join(cycle)} in kernel '{ir.name}'; "
            f"in-core throughput will be latency bound"
        )
    return cycles
