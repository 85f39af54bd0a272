import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pycparser import c_ast, c_generator, c_parser
from pycparser.plyparser import ParseError

from processing_scripts.kernel_frontend.count_flops import count_flops
from processing_scripts.model_errors import (
    KernelSyntaxError,
    MissingConstant,
    RestrictionViolation,
)

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


class IndexKind(Enum):
    """Enum for subscript term kinds."""
    DIRECT = "direct"
    RELATIVE = "relative"


class AccessKind(Enum):
    """Enum for array reference kinds."""
    SOURCE = "source"
    DESTINATION = "destination"


class ElementType(Enum):
    """Enum for supported element types and their sizes in bytes."""
    DOUBLE = 8


ASSIGNMENT_OPERATORS = ("=", "+=", "-=", "*=", "/=")


@dataclass(frozen=True)
class KernelSource:
    text: str
    constants: Dict[str, int] = field(default_factory=dict)
    name: str = "kernel"


@dataclass(frozen=True)
class LoopSpec:
    index_name: str
    start: int
    end_exclusive: int
    step: int = 1

    @property
    def trip_count(self) -> int:
        return len(range(self.start, self.end_exclusive, self.step))


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    dims: Tuple[int, ...]
    element_size_bytes: int = ElementType.DOUBLE.value


@dataclass(frozen=True)
class IndexTerm:
    """One subscript: either a fixed integer or a loop index plus an offset."""
    kind: IndexKind
    offset: int
    loop_index: Optional[str] = None

    @classmethod
    def direct(cls, value: int) -> "IndexTerm":
        return cls(IndexKind.DIRECT, value)

    @classmethod
    def relative(cls, loop_index: str, offset: int = 0) -> "IndexTerm":
        return cls(IndexKind.RELATIVE, offset, loop_index)

    def __str__(self) -> str:
        if self.kind is IndexKind.DIRECT:
            return str(self.offset)
        if self.offset == 0:
            return self.loop_index
        return f"{self.loop_index}{self.offset:+d}"


@dataclass(frozen=True)
class AccessRef:
    array_name: str
    indices: Tuple[IndexTerm, ...]
    kind: AccessKind
    statement: int

    def __str__(self) -> str:
        return self.array_name + "".join(f"[{term}]" for term in self.indices)


@dataclass
class KernelIR:
    loops: List[LoopSpec]
    arrays: Dict[str, ArrayDecl]
    scalars: List[str]
    accesses: List[AccessRef]
    statements: List[str]
    constants: Dict[str, int]
    name: str = "kernel"
    flops: Dict[str, int] = field(default_factory=dict)
    statement_nodes: List[c_ast.Node] = field(default_factory=list, repr=False, compare=False)

    @property
    def total_iterations(self) -> int:
        total = 1
        for loop in self.loops:
            total *= loop.trip_count
        return total

    @property
    def element_size_bytes(self) -> int:
        sizes = {array.element_size_bytes for array in self.arrays.values()}
        return max(sizes) if sizes else ElementType.DOUBLE.value

    def iterations_per_cacheline(self, cacheline_bytes: int) -> int:
        return max(cacheline_bytes // self.element_size_bytes, 1)

    def sources(self) -> List[AccessRef]:
        return [access for access in self.accesses if access.kind is AccessKind.SOURCE]

    def destinations(self) -> List[AccessRef]:
        return [access for access in self.accesses if access.kind is AccessKind.DESTINATION]


def strip_comments(text: str) -> str:
    text = re.sub(r"/\*.*?\*/", " ", text, flags=re.S)
    return re.sub(r"//[^\n]*", "", text)


def evaluate_size(node: c_ast.Node, constants: Dict[str, int], context: str) -> int:
    """
    Evaluate an array extent or loop bound: a constant or an integer, optionally plus or minus an integer.
    """
    if isinstance(node, c_ast.Constant):
        if node.type != "int":
            raise RestrictionViolation(f"{context}: only integer constants are allowed, got '{node.value}'")
        return int(node.value.rstrip("uUlL"), 0)
    if isinstance(node, c_ast.ID):
        if node.name not in constants:
            raise MissingConstant(f"{context}: no value bound for constant '{node.name}' (use -D {node.name} VALUE)")
        return int(constants[node.name])
    if isinstance(node, c_ast.UnaryOp) and node.op == "-":
        return -evaluate_size(node.expr, constants, context)
    if isinstance(node, c_ast.BinaryOp) and node.op in ("+", "-"):
        left = evaluate_size(node.left, constants, context)
        right = evaluate_size(node.right, constants, context)
        return left + right if node.op == "+" else left - right
    raise RestrictionViolation(
        f"{context}: only constants or integers with an optional addition or subtraction are allowed"
    )


class KernelParser:
    """
    Turn restricted C99 kernel text into a KernelIR.

    The text holds declarations followed by exactly one perfectly nested for-loop stack.
    """

    def __init__(self, source: KernelSource):
        self.source = source
        self.constants = dict(source.constants)
        self.arrays: Dict[str, ArrayDecl] = {}
        self.scalars: List[str] = []
        self.loops: List[LoopSpec] = []
        self.accesses: List[AccessRef] = []
        self.statements: List[str] = []
        self.statement_nodes: List[c_ast.Node] = []
        self.generator = c_generator.CGenerator()

    def parse(self) -> KernelIR:
        body = self._parse_body()
        loop_node = None
        for item in body:
            if isinstance(item, c_ast.Decl):
                if loop_node is not None:
                    raise RestrictionViolation(f"Declaration of '{item.name}' after the loop nest")
                self._declare(item)
            elif isinstance(item, c_ast.For):
                if loop_node is not None:
                    raise RestrictionViolation("Only one loop nest per kernel is supported")
                loop_node = item
            else:
                raise RestrictionViolation(
                    f"Unsupported top-level statement: {self.generator.visit(item).strip()}"
                )
        if loop_node is None:
            raise RestrictionViolation("Kernel contains no for-loop")

        innermost = self._collect_loops(loop_node)
        for number, statement in enumerate(innermost):
            self._analyze_statement(statement, number)

        return KernelIR(
            loops=self.loops,
            arrays=self.arrays,
            scalars=self.scalars,
            accesses=self.accesses,
            statements=self.statements,
            constants=self.constants,
            name=self.source.name,
            statement_nodes=self.statement_nodes,
        )

    def _parse_body(self) -> List[c_ast.Node]:
        text = strip_comments(self.source.text)
        for line in text.splitlines():
            if line.strip().startswith("#"):
                raise RestrictionViolation(f"Preprocessor directives are not supported: '{line.strip()}'")
        wrapped = "void kernel(void) {\n" + text + "\n}\n"
        try:
            ast = c_parser.CParser().parse(wrapped, filename=self.source.name)
        except ParseError as e:
            raise KernelSyntaxError(f"Malformed kernel source: {str(e)}") from e
        function = ast.ext[0]
        return list(function.body.block_items or [])

    # ------------------------------------------Declarations------------------------------------------
    def _base_type(self, type_node: c_ast.Node) -> str:
        while isinstance(type_node, (c_ast.ArrayDecl, c_ast.TypeDecl)):
            type_node = type_node.type
        if not isinstance(type_node, c_ast.IdentifierType):
            raise RestrictionViolation("Only plain scalar and array declarations are supported")
        return " ".join(type_node.names)

    def _declare(self, decl: c_ast.Decl) -> None:
        base_type = self._base_type(decl.type)
        if base_type != "double":
            raise RestrictionViolation(
                f"Declaration of '{decl.name}' has type '{base_type}', only double precision is supported"
            )
        if decl.name in self.arrays or decl.name in self.scalars:
            raise RestrictionViolation(f"'{decl.name}' is declared twice")

        if isinstance(decl.type, c_ast.ArrayDecl):
            dims = []
            type_node = decl.type
            while isinstance(type_node, c_ast.ArrayDecl):
                if type_node.dim is None:
                    raise RestrictionViolation(f"Array '{decl.name}' needs explicit extents")
                extent = evaluate_size(type_node.dim, self.constants, f"extent of '{decl.name}'")
                if extent <= 0:
                    raise RestrictionViolation(f"Array '{decl.name}' has non-positive extent {extent}")
                dims.append(extent)
                type_node = type_node.type
            self.arrays[decl.name] = ArrayDecl(decl.name, tuple(dims))
        else:
            self.scalars.append(decl.name)

    # ------------------------------------------Loop stack------------------------------------------
    def _loop_header(self, node: c_ast.For) -> LoopSpec:
        init = node.init
        if isinstance(init, c_ast.DeclList) and len(init.decls) == 1 and init.decls[0].init is not None:
            index_name = init.decls[0].name
            start_node = init.decls[0].init
        elif isinstance(init, c_ast.Assignment) and init.op == "=" and isinstance(init.lvalue, c_ast.ID):
            index_name = init.lvalue.name
            start_node = init.rvalue
        else:
            raise RestrictionViolation("Loop initialisation must assign a single index variable")
        start = evaluate_size(start_node, self.constants, f"start of loop '{index_name}'")

        cond = node.cond
        if not (isinstance(cond, c_ast.BinaryOp) and isinstance(cond.left, c_ast.ID)
                and cond.left.name == index_name and cond.op == "<"):
            raise RestrictionViolation(f"Loop '{index_name}' condition must be '{index_name} < bound'")
        end = evaluate_size(cond.right, self.constants, f"end of loop '{index_name}'")

        step = self._loop_step(node.next, index_name)
        if start >= end:
            raise RestrictionViolation(f"Loop '{index_name}' is empty ({start} to {end})")
        return LoopSpec(index_name, start, end, step)

    def _loop_step(self, next_node: c_ast.Node, index_name: str) -> int:
        if (isinstance(next_node, c_ast.UnaryOp) and next_node.op in ("++", "p++")
                and isinstance(next_node.expr, c_ast.ID) and next_node.expr.name == index_name):
            return 1
        if (isinstance(next_node, c_ast.Assignment) and next_node.op == "+="
                and isinstance(next_node.lvalue, c_ast.ID) and next_node.lvalue.name == index_name):
            step = evaluate_size(next_node.rvalue, self.constants, f"step of loop '{index_name}'")
            if step < 1:
                raise RestrictionViolation(f"Loop '{index_name}' needs a positive step")
            return step
        raise RestrictionViolation(f"Loop '{index_name}' must increment its index by a positive integer")

    def _collect_loops(self, node: c_ast.For) -> List[c_ast.Node]:
        while True:
            loop = self._loop_header(node)
            if any(existing.index_name == loop.index_name for existing in self.loops):
                raise RestrictionViolation(f"Loop index '{loop.index_name}' is reused")
            self.loops.append(loop)

            body = node.stmt
            items = list(body.block_items or []) if isinstance(body, c_ast.Compound) else [body]
            loops_inside = [item for item in items if isinstance(item, c_ast.For)]
            if not loops_inside:
                return items
            if len(items) != 1:
                raise RestrictionViolation("Only perfectly nested loops are supported")
            node = loops_inside[0]

    # ------------------------------------------Statements------------------------------------------
    def _analyze_statement(self, statement: c_ast.Node, number: int) -> None:
        if isinstance(statement, c_ast.Decl) and statement.init is not None:
            self._declare(statement)
            target, op, value = c_ast.ID(statement.name), "=", statement.init
        elif isinstance(statement, c_ast.Assignment) and statement.op in ASSIGNMENT_OPERATORS:
            target, op, value = statement.lvalue, statement.op, statement.rvalue
        else:
            raise RestrictionViolation(
                f"Only assignments are allowed in the loop body: {self.generator.visit(statement).strip()}"
            )

        self.statements.append(self.generator.visit(statement).strip() + ";")
        self.statement_nodes.append(statement)

        self._visit_expression(value, number)
        if isinstance(target, c_ast.ArrayRef):
            if op != "=":
                self._record_access(target, AccessKind.SOURCE, number)
            self._record_access(target, AccessKind.DESTINATION, number)
        elif isinstance(target, c_ast.ID):
            if target.name not in self.scalars:
                raise RestrictionViolation(f"Assignment to undeclared scalar '{target.name}'")
        else:
            raise RestrictionViolation("Assignment target must be an array element or a scalar")

    def _visit_expression(self, node: c_ast.Node, number: int) -> None:
        if isinstance(node, c_ast.ArrayRef):
            self._record_access(node, AccessKind.SOURCE, number)
        elif isinstance(node, c_ast.BinaryOp):
            if node.op not in ("+", "-", "*", "/"):
                raise RestrictionViolation(f"Operator '{node.op}' is not supported")
            self._visit_expression(node.left, number)
            self._visit_expression(node.right, number)
        elif isinstance(node, c_ast.UnaryOp):
            if node.op not in ("-", "+"):
                raise RestrictionViolation(f"Operator '{node.op}' is not supported")
            self._visit_expression(node.expr, number)
        elif isinstance(node, c_ast.ID):
            if node.name not in self.scalars and node.name not in self.constants:
                raise RestrictionViolation(f"Use of undeclared variable '{node.name}'")
        elif isinstance(node, c_ast.Constant):
            pass
        else:
            raise RestrictionViolation(
                f"Unsupported expression in loop body: {self.generator.visit(node).strip()}"
            )

    def _record_access(self, node: c_ast.ArrayRef, kind: AccessKind, number: int) -> None:
        subscripts = []
        while isinstance(node, c_ast.ArrayRef):
            subscripts.append(node.subscript)
            node = node.name
        if not isinstance(node, c_ast.ID) or node.name not in self.arrays:
            raise RestrictionViolation("Subscripted value is not a declared array")
        name = node.name
        subscripts.reverse()
        if len(subscripts) != len(self.arrays[name].dims):
            raise RestrictionViolation(
                f"'{name}' has {len(self.arrays[name].dims)} dimensions but is accessed with {len(subscripts)}"
            )
        indices = tuple(self._index_term(subscript, name) for subscript in subscripts)
        self.accesses.append(AccessRef(name, indices, kind, number))

    def _index_term(self, node: c_ast.Node, array_name: str) -> IndexTerm:
        loop_names = [loop.index_name for loop in self.loops]
        context = f"subscript of '{array_name}'"
        if isinstance(node, c_ast.ID) and node.name in loop_names:
            return IndexTerm.relative(node.name)
        if isinstance(node, c_ast.BinaryOp) and node.op in ("+", "-"):
            left, right = node.left, node.right
            if isinstance(left, c_ast.ID) and left.name in loop_names:
                offset = evaluate_size(right, self.constants, context)
                return IndexTerm.relative(left.name, offset if node.op == "+" else -offset)
            if node.op == "+" and isinstance(right, c_ast.ID) and right.name in loop_names:
                return IndexTerm.relative(right.name, evaluate_size(left, self.constants, context))
        if isinstance(node, c_ast.ID) and node.name in self.scalars:
            raise RestrictionViolation(f"{context}: scalar '{node.name}' cannot be used as an index")
        return IndexTerm.direct(evaluate_size(node, self.constants, context))


def parse_kernel(source: KernelSource) -> KernelIR:
    """
    Parse restricted kernel source into a validated loop-nest IR.

    Args:
        source (KernelSource): Kernel text and the values of its symbolic constants.

    Returns:
        KernelIR: Loop stack, declarations, array accesses, statements and flop counts.

    Raises:
        KernelSyntaxError: If the text is not well-formed C.
        RestrictionViolation: If the kernel leaves the supported subset.
        MissingConstant: If a symbolic size has no value.
    """
    ir = KernelParser(source).parse()
    ir.flops = count_flops(ir)
    logger.info(
        f"Parsed kernel '{ir.name}': {len(ir.loops)} loops, {len(ir.accesses)} array references, "
        f"{ir.flops['total']} flops per iteration"
    )
    return ir


def read_kernel_file(file_path: str, constants: Dict[str, int]) -> KernelSource:
    """Read a kernel file; the file stem becomes the kernel name."""
    path = Path(file_path)
    try:
        text = path.read_text()
    except OSError as e:
        logger.error(f"Error reading kernel file {file_path}: {str(e)}")
        raise KernelSyntaxError(f"Cannot read kernel file: {file_path}") from e
    return KernelSource(text=text, constants=dict(constants), name=path.stem)


def render_kernel(ir: KernelIR) -> str:
    """Pretty-print the IR as restricted C with every constant substituted."""
    lines = []
    for array in ir.arrays.values():
        lines.append(f"double {array.name}" + "".join(f"[{extent}]" for extent in array.dims) + ";")
    declared_in_body = set()
    for node in ir.statement_nodes:
        if isinstance(node, c_ast.Decl):
            declared_in_body.add(node.name)
    scalars = [name for name in ir.scalars if name not in declared_in_body]
    if scalars:
        lines.append("double " + ", ".join(scalars) + ";")
    lines.append("")

    indent = ""
    for loop in ir.loops:
        step = f"++{loop.index_name}" if loop.step == 1 else f"{loop.index_name} += {loop.step}"
        lines.append(
            f"{indent}for (int {loop.index_name} = {loop.start}; "
            f"{loop.index_name} < {loop.end_exclusive}; {step}) {{"
        )
        indent += "  "
    for statement in ir.statements:
        lines.append(f"{indent}{statement}")
    for _ in ir.loops:
        indent = indent[:-2]
        lines.append(f"{indent}}}")
    return "\n".join(lines) + "\n"


def ir_to_dict(ir: KernelIR) -> dict:
    """Plain-data view of the IR, stable for identical inputs."""
    return {
        "name": ir.name,
        "constants": dict(sorted(ir.constants.items())),
        "loops": [
            {"index": loop.index_name, "start": loop.start, "end": loop.end_exclusive, "step": loop.step}
            for loop in ir.loops
        ],
        "arrays": {name: list(array.dims) for name, array in sorted(ir.arrays.items())},
        "scalars": sorted(ir.scalars),
        "accesses": [
            {"access": str(access), "kind": access.kind.value, "statement": access.statement}
            for access in ir.accesses
        ],
        "flops": dict(ir.flops),
        "statements": list(ir.statements),
    }
