"""Statement-level interprocedural control flow graph construction.

CFG nodes are statement-level AST nodes plus FunctionDecl nodes. Compound
statements are transparent; label/case wrappers are pass-through nodes that
flow into their inner statement.

Interprocedural wiring, per call site ``cs`` of a function ``f`` defined in
the same translation unit:

* a ``call`` edge ``cs -> FunctionDecl(f)``,
* a ``flow`` edge ``FunctionDecl(f) -> first statement of f`` (so a
  function's entry edge exists exactly when the function is called),
* a ``return`` edge from every exit point of ``f`` back to ``cs``, where the
  exit points are the return statements, or the lexically last statement when
  ``f`` has none.

A function with no return statement additionally gets a self-style ``return``
edge from its last statement to its own FunctionDecl node, so running off the
end of an uncalled function (typically ``main``) is still visible in the
graph. Calls to functions without a body in the unit (externals, intrinsics
such as ``__VERIFIER_nondet_int``) produce no edges and are reported in the
diagnostics list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parser import Ast

SIMPLE_STMT_KINDS = frozenset({
    "BinaryOperator", "CompoundAssignOperator", "UnaryOperator", "CallExpr",
    "DeclRefExpr", "ArraySubscriptExpr", "IntegerLiteral", "FloatingLiteral",
    "CharacterLiteral", "StringLiteral", "DeclStmt", "NullStmt", "TypedefDecl",
})

WRAPPER_KINDS = frozenset({"LabelStmt", "CaseStmt", "DefaultStmt"})


@dataclass(frozen=True)
class ControlEdge:
    src: int
    dst: int
    tag: str  # flow | call | return | loop-back


@dataclass
class ControlEdges:
    edges: list[ControlEdge]
    diagnostics: list[str] = field(default_factory=list)

    def pairs(self) -> list[tuple[int, int]]:
        return sorted({(e.src, e.dst) for e in self.edges})

    def tagged(self, tag: str) -> list[ControlEdge]:
        return [e for e in self.edges if e.tag == tag]


def function_definitions(ast: Ast) -> list[int]:
    """FunctionDecl ids that carry a body, in pre-order."""
    out = []
    for fn in ast.find("FunctionDecl"):
        children = ast.children(fn)
        if children and ast.kind(children[-1]) == "CompoundStmt":
            out.append(fn)
    return out


def _wrapper_inner(ast: Ast, node: int) -> int | None:
    kind = ast.kind(node)
    children = ast.children(node)
    if kind == "CaseStmt":
        return children[1] if len(children) > 1 else None
    return children[0] if children else None


def statement_nodes(ast: Ast) -> list[int]:
    """Every CFG node: function decls plus each function's statement spine."""
    nodes: list[int] = []
    for fn in function_definitions(ast):
        nodes.append(fn)
        nodes.extend(_function_cfg_nodes(ast, fn))
    return sorted(nodes)


def owned_expr_roots(ast: Ast, node: int) -> tuple[int, ...]:
    """Expression subtrees evaluated *at* this CFG node (no nested statements)."""
    kind = ast.kind(node)
    children = ast.children(node)
    if kind in ("IfStmt", "WhileStmt", "SwitchStmt"):
        return (children[0],)
    if kind == "ForStmt":
        return children[:-1]
    if kind == "CaseStmt":
        return (children[0],)
    if kind in ("LabelStmt", "DefaultStmt", "FunctionDecl"):
        return ()
    if kind == "ReturnStmt":
        return children
    if kind in SIMPLE_STMT_KINDS:
        return (node,)
    return ()


def last_statement(ast: Ast, body: int) -> int | None:
    """Lexically last statement-level node of a compound body."""
    children = ast.children(body)
    for child in reversed(children):
        if ast.kind(child) == "CompoundStmt":
            found = last_statement(ast, child)
            if found is not None:
                return found
            continue
        return child
    return None


class _FunctionWiring:
    def __init__(self, ast: Ast, fn: int, add_edge, diagnostics: list[str]):
        self.ast = ast
        self.fn = fn
        self.add_edge = add_edge
        self.diagnostics = diagnostics
        self.returns: list[int] = []
        self.loop_stack: list[int] = []
        self.break_stack: list[list[int]] = []

    def wire_body(self) -> list[int]:
        return self.wire(self.ast.children(self.fn)[-1], [])

    def wire(self, stmt: int, preds: list[int]) -> list[int]:
        """Wire ``preds -> stmt`` and internals; return fallthrough exits."""
        ast = self.ast
        kind = ast.kind(stmt)

        if kind == "CompoundStmt":
            pending = preds
            for child in ast.children(stmt):
                pending = self.wire(child, pending)
            return pending

        for p in preds:
            self.add_edge(p, stmt, "flow")

        if kind == "ReturnStmt":
            self.returns.append(stmt)
            return []
        if kind == "BreakStmt":
            if self.break_stack:
                self.break_stack[-1].append(stmt)
            else:
                self.diagnostics.append(f"node {stmt}: break outside loop/switch")
            return []
        if kind == "ContinueStmt":
            if self.loop_stack:
                self.add_edge(stmt, self.loop_stack[-1], "loop-back")
            else:
                self.diagnostics.append(f"node {stmt}: continue outside loop")
            return []
        if kind in WRAPPER_KINDS:
            inner = _wrapper_inner(ast, stmt)
            return self.wire(inner, [stmt]) if inner is not None else [stmt]
        if kind == "IfStmt":
            arms = ast.children(stmt)[1:]
            exits = []
            for arm in arms:
                exits.extend(self.wire(arm, [stmt]))
            if len(arms) < 2:
                exits.append(stmt)  # false branch falls to the successor
            return _dedupe(exits)
        if kind in ("WhileStmt", "ForStmt"):
            body = ast.children(stmt)[-1]
            self.loop_stack.append(stmt)
            self.break_stack.append([])
            body_exits = self.wire(body, [stmt])
            self.loop_stack.pop()
            breaks = self.break_stack.pop()
            for x in body_exits:
                if x != stmt:
                    self.add_edge(x, stmt, "loop-back")
            return _dedupe([stmt] + breaks)
        if kind == "SwitchStmt":
            body = ast.children(stmt)[-1]
            case_nodes = _collect_cases(ast, body)
            for case in case_nodes:
                self.add_edge(stmt, case, "flow")
            self.break_stack.append([])
            fallthrough = self.wire(body, [])
            breaks = self.break_stack.pop()
            exits = list(fallthrough) + breaks
            if not any(ast.kind(c) == "DefaultStmt" for c in case_nodes):
                exits.append(stmt)  # no default: the switch may be skipped
            return _dedupe(exits)
        # simple statement
        return [stmt]


def _dedupe(items: list[int]) -> list[int]:
    seen: set[int] = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def _collect_cases(ast: Ast, body: int) -> list[int]:
    out: list[int] = []

    def visit(stmt: int) -> None:
        kind = ast.kind(stmt)
        if kind == "CompoundStmt":
            for child in ast.children(stmt):
                visit(child)
        elif kind in ("CaseStmt", "DefaultStmt"):
            out.append(stmt)
            inner = _wrapper_inner(ast, stmt)
            if inner is not None:
                visit(inner)

    visit(body)
    return out


def _call_sites(ast: Ast, cfg_node: int) -> list[str]:
    """Callee names invoked by the expressions owned by one CFG node."""
    names = []
    for root in owned_expr_roots(ast, cfg_node):
        for node in ast.walk(root):
            if ast.kind(node) != "CallExpr":
                continue
            callee = ast.children(node)[0]
            if ast.kind(callee) == "DeclRefExpr":
                names.append(ast.text(callee) or "")
            else:
                names.append("")
    return names


def build_icfg(ast: Ast) -> ControlEdges:
    """Derive flow, loop-back, call, and return edges for the whole unit."""
    edges: set[ControlEdge] = set()
    diagnostics: list[str] = []

    def add_edge(src: int, dst: int, tag: str) -> None:
        edges.add(ControlEdge(src, dst, tag))

    functions = function_definitions(ast)
    fn_by_name: dict[str, int] = {}
    for fn in functions:
        name = ast.text(fn) or ""
        if name in fn_by_name:
            diagnostics.append(f"node {fn}: redefinition of {name}")
            continue
        fn_by_name[name] = fn

    info: dict[int, dict] = {}
    for fn in functions:
        wiring = _FunctionWiring(ast, fn, add_edge, diagnostics)
        wiring.wire_body()
        body = ast.children(fn)[-1]
        last = last_statement(ast, body)
        entry = _body_entry(ast, body)
        info[fn] = {"returns": wiring.returns, "last": last, "entry": entry}
        if not wiring.returns and last is not None:
            add_edge(last, fn, "return")  # main-return style self edge

    # call/return wiring
    for fn in functions:
        for cfg_node in _function_cfg_nodes(ast, fn):
            for name in _call_sites(ast, cfg_node):
                callee = fn_by_name.get(name)
                if callee is None:
                    diagnostics.append(
                        f"node {cfg_node}: unresolved call to {name or '<indirect>'}"
                    )
                    continue
                add_edge(cfg_node, callee, "call")
                meta = info[callee]
                if meta["entry"] is not None:
                    add_edge(callee, meta["entry"], "flow")
                exit_points = meta["returns"] or (
                    [meta["last"]] if meta["last"] is not None else [callee]
                )
                for ep in exit_points:
                    add_edge(ep, cfg_node, "return")

    ordered = sorted(edges, key=lambda e: (e.src, e.dst, e.tag))
    return ControlEdges(ordered, diagnostics)


def _body_entry(ast: Ast, body: int) -> int | None:
    for child in ast.children(body):
        if ast.kind(child) == "CompoundStmt":
            found = _body_entry(ast, child)
            if found is not None:
                return found
            continue
        return child
    return None


def _function_cfg_nodes(ast: Ast, fn: int) -> list[int]:
    nodes = []

    def spine(stmt: int) -> None:
        kind = ast.kind(stmt)
        if kind == "CompoundStmt":
            for child in ast.children(stmt):
                spine(child)
            return
        nodes.append(stmt)
        if kind == "IfStmt":
            for arm in ast.children(stmt)[1:]:
                spine(arm)
        elif kind in ("WhileStmt", "ForStmt", "SwitchStmt"):
            spine(ast.children(stmt)[-1])
        elif kind in WRAPPER_KINDS:
            inner = _wrapper_inner(ast, stmt)
            if inner is not None:
                spine(inner)

    spine(ast.children(fn)[-1])
    return nodes
