"""Reaching definitions over the ICFG via a worklist fixpoint.

A definition is a (CFG node, variable) pair created by a declaration, an
assignment, a compound assignment, or an increment/decrement. Def-use edges
connect the defining statement node to the *identifier* node that reads the
variable. Variables are resolved lexically (globals, parameters, block
locals), so same-named locals in different scopes never interfere. Stores
through pointers or array elements kill nothing (no alias analysis).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .cfg import ControlEdges, function_definitions, owned_expr_roots, statement_nodes
from .parser import Ast


@dataclass(frozen=True)
class DataEdge:
    src: int  # defining statement-level node
    dst: int  # using DeclRefExpr node
    var: str


@dataclass
class DataEdges:
    edges: list[DataEdge]

    def pairs(self) -> list[tuple[int, int]]:
        return sorted({(e.src, e.dst) for e in self.edges})


# ---------------------------------------------------------------------------
# name resolution


@dataclass
class _Resolution:
    # DeclRefExpr id -> declaring node id (VarDecl or ParmVarDecl)
    var_of_ref: dict[int, int] = field(default_factory=dict)
    name_of_var: dict[int, str] = field(default_factory=dict)


def resolve_variables(ast: Ast) -> _Resolution:
    res = _Resolution()
    global_scope: dict[str, int] = {}
    functions = set(function_definitions(ast))

    def declare(scopes, var_node: int, name: str) -> None:
        scopes[-1][name] = var_node
        res.name_of_var[var_node] = name

    def lookup(scopes, name: str) -> int | None:
        for scope in reversed(scopes):
            if name in scope:
                return scope[name]
        return None

    def resolve_expr(scopes, node: int, *, skip: frozenset[int] = frozenset()) -> None:
        for current in ast.walk(node):
            if current in skip:
                continue
            kind = ast.kind(current)
            if kind == "CallExpr":
                callee = ast.children(current)[0]
                skip = skip | {callee}
            elif kind == "DeclRefExpr" and current not in skip:
                target = lookup(scopes, ast.text(current) or "")
                if target is not None:
                    res.var_of_ref[current] = target

    def resolve_stmt(scopes, stmt: int) -> None:
        kind = ast.kind(stmt)
        if kind == "CompoundStmt":
            scopes.append({})
            for child in ast.children(stmt):
                resolve_stmt(scopes, child)
            scopes.pop()
        elif kind == "DeclStmt":
            for var in ast.children(stmt):
                declare(scopes, var, ast.text(var) or "")
                for init in ast.children(var):
                    resolve_expr(scopes, init)
        elif kind == "ForStmt":
            scopes.append({})
            for child in ast.children(stmt):
                resolve_stmt(scopes, child)
            scopes.pop()
        elif kind in ("IfStmt", "WhileStmt", "SwitchStmt"):
            children = ast.children(stmt)
            resolve_expr(scopes, children[0])
            for child in children[1:]:
                resolve_stmt(scopes, child)
        elif kind in ("LabelStmt", "DefaultStmt"):
            for child in ast.children(stmt):
                resolve_stmt(scopes, child)
        elif kind == "CaseStmt":
            children = ast.children(stmt)
            resolve_expr(scopes, children[0])
            for child in children[1:]:
                resolve_stmt(scopes, child)
        elif kind == "ReturnStmt":
            for child in ast.children(stmt):
                resolve_expr(scopes, child)
        elif kind in ("BreakStmt", "ContinueStmt", "NullStmt", "TypedefDecl"):
            pass
        else:
            resolve_expr(scopes, stmt)

    # pass 1: globals and function names
    for child in ast.children(ast.root):
        if ast.kind(child) == "DeclStmt":
            for var in ast.children(child):
                global_scope[ast.text(var) or ""] = var
                res.name_of_var[var] = ast.text(var) or ""

    # pass 2: function bodies
    for child in ast.children(ast.root):
        if child not in functions:
            continue
        scopes = [global_scope, {}]
        *params, body = ast.children(child)
        for param in params:
            name = ast.text(param)
            if name:
                declare(scopes, param, name)
        resolve_stmt(scopes, body)
    return res


# ---------------------------------------------------------------------------
# def/use extraction


def _gather_expr(ast: Ast, res: _Resolution, root: int, writes: set[int],
                 reads: list[int]) -> None:
    """Collect written variables and reading DeclRefExpr nodes under root."""
    kind = ast.kind(root)
    children = ast.children(root)
    if kind == "VarDecl":
        writes.add(root)
        for init in children:
            _gather_expr(ast, res, init, writes, reads)
        return
    if kind == "DeclStmt":
        for var in children:
            _gather_expr(ast, res, var, writes, reads)
        return
    if kind == "BinaryOperator" and ast.text(root) == "=":
        lhs, rhs = children
        if ast.kind(lhs) == "DeclRefExpr":
            target = res.var_of_ref.get(lhs)
            if target is not None:
                writes.add(target)
        else:
            _gather_expr(ast, res, lhs, writes, reads)  # *p / a[i]: reads only
        _gather_expr(ast, res, rhs, writes, reads)
        return
    if kind == "CompoundAssignOperator":
        lhs, rhs = children
        if ast.kind(lhs) == "DeclRefExpr":
            target = res.var_of_ref.get(lhs)
            if target is not None:
                writes.add(target)
            reads.append(lhs)
        else:
            _gather_expr(ast, res, lhs, writes, reads)
        _gather_expr(ast, res, rhs, writes, reads)
        return
    if kind == "UnaryOperator" and ast.text(root) in ("++", "--"):
        operand = children[0]
        if ast.kind(operand) == "DeclRefExpr":
            target = res.var_of_ref.get(operand)
            if target is not None:
                writes.add(target)
            reads.append(operand)
        else:
            _gather_expr(ast, res, operand, writes, reads)
        return
    if kind == "CallExpr":
        for arg in children[1:]:  # the callee name is not a variable use
            _gather_expr(ast, res, arg, writes, reads)
        return
    if kind == "DeclRefExpr":
        reads.append(root)
        return
    for child in children:
        _gather_expr(ast, res, child, writes, reads)


def node_defs_uses(ast: Ast, res: _Resolution, cfg_node: int):
    """(defined var ids, {var id: [reading DeclRefExpr ids]}) for one node."""
    writes: set[int] = set()
    reads: list[int] = []
    if ast.kind(cfg_node) == "FunctionDecl":
        for child in ast.children(cfg_node):
            if ast.kind(child) == "ParmVarDecl" and ast.text(child):
                writes.add(child)
                res.name_of_var.setdefault(child, ast.text(child) or "")
    for root in owned_expr_roots(ast, cfg_node):
        _gather_expr(ast, res, root, writes, reads)
    uses: dict[int, list[int]] = {}
    for ref in reads:
        var = res.var_of_ref.get(ref)
        if var is not None:
            uses.setdefault(var, []).append(ref)
    return writes, uses


# ---------------------------------------------------------------------------
# fixpoint


def reaching_definitions(ast: Ast, icfg: ControlEdges) -> DataEdges:
    """Def-use edges for every definition that reaches a use along the ICFG."""
    res = resolve_variables(ast)
    nodes = statement_nodes(ast)
    node_set = set(nodes)

    defs: dict[int, set[int]] = {}
    uses: dict[int, dict[int, list[int]]] = {}
    for n in nodes:
        defs[n], uses[n] = node_defs_uses(ast, res, n)

    preds: dict[int, list[int]] = {n: [] for n in nodes}
    succs: dict[int, list[int]] = {n: [] for n in nodes}
    for edge in icfg.edges:
        if edge.src in node_set and edge.dst in node_set:
            preds[edge.dst].append(edge.src)
            succs[edge.src].append(edge.dst)

    in_sets: dict[int, set[tuple[int, int]]] = {n: set() for n in nodes}
    out_sets: dict[int, set[tuple[int, int]]] = {n: set() for n in nodes}

    worklist = deque(nodes)
    queued = set(nodes)
    while worklist:
        n = worklist.popleft()
        queued.discard(n)
        incoming: set[tuple[int, int]] = set()
        for p in preds[n]:
            incoming |= out_sets[p]
        in_sets[n] = incoming
        killed = defs[n]
        out = {(n, v) for v in defs[n]}
        out |= {(d, v) for (d, v) in incoming if v not in killed}
        if out != out_sets[n]:
            out_sets[n] = out
            for s in succs[n]:
                if s not in queued:
                    queued.add(s)
                    worklist.append(s)

    edges: set[DataEdge] = set()
    for n in nodes:
        if not uses[n]:
            continue
        for def_node, var in in_sets[n]:
            refs = uses[n].get(var)
            if refs:
                name = res.name_of_var.get(var, "")
                for ref in refs:
                    edges.add(DataEdge(def_node, ref, name))
    ordered = sorted(edges, key=lambda e: (e.src, e.dst, e.var))
    return DataEdges(ordered)
