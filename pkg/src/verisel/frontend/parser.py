"""Recursive-descent parser for the supported C subset.

Produces a flat AST with pre-order node numbering. Structural punctuation
(parentheses, braces, semicolons) is consumed but never materialized as
nodes; declarations, statements, and expressions become nodes whose kind
names follow the usual C AST vocabulary.

Supported: declarations (with pointers and array suffixes), typedefs,
function definitions and prototypes, if/else, while, for, switch,
return/break/continue, labeled statements, compound statements, and
expressions including calls, unary * and &, assignment, comparison,
arithmetic, logical, and bitwise operators. Everything else raises
:class:`UnsupportedConstruct` so callers may fall back to graph import.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import FrontendError, Token, tokenize

TYPE_KEYWORDS = frozenset({
    "int", "char", "long", "short", "unsigned", "signed", "void",
    "float", "double",
})
QUALIFIERS = frozenset({"const", "volatile", "static", "extern"})
UNSUPPORTED_KEYWORDS = frozenset({"goto", "do", "struct", "union", "enum", "sizeof"})

ASSIGN_OPS = frozenset({"+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="})

# binary operator precedence tiers, loosest first
_BINARY_TIERS = (
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
)

UNARY_OPS = frozenset({"*", "&", "+", "-", "!", "~", "++", "--"})


class ParseError(FrontendError):
    def __init__(self, expected: str, found: Token | None):
        where = f"{found.line}:{found.col}" if found else "end of input"
        shown = found.text if found else "<eof>"
        super().__init__(f"{where}: expected {expected}, found {shown!r}")
        self.expected = expected
        self.found = found


class UnsupportedConstruct(FrontendError):
    def __init__(self, construct: str, token: Token | None = None):
        where = f"{token.line}:{token.col}: " if token else ""
        super().__init__(f"{where}unsupported construct: {construct}")
        self.construct = construct


@dataclass(frozen=True)
class AstNode:
    kind: str
    children: tuple[int, ...]
    text: str | None = None


@dataclass(frozen=True)
class Ast:
    """Flat AST; ids are pre-order, node 0 is the TranslationUnit root."""

    nodes: tuple[AstNode, ...]
    root: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def kind(self, node_id: int) -> str:
        return self.nodes[node_id].kind

    def children(self, node_id: int) -> tuple[int, ...]:
        return self.nodes[node_id].children

    def text(self, node_id: int) -> str | None:
        return self.nodes[node_id].text

    def find(self, kind: str, text: str | None = None) -> list[int]:
        """All node ids with the given kind (and lexeme, when provided)."""
        return [
            i for i, node in enumerate(self.nodes)
            if node.kind == kind and (text is None or node.text == text)
        ]

    def walk(self, node_id: int):
        """Yield node_id and every descendant in pre-order."""
        stack = [node_id]
        while stack:
            current = stack.pop()
            yield current
            stack.extend(reversed(self.nodes[current].children))


@dataclass
class _N:
    kind: str
    children: list["_N"] = field(default_factory=list)
    text: str | None = None


def _flatten(root: _N) -> Ast:
    nodes: list[AstNode] = []

    def visit(node: _N) -> int:
        node_id = len(nodes)
        nodes.append(AstNode(node.kind, (), node.text))  # placeholder
        child_ids = tuple(visit(child) for child in node.children)
        nodes[node_id] = AstNode(node.kind, child_ids, node.text)
        return node_id

    visit(root)
    return Ast(tuple(nodes))


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.typedefs: set[str] = set()

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        j = self.pos + offset
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, kind: str, text: str | None = None, offset: int = 0) -> bool:
        token = self.peek(offset)
        return (
            token is not None
            and token.kind == kind
            and (text is None or token.text == text)
        )

    def take(self) -> Token:
        token = self.peek()
        if token is None:
            raise ParseError("more input", None)
        self.pos += 1
        return token

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            raise ParseError(text or kind, self.peek())
        return self.take()

    def reject_unsupported(self) -> None:
        token = self.peek()
        if token is not None and token.kind == "kw" and token.text in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(token.text, token)

    # -- type machinery ----------------------------------------------------

    def at_type_start(self, offset: int = 0) -> bool:
        token = self.peek(offset)
        if token is None:
            return False
        if token.kind == "kw" and token.text in (TYPE_KEYWORDS | QUALIFIERS):
            return True
        return token.kind == "ident" and token.text in self.typedefs

    def parse_decl_specs(self) -> None:
        """Consume qualifiers plus one type spec; types are not materialized."""
        saw_type = False
        while True:
            token = self.peek()
            if token is None:
                break
            if token.kind == "kw" and token.text in QUALIFIERS:
                self.take()
            elif token.kind == "kw" and token.text in TYPE_KEYWORDS:
                saw_type = True
                self.take()
            elif (
                not saw_type
                and token.kind == "ident"
                and token.text in self.typedefs
            ):
                saw_type = True
                self.take()
            else:
                break
        if not saw_type:
            raise ParseError("type specifier", self.peek())

    def parse_declarator(self) -> str:
        while self.at("op", "*"):
            self.take()
            while self.at("kw", "const") or self.at("kw", "volatile"):
                self.take()
        if self.at("punct", "("):
            raise UnsupportedConstruct("function pointer declarator", self.peek())
        name = self.expect("ident").text
        while self.at("punct", "["):
            self.take()
            if not self.at("punct", "]"):
                self.expect("int")
            self.expect("punct", "]")
        return name

    # -- top level ---------------------------------------------------------

    def parse_translation_unit(self) -> _N:
        root = _N("TranslationUnit")
        while self.peek() is not None:
            root.children.append(self.parse_external_decl())
        return root

    def parse_external_decl(self) -> _N:
        self.reject_unsupported()
        if self.at("kw", "typedef"):
            return self.parse_typedef()
        if not self.at_type_start():
            raise ParseError("declaration or function definition", self.peek())
        self.parse_decl_specs()
        name = self.parse_declarator()
        if self.at("punct", "("):
            return self.parse_function_rest(name)
        return self.parse_declstmt_rest(name)

    def parse_typedef(self) -> _N:
        self.expect("kw", "typedef")
        self.reject_unsupported()
        self.parse_decl_specs()
        name = self.parse_declarator()
        self.expect("punct", ";")
        self.typedefs.add(name)
        return _N("TypedefDecl", text=name)

    def parse_function_rest(self, name: str) -> _N:
        self.expect("punct", "(")
        params: list[_N] = []
        if self.at("kw", "void") and self.at("punct", ")", offset=1):
            self.take()
        elif not self.at("punct", ")"):
            while True:
                self.reject_unsupported()
                self.parse_decl_specs()
                param_name = None
                while self.at("op", "*"):
                    self.take()
                if self.at("ident"):
                    param_name = self.take().text
                    while self.at("punct", "["):
                        self.take()
                        if not self.at("punct", "]"):
                            self.expect("int")
                        self.expect("punct", "]")
                params.append(_N("ParmVarDecl", text=param_name))
                if self.at("punct", ","):
                    self.take()
                    continue
                break
        self.expect("punct", ")")
        decl = _N("FunctionDecl", params, text=name)
        if self.at("punct", ";"):
            self.take()  # prototype: no body child
            return decl
        decl.children.append(self.parse_compound())
        return decl

    def parse_declstmt_rest(self, first_name: str) -> _N:
        decl = _N("DeclStmt", [self.parse_init_declarator(first_name)])
        while self.at("punct", ","):
            self.take()
            decl.children.append(self.parse_init_declarator(self.parse_declarator()))
        self.expect("punct", ";")
        return decl

    def parse_init_declarator(self, name: str) -> _N:
        var = _N("VarDecl", text=name)
        if self.at("op", "="):
            self.take()
            if self.at("punct", "{"):
                raise UnsupportedConstruct("brace initializer", self.peek())
            var.children.append(self.parse_assignment())
        return var

    # -- statements ----------------------------------------------------------

    def parse_compound(self) -> _N:
        self.expect("punct", "{")
        block = _N("CompoundStmt")
        while not self.at("punct", "}"):
            if self.peek() is None:
                raise ParseError("'}'", None)
            block.children.append(self.parse_statement())
        self.expect("punct", "}")
        return block

    def parse_statement(self) -> _N:
        self.reject_unsupported()
        token = self.peek()
        if token is None:
            raise ParseError("statement", None)
        if token.kind == "punct" and token.text == "{":
            return self.parse_compound()
        if token.kind == "punct" and token.text == ";":
            self.take()
            return _N("NullStmt")
        if token.kind == "kw":
            handler = {
                "if": self.parse_if,
                "while": self.parse_while,
                "for": self.parse_for,
                "switch": self.parse_switch,
                "return": self.parse_return,
                "break": lambda: self.parse_jump("break", "BreakStmt"),
                "continue": lambda: self.parse_jump("continue", "ContinueStmt"),
                "case": self.parse_case,
                "default": self.parse_default,
                "typedef": self.parse_typedef,
            }.get(token.text)
            if handler is not None:
                return handler()
        if self.at_type_start():
            self.parse_decl_specs()
            return self.parse_declstmt_rest(self.parse_declarator())
        if token.kind == "ident" and self.at("op", ":", offset=1):
            label = self.take().text
            self.take()
            return _N("LabelStmt", [self.parse_statement()], text=label)
        expr = self.parse_expression()
        self.expect("punct", ";")
        return expr

    def parse_if(self) -> _N:
        self.expect("kw", "if")
        self.expect("punct", "(")
        cond = self.parse_expression()
        self.expect("punct", ")")
        node = _N("IfStmt", [cond, self.parse_statement()])
        if self.at("kw", "else"):
            self.take()
            node.children.append(self.parse_statement())
        return node

    def parse_while(self) -> _N:
        self.expect("kw", "while")
        self.expect("punct", "(")
        cond = self.parse_expression()
        self.expect("punct", ")")
        return _N("WhileStmt", [cond, self.parse_statement()])

    def parse_for(self) -> _N:
        self.expect("kw", "for")
        self.expect("punct", "(")
        parts: list[_N] = []
        if self.at("punct", ";"):
            self.take()
        elif self.at_type_start():
            self.parse_decl_specs()
            parts.append(self.parse_declstmt_rest(self.parse_declarator()))
        else:
            parts.append(self.parse_expression())
            self.expect("punct", ";")
        if not self.at("punct", ";"):
            parts.append(self.parse_expression())
        self.expect("punct", ";")
        if not self.at("punct", ")"):
            parts.append(self.parse_expression())
        self.expect("punct", ")")
        parts.append(self.parse_statement())
        return _N("ForStmt", parts)

    def parse_switch(self) -> _N:
        self.expect("kw", "switch")
        self.expect("punct", "(")
        cond = self.parse_expression()
        self.expect("punct", ")")
        return _N("SwitchStmt", [cond, self.parse_statement()])

    def parse_case(self) -> _N:
        self.expect("kw", "case")
        value = self.parse_expression()
        self.expect("op", ":")
        return _N("CaseStmt", [value, self.parse_statement()])

    def parse_default(self) -> _N:
        self.expect("kw", "default")
        self.expect("op", ":")
        return _N("DefaultStmt", [self.parse_statement()])

    def parse_return(self) -> _N:
        self.expect("kw", "return")
        node = _N("ReturnStmt")
        if not self.at("punct", ";"):
            node.children.append(self.parse_expression())
        self.expect("punct", ";")
        return node

    def parse_jump(self, keyword: str, kind: str) -> _N:
        self.expect("kw", keyword)
        self.expect("punct", ";")
        return _N(kind)

    # -- expressions ---------------------------------------------------------

    def parse_expression(self) -> _N:
        return self.parse_assignment()

    def parse_assignment(self) -> _N:
        left = self.parse_binary(0)
        if self.at("op", "="):
            self.take()
            return _N("BinaryOperator", [left, self.parse_assignment()], text="=")
        token = self.peek()
        if token is not None and token.kind == "op" and token.text in ASSIGN_OPS:
            self.take()
            return _N(
                "CompoundAssignOperator",
                [left, self.parse_assignment()],
                text=token.text,
            )
        if self.at("op", "?"):
            raise UnsupportedConstruct("conditional operator", self.peek())
        return left

    def parse_binary(self, tier: int) -> _N:
        if tier >= len(_BINARY_TIERS):
            return self.parse_unary()
        ops = _BINARY_TIERS[tier]
        node = self.parse_binary(tier + 1)
        while True:
            token = self.peek()
            if token is None or token.kind != "op" or token.text not in ops:
                return node
            # '=' handled by parse_assignment; '&&'/'&' etc. disambiguated by text
            self.take()
            right = self.parse_binary(tier + 1)
            node = _N("BinaryOperator", [node, right], text=token.text)

    def parse_unary(self) -> _N:
        self.reject_unsupported()
        token = self.peek()
        if token is not None and token.kind == "op" and token.text in UNARY_OPS:
            self.take()
            return _N("UnaryOperator", [self.parse_unary()], text=token.text)
        return self.parse_postfix()

    def parse_postfix(self) -> _N:
        node = self.parse_primary()
        while True:
            if self.at("punct", "("):
                self.take()
                call = _N("CallExpr", [node])
                if not self.at("punct", ")"):
                    while True:
                        call.children.append(self.parse_assignment())
                        if self.at("punct", ","):
                            self.take()
                            continue
                        break
                self.expect("punct", ")")
                node = call
            elif self.at("punct", "["):
                self.take()
                index = self.parse_expression()
                self.expect("punct", "]")
                node = _N("ArraySubscriptExpr", [node, index])
            elif self.at("op", "++") or self.at("op", "--"):
                node = _N("UnaryOperator", [node], text=self.take().text)
            else:
                return node

    def parse_primary(self) -> _N:
        self.reject_unsupported()
        token = self.peek()
        if token is None:
            raise ParseError("expression", None)
        if token.kind == "ident":
            return _N("DeclRefExpr", text=self.take().text)
        literal_kinds = {
            "int": "IntegerLiteral",
            "float": "FloatingLiteral",
            "char": "CharacterLiteral",
            "string": "StringLiteral",
        }
        if token.kind in literal_kinds:
            return _N(literal_kinds[token.kind], text=self.take().text)
        if token.kind == "punct" and token.text == "(":
            if self.at_type_start(offset=1):
                raise UnsupportedConstruct("cast", token)
            self.take()
            inner = self.parse_expression()
            self.expect("punct", ")")
            return inner  # parentheses are structural, no node
        raise ParseError("expression", token)


def parse(tokens: list[Token]) -> Ast:
    """Parse a token stream into a flat, pre-order-numbered AST."""
    parser = _Parser(tokens)
    root = parser.parse_translation_unit()
    return _flatten(root)


def parse_source(source: str) -> Ast:
    return parse(tokenize(source))
