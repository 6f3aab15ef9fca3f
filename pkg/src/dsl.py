"""Kernel expression language.

    expr   := term ('+' term)*
    term   := factor ('*' factor)*
    factor := kernel '(' args ')' | '(' expr ')'

Kernels are se, poly2, sdof, sw and swneg. Arguments are column bindings,
optionally wrapped in a transform (`cos2(theta)`, `neg(x)`); sw and swneg end
with a switch tag, e.g. `sw(cos2(theta), S)` or `sw(theta, cos2, S)`.
"""

import logging
from dataclasses import dataclass
from typing import Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

from src.errors import ConfigError, DSLSyntaxError
from src.kernels import SDOF, SE, Binding, KernelExpr, Poly2, Product, Sigmoid, SigmoidNeg, Sum, Transform

logger = logging.getLogger(__name__)

GRAMMAR = r"""
    start: expr
    expr: term ("+" term)*
    term: factor ("*" factor)*
    ?factor: call
           | "(" expr ")"
    call: NAME "(" [arg ("," arg)*] ")"
    arg: NAME                -> plain
       | NAME "(" NAME ")"   -> wrapped

    NAME: /[A-Za-z_][A-Za-z0-9_.]*/

    %import common.WS
    %ignore WS
"""

KERNELS = ("se", "poly2", "sdof", "sw", "swneg")
TRANSFORM_NAMES = {"cos2": Transform.COS2, "neg": Transform.NEGATE}
TRANSFORM_SPELLING = {v: k for k, v in TRANSFORM_NAMES.items()}

_parser = Lark(GRAMMAR, parser="lalr", propagate_positions=True)


# --- AST ---


@dataclass(frozen=True)
class KernelCall:
    kind: str
    bindings: tuple[Binding, ...]
    tag: str | None = None


@dataclass(frozen=True)
class SumSpec:
    terms: tuple["KernelSpec", ...]


@dataclass(frozen=True)
class ProductSpec:
    factors: tuple["KernelSpec", ...]


KernelSpec = Union[KernelCall, SumSpec, ProductSpec]


def _syntax(message: str, token) -> DSLSyntaxError:
    return DSLSyntaxError(message, token.line, token.column)


def _transform(name: Token) -> Transform:
    try:
        return TRANSFORM_NAMES[str(name)]
    except KeyError:
        raise _syntax(f"unknown transform {str(name)!r}", name) from None


class _ToSpec(Transformer):
    def start(self, children):
        return children[0]

    def expr(self, children):
        return children[0] if len(children) == 1 else SumSpec(tuple(children))

    def term(self, children):
        return children[0] if len(children) == 1 else ProductSpec(tuple(children))

    def plain(self, children):
        return children[0]

    def wrapped(self, children):
        name, column = children
        return Binding(str(column), _transform(name)), name

    def call(self, children):
        name, *args = children
        args = [a for a in args if a is not None]
        kind = str(name)
        if kind not in KERNELS:
            raise _syntax(f"unknown kernel {kind!r} (expected one of {', '.join(KERNELS)})", name)
        if kind in ("sw", "swneg"):
            return self._switch(kind, name, args)
        bindings = tuple(self._binding(a) for a in args)
        if not bindings:
            raise _syntax(f"{kind} needs at least one column", name)
        if kind == "sdof" and len(bindings) != 1:
            raise _syntax("sdof takes exactly one column", name)
        return KernelCall(kind, bindings)

    @staticmethod
    def _binding(arg) -> Binding:
        if isinstance(arg, tuple):
            return arg[0]
        return Binding(str(arg))

    def _switch(self, kind: str, name: Token, args) -> KernelCall:
        if len(args) == 3 and all(isinstance(a, Token) for a in args):
            column, transform, tag = args
            return KernelCall(kind, (Binding(str(column), _transform(transform)),), str(tag))
        if len(args) == 2 and isinstance(args[1], Token):
            return KernelCall(kind, (self._binding(args[0]),), str(args[1]))
        raise _syntax(f"{kind} takes (column, tag) or (column, transform, tag)", name)


def _end_position(text: str) -> tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def parse_kernel_spec(text: str) -> KernelSpec:
    """Parse DSL text; syntax errors carry 1-based line and column."""
    try:
        tree = _parser.parse(text)
        spec = _ToSpec().transform(tree)
    except VisitError as exc:
        raise exc.orig_exc from None
    except UnexpectedEOF:
        line, column = _end_position(text)
        raise DSLSyntaxError("unexpected end of kernel expression", line, column) from None
    except UnexpectedInput as exc:
        token = getattr(exc, "token", None)
        if token is not None and token.type == "$END":
            line, column = _end_position(text)
            raise DSLSyntaxError("unexpected end of kernel expression", line, column) from None
        raise DSLSyntaxError("invalid kernel expression", exc.line, exc.column) from None
    check_switch_tags(spec)
    return spec


def calls(spec: KernelSpec):
    if isinstance(spec, KernelCall):
        yield spec
    elif isinstance(spec, SumSpec):
        for term in spec.terms:
            yield from calls(term)
    else:
        for factor in spec.factors:
            yield from calls(factor)


def check_switch_tags(spec: KernelSpec) -> None:
    """Every use of a switch tag must gate the same input."""
    seen: dict[str, Binding] = {}
    for call in calls(spec):
        if call.tag is None:
            continue
        binding = seen.setdefault(call.tag, call.bindings[0])
        if binding != call.bindings[0]:
            raise ConfigError(
                f"switch tag {call.tag!r} used with both {_format_binding(binding)} "
                f"and {_format_binding(call.bindings[0])}"
            )


# --- Printing ---


def _format_binding(binding: Binding) -> str:
    if binding.transform is Transform.IDENTITY:
        return binding.column
    return f"{TRANSFORM_SPELLING[binding.transform]}({binding.column})"


def format_kernel_spec(spec: KernelSpec) -> str:
    if isinstance(spec, KernelCall):
        args = [_format_binding(b) for b in spec.bindings]
        if spec.tag is not None:
            args.append(spec.tag)
        return f"{spec.kind}({', '.join(args)})"
    if isinstance(spec, SumSpec):
        return " + ".join(
            f"({format_kernel_spec(t)})" if isinstance(t, SumSpec) else format_kernel_spec(t)
            for t in spec.terms
        )
    return " * ".join(
        f"({format_kernel_spec(f)})" if isinstance(f, (SumSpec, ProductSpec)) else format_kernel_spec(f)
        for f in spec.factors
    )


# --- Building ---


def _expand(bindings, groups: dict[str, tuple[str, ...]]) -> tuple[Binding, ...]:
    out: list[Binding] = []
    for b in bindings:
        if b.column in groups:
            out.extend(Binding(column, b.transform) for column in groups[b.column])
        else:
            out.append(b)
    return tuple(out)


def build_kernel(
    spec: KernelSpec,
    columns=None,
    groups: dict[str, tuple[str, ...]] | None = None,
) -> KernelExpr:
    """KernelExpr for an AST; leaves are labelled se1, se2, poly1, sdof1, ... in order."""
    groups = dict(groups or {})
    counters: dict[str, int] = {}
    available = set(columns) if columns is not None else None

    def check(bindings: tuple[Binding, ...]) -> None:
        if available is None:
            return
        missing = sorted({b.column for b in bindings} - available)
        if missing:
            raise ConfigError(
                f"kernel refers to unknown column(s) {', '.join(missing)}; "
                f"available: {', '.join(sorted(available))}"
            )

    def label(kind: str) -> str:
        counters[kind] = counters.get(kind, 0) + 1
        prefix = "poly" if kind == "poly2" else kind
        return f"{prefix}{counters[kind]}"

    def build(node: KernelSpec) -> KernelExpr:
        if isinstance(node, SumSpec):
            return Sum(tuple(build(t) for t in node.terms))
        if isinstance(node, ProductSpec):
            return Product(tuple(build(f) for f in node.factors))
        if node.kind in ("se", "poly2"):
            bindings = _expand(node.bindings, groups)
            if len(set(bindings)) != len(bindings):
                raise ConfigError(f"{node.kind} binds the same input twice")
            check(bindings)
            cls = SE if node.kind == "se" else Poly2
            return cls(label(node.kind), bindings)
        (binding,) = node.bindings
        if binding.column in groups:
            raise ConfigError(f"{node.kind} needs a single column, got group {binding.column!r}")
        check((binding,))
        if node.kind == "sdof":
            return SDOF(label("sdof"), binding)
        cls = Sigmoid if node.kind == "sw" else SigmoidNeg
        return cls(node.tag, binding)

    expr = build(spec)
    logger.debug("Built kernel %s", format_kernel_spec(spec))
    return expr
