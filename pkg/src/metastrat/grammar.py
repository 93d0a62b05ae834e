"""Context-free grammars, programs as ASTs, random sampling and mutation."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

DEFAULT_DEPTH_CAP = 12
DEFAULT_NODE_CAP = 512
MUTATION_RETRIES = 10


class GrammarError(ValueError):
    """Raised for malformed grammar text or definitions."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UndefinedSymbolError(GrammarError):
    pass


class InfeasibleDepthError(ValueError):
    pass


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Grammar:
    nonterminals: frozenset[str]
    terminals: frozenset[str]
    productions: Mapping[str, tuple[tuple[str, ...], ...]]
    start: str

    def __post_init__(self):
        if self.start not in self.nonterminals:
            raise GrammarError(f"start symbol {self.start!r} is not a non-terminal")
        overlap = self.nonterminals & self.terminals
        if overlap:
            raise GrammarError(f"symbols are both terminal and non-terminal: {sorted(overlap)}")
        known = self.nonterminals | self.terminals
        for nt in self.nonterminals:
            rules = self.productions.get(nt, ())
            if not rules:
                raise GrammarError(f"non-terminal {nt!r} has no production")
            for rhs in rules:
                if not rhs:
                    raise GrammarError(f"empty right-hand side for {nt!r}")
                for sym in rhs:
                    if sym not in known:
                        raise UndefinedSymbolError(f"undefined symbol {sym!r} in rule for {nt!r}")
        extra = set(self.productions) - self.nonterminals
        if extra:
            raise GrammarError(f"productions for unknown non-terminals: {sorted(extra)}")

    @classmethod
    def from_rules(cls, rules: Mapping[str, Sequence[Sequence[str]]], start: str | None = None) -> Grammar:
        """Build a grammar from ``{lhs: [rhs, ...]}``; terminals are inferred."""
        prods = {nt: tuple(tuple(rhs) for rhs in alts) for nt, alts in rules.items()}
        nonterminals = frozenset(prods)
        used = {sym for alts in prods.values() for rhs in alts for sym in rhs}
        return cls(
            nonterminals=nonterminals,
            terminals=frozenset(used - nonterminals),
            productions=prods,
            start=start if start is not None else next(iter(prods)),
        )

    def is_terminal(self, symbol: str) -> bool:
        return symbol in self.terminals

    @cached_property
    def min_height(self) -> dict[str, int]:
        """Smallest height of a complete derivation tree rooted at each symbol.

        Terminals have height 0; a node whose children are all terminals has
        height 1.
        """
        inf = float("inf")
        height: dict[str, float] = {t: 0 for t in self.terminals}
        height.update({nt: inf for nt in self.nonterminals})
        changed = True
        while changed:
            changed = False
            for nt in self.nonterminals:
                best = min(1 + max(height[s] for s in rhs) for rhs in self.productions[nt])
                if best < height[nt]:
                    height[nt] = best
                    changed = True
        unreachable = [nt for nt in self.nonterminals if height[nt] == inf]
        if unreachable:
            raise GrammarError(f"non-terminals never derive a terminal string: {sorted(unreachable)}")
        return {k: int(v) for k, v in height.items()}

    def rule_height(self, rhs: Sequence[str]) -> int:
        h = self.min_height
        return 1 + max(h[s] for s in rhs)

    def eligible(self, nt: str, max_height: int) -> tuple[tuple[str, ...], ...]:
        """Productions of ``nt`` that can complete within ``max_height``."""
        cache = self.__dict__.setdefault("_eligible", {})
        key = (nt, max_height)
        found = cache.get(key)
        if found is None:
            found = tuple(rhs for rhs in self.productions[nt] if self.rule_height(rhs) <= max_height)
            cache[key] = found
        return found

    def leaf(self, terminal: str) -> Node:
        """Shared leaf node for ``terminal``; leaves are immutable so reuse is safe."""
        cache = self.__dict__.setdefault("_leaves", {})
        node = cache.get(terminal)
        if node is None:
            node = cache[terminal] = Node(terminal)
        return node

    def to_text(self) -> str:
        lines = []
        order = [self.start] + sorted(self.nonterminals - {self.start})
        for nt in order:
            alts = " | ".join(" ".join(rhs) for rhs in self.productions[nt])
            lines.append(f"{nt} -> {alts}")
        return "\n".join(lines) + "\n"


def load_grammar(text: str) -> Grammar:
    """Parse ``NT -> rhs1 | rhs2`` lines into a :class:`Grammar`.

    Symbols are whitespace separated and ``#`` starts a comment. The first
    left-hand side is the start symbol. A non-terminal may appear on several
    lines; its alternatives accumulate in order. Symbols never defined on a
    left-hand side are terminals, except that a capitalised symbol is always
    read as a non-terminal reference and must be defined.
    """
    rules: dict[str, list[tuple[str, ...]]] = {}
    first_use: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise GrammarError("expected '<NT> -> alternatives'", lineno)
        lhs, rhs_text = line.split("->", 1)
        lhs_parts = lhs.split()
        if len(lhs_parts) != 1:
            raise GrammarError(f"left-hand side must be a single symbol, got {lhs.strip()!r}", lineno)
        nt = lhs_parts[0]
        alts = rhs_text.split("|")
        for alt in alts:
            symbols = tuple(alt.split())
            if not symbols:
                raise GrammarError(f"empty alternative for {nt!r}", lineno)
            rules.setdefault(nt, []).append(symbols)
            for sym in symbols:
                first_use.setdefault(sym, lineno)
    if not rules:
        raise GrammarError("grammar text defines no rules")
    for sym, lineno in first_use.items():
        if sym[0].isupper() and sym not in rules:
            raise UndefinedSymbolError(f"undefined non-terminal {sym!r}", lineno)
    grammar = Grammar.from_rules(rules)
    grammar.min_height  # surfaces non-terminating grammars at load time
    return grammar


class Node:
    """Immutable AST node; size, height and leaves are computed once."""

    __slots__ = ("symbol", "children", "size", "height", "_leaves", "_hash")

    def __init__(self, symbol: str, children: Sequence[Node] = ()):
        if type(children) is not tuple:
            children = tuple(children)
        _set = object.__setattr__
        _set(self, "symbol", symbol)
        _set(self, "children", children)
        if children:
            size, height = 1, 0
            for c in children:
                size += c.size
                if c.height > height:
                    height = c.height
            _set(self, "size", size)
            _set(self, "height", height + 1)
        else:
            _set(self, "size", 1)
            _set(self, "height", 0)
        _set(self, "_leaves", None)
        _set(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Node is immutable")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def leaves(self) -> tuple[str, ...]:
        if self._leaves is None:
            if self.children:
                out: tuple[str, ...] = ()
                for c in self.children:
                    out += c.leaves
            else:
                out = (self.symbol,)
            object.__setattr__(self, "_leaves", out)
        return self._leaves

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Node):
            return NotImplemented
        return self.symbol == other.symbol and self.children == other.children

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.symbol, self.children)))
        return self._hash

    def __repr__(self):
        if not self.children:
            return f"Node({self.symbol!r})"
        return f"Node({self.symbol!r}, {list(self.children)!r})"


@dataclass(frozen=True)
class Program:
    """A complete AST; immutable, compared structurally."""

    root: Node
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    @property
    def leaves(self) -> tuple[str, ...]:
        return self.root.leaves

    @cached_property
    def internal_paths(self) -> tuple[tuple[int, ...], ...]:
        """Child-index paths to every internal node, pre-order, root first."""
        paths: list[tuple[int, ...]] = []

        def walk(node: Node, path: tuple[int, ...]) -> None:
            if node.children:
                paths.append(path)
                for i, child in enumerate(node.children):
                    walk(child, path + (i,))

        walk(self.root, ())
        return tuple(paths)

    @property
    def size(self) -> int:
        return self.root.size

    @property
    def height(self) -> int:
        return self.root.height

    def __str__(self) -> str:
        return render(self)


def iter_nodes(node: Node) -> Iterator[Node]:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n.children)


def subtree(program: Program, path: tuple[int, ...]) -> Node:
    node = program.root
    for i in path:
        node = node.children[i]
    return node


def _replace(node: Node, path: tuple[int, ...], new: Node) -> Node:
    if not path:
        return new
    i = path[0]
    children = list(node.children)
    children[i] = _replace(children[i], path[1:], new)
    return Node(node.symbol, tuple(children))


def expand(g: Grammar, symbol: str, max_height: int, rng: random.Random) -> Node:
    """Derive a complete subtree from ``symbol`` whose height is at most ``max_height``.

    At every non-terminal a production is drawn uniformly from those that can
    still terminate within the remaining height.
    """
    if symbol in g.terminals:
        return g.leaf(symbol)
    if g.min_height[symbol] > max_height:
        raise InfeasibleDepthError(
            f"{symbol!r} needs height {g.min_height[symbol]}, cap allows {max_height}"
        )
    eligible = g.eligible(symbol, max_height)
    rhs = eligible[rng.randrange(len(eligible))]
    return Node(symbol, tuple([expand(g, s, max_height - 1, rng) for s in rhs]))


def sample_program(g: Grammar, depth_cap: int = DEFAULT_DEPTH_CAP, rng: random.Random | None = None) -> Program:
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    rng = rng if rng is not None else random.Random()
    return Program(expand(g, g.start, depth_cap, rng))


def mutate_traced(
    p: Program,
    g: Grammar,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    rng: random.Random | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> tuple[Program, tuple[int, ...]]:
    """Mutate ``p`` and also report the path of the regenerated node."""
    rng = rng if rng is not None else random.Random()
    paths = p.internal_paths
    path = paths[rng.randrange(len(paths))]
    old = subtree(p, path)
    # never below the current subtree's height, so over-cap inputs still mutate
    budget = max(depth_cap - len(path), old.height)
    for _ in range(MUTATION_RETRIES):
        new = expand(g, old.symbol, budget, rng)
        if p.size - old.size + new.size <= node_cap:
            return Program(_replace(p.root, path, new)), path
    return p, path


def mutate(
    p: Program,
    g: Grammar,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    rng: random.Random | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> Program:
    """Regenerate the subtree under one uniformly chosen non-terminal node.

    The input is never modified. If every retry overshoots ``node_cap`` the
    input program is returned as is.
    """
    return mutate_traced(p, g, depth_cap, rng, node_cap)[0]


def render(p: Program) -> str:
    """Space-joined terminal leaves, e.g. ``"if b1 then c1"``."""
    if not isinstance(p, Program):
        raise ProgramError(f"expected a Program, got {type(p).__name__}")
    cached = p._memo.get("text")
    if cached is None:
        cached = " ".join(p.leaves)
        p._memo["text"] = cached
    return cached


def validate(p: Program, g: Grammar, depth_cap: int | None = None, node_cap: int | None = None) -> None:
    """Raise :class:`ProgramError` unless ``p`` is a complete derivation under ``g``."""
    if p.root.symbol != g.start:
        raise ProgramError(f"root is {p.root.symbol!r}, expected {g.start!r}")
    for node in iter_nodes(p.root):
        if node.children:
            if node.symbol not in g.nonterminals:
                raise ProgramError(f"internal node {node.symbol!r} is not a non-terminal")
            rhs = tuple(c.symbol for c in node.children)
            if rhs not in g.productions[node.symbol]:
                raise ProgramError(f"{node.symbol} -> {' '.join(rhs)} is not a production")
        elif node.symbol not in g.terminals:
            raise ProgramError(f"leaf {node.symbol!r} is not a terminal")
    if depth_cap is not None and p.height > depth_cap:
        raise ProgramError(f"height {p.height} exceeds cap {depth_cap}")
    if node_cap is not None and p.size > node_cap:
        raise ProgramError(f"size {p.size} exceeds cap {node_cap}")


def is_valid(p: Program, g: Grammar, depth_cap: int | None = None, node_cap: int | None = None) -> bool:
    try:
        validate(p, g, depth_cap, node_cap)
    except ProgramError:
        return False
    return True


def parse_program(text: str, g: Grammar) -> Program:
    """Parse rendered text back into an AST.

    Uses memoised top-down matching over the token list; for ambiguous
    grammars the first derivation in production order wins. Left-recursive
    rules are not supported.
    """
    tokens = tuple(text.split())
    memo: dict[tuple[str, int], list[tuple[int, Node]]] = {}
    active: set[tuple[str, int]] = set()

    def parses(symbol: str, pos: int) -> list[tuple[int, Node]]:
        if symbol in g.terminals:
            if pos < len(tokens) and tokens[pos] == symbol:
                return [(pos + 1, Node(symbol))]
            return []
        key = (symbol, pos)
        if key in memo:
            return memo[key]
        if key in active:
            # left recursion without progress
            return []
        active.add(key)
        results: list[tuple[int, Node]] = []
        seen_ends: set[int] = set()
        for rhs in g.productions[symbol]:
            partial: list[tuple[int, tuple[Node, ...]]] = [(pos, ())]
            for sym in rhs:
                nxt = []
                for at, kids in partial:
                    for end, node in parses(sym, at):
                        nxt.append((end, kids + (node,)))
                partial = nxt
                if not partial:
                    break
            for end, kids in partial:
                if end not in seen_ends:
                    seen_ends.add(end)
                    results.append((end, Node(symbol, kids)))
        active.discard(key)
        memo[key] = results
        return results

    for end, node in parses(g.start, 0):
        if end == len(tokens):
            return Program(node)
    raise ProgramError(f"cannot parse {text!r} with this grammar")


def leaf_program(g: Grammar, instructions: Sequence[str]) -> Program:
    """Convenience: parse a sequence of terminal symbols."""
    return parse_program(" ".join(instructions), g)
