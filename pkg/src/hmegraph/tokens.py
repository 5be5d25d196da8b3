"""LaTeX token grammar for handwritten math expressions.

A recognizer that predicts symbols on a spatial grid can only see tokens that
have visible ink.  Grouping braces have none, so the grammar used throughout
this package replaces them with a single shared "imaginary end" token: every
opening brace is absorbed and every group close becomes one END token.  A
structural symbol (``\\frac``, ``^``, ...) therefore appears in a canonical
sequence followed, after its argument contents, by exactly one END per
argument group.

Canonical form examples::

    x ^ { y z } + 1      ->  [x, ^, y, z, END, +, 1]
    \\frac { x } { y }    ->  [\\frac, x, END, y, END]
    \\sqrt [ 3 ] { x }    ->  [\\sqrt, 3, END, x, END]   (index group first)

Class ids are dense: visible and structural symbols occupy 0..K-1 in
lexicographic order, the blank/none class is K, then END, <sos> and <eos>.
Only ids below K are predictable by a grid classifier; the rest exist for
sequence targets and graph decoding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    DanglingGroup,
    EmptyCorpus,
    IllNested,
    UnbalancedBraces,
    UnknownControlSequence,
    VocabMiss,
)

# Token roles as stored in vocabulary files.
ROLE_VISIBLE = "visible"
ROLE_HSE = "hse"        # hierarchy-structural: owns brace groups (\frac, \sqrt, ...)
ROLE_IRS = "irs"        # implicit-relation: scripts and limits (^, _, \limits)
ROLE_END = "end"        # shared imaginary group-end token
ROLE_NONE = "none"      # blank grid cell
ROLE_SOS = "sos"
ROLE_EOS = "eos"

_PREDICTABLE_ROLES = (ROLE_VISIBLE, ROLE_HSE, ROLE_IRS)

# Implicit-relation symbols: a following group, no ink of its own structure.
IRS_SYMBOLS = frozenset({"^", "_", "\\limits"})

# Hierarchy symbols and how many argument groups each owns.  \sqrt is listed
# with its index-less arity; the parser upgrades an instance to two groups
# when it is written with a [...] index.
HSE_GROUP_COUNTS = {
    "\\frac": 2,
    "\\sqrt": 1,
    "\\dot": 1,
    "\\ddot": 1,
    "\\boxed": 1,
    "\\widehat": 1,
    "\\overline": 1,
    "\\xlongequal": 1,
    "\\textcircled": 1,
    "\\xrightarrow": 1,
    "\\overrightarrow": 1,
}

NONE_SYMBOL = "<none>"
END_SYMBOL = "}"
SOS_SYMBOL = "<sos>"
EOS_SYMBOL = "<eos>"

_CONTROL_RE = re.compile(r"\\[a-zA-Z]+")


@dataclass
class TokenVocab:
    """Immutable symbol table with dense class ids.

    ``symbols[i]`` is the surface form of class id ``i`` and ``roles[i]`` its
    role string.  Ids 0..K-1 are the predictable classes, K is the none
    class, and END / <sos> / <eos> follow in that order.
    """

    symbols: list[str]
    roles: list[str]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.symbols)}
        self._validate()

    def _validate(self) -> None:
        if len(self.symbols) != len(self.roles):
            raise VocabMiss("symbol and role counts differ")
        if len(set(self.symbols)) != len(self.symbols):
            raise VocabMiss("duplicate symbol in vocabulary")
        counts = {r: self.roles.count(r) for r in (ROLE_NONE, ROLE_END, ROLE_SOS, ROLE_EOS)}
        for role, n in counts.items():
            if n != 1:
                raise VocabMiss(f"vocabulary needs exactly one {role} entry, found {n}")
        k = sum(1 for r in self.roles if r in _PREDICTABLE_ROLES)
        expected = [ROLE_NONE, ROLE_END, ROLE_SOS, ROLE_EOS]
        if self.roles[k:] != expected:
            raise VocabMiss(
                "predictable classes must form a dense prefix followed by "
                f"{expected}, got tail {self.roles[k:]}"
            )

    # --- id arithmetic ---------------------------------------------------

    @property
    def num_predictable(self) -> int:
        """K: number of classes a grid cell can take besides none."""
        return len(self.symbols) - 4

    @property
    def none_id(self) -> int:
        return self.num_predictable

    @property
    def end_id(self) -> int:
        return self.num_predictable + 1

    @property
    def sos_id(self) -> int:
        return self.num_predictable + 2

    @property
    def eos_id(self) -> int:
        return self.num_predictable + 3

    @property
    def grid_classes(self) -> int:
        """Channel count of a cell-classification grid: K predictables + none."""
        return self.num_predictable + 1

    @property
    def correction_classes(self) -> int:
        """Width of a per-node correction row: predictables + none + END."""
        return self.num_predictable + 2

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def id_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise VocabMiss(f"symbol {symbol!r} not in vocabulary") from None

    def symbol_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.symbols):
            raise VocabMiss(f"class id {class_id} out of range 0..{len(self.symbols) - 1}")
        return self.symbols[class_id]

    def role_of(self, class_id: int) -> str:
        self.symbol_of(class_id)
        return self.roles[class_id]

    def is_structural(self, class_id: int) -> bool:
        """True when the class opens argument groups (HSE or IRS role)."""
        return self.role_of(class_id) in (ROLE_HSE, ROLE_IRS)

    def is_predictable(self, class_id: int) -> bool:
        return 0 <= class_id < self.num_predictable

    def group_count(self, class_id: int) -> int:
        """Index-less argument-group count of a structural class."""
        sym = self.symbol_of(class_id)
        if sym in IRS_SYMBOLS:
            return 1
        if sym in HSE_GROUP_COUNTS:
            return HSE_GROUP_COUNTS[sym]
        raise VocabMiss(f"{sym!r} is not a structural symbol")

    # --- persistence ------------------------------------------------------

    def save(self, path) -> None:
        """Write one ``symbol<TAB>role`` line per class, ids by line order."""
        with open(path, "w", encoding="utf-8") as fh:
            for sym, role in zip(self.symbols, self.roles):
                fh.write(f"{sym}\t{role}\n")

    @classmethod
    def load(cls, path) -> "TokenVocab":
        symbols, roles = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise VocabMiss(f"line {lineno}: expected 'symbol<TAB>role'")
                symbols.append(parts[0])
                roles.append(parts[1])
        return cls(symbols, roles)


def build_vocab(corpus: list[str]) -> TokenVocab:
    """Build a vocabulary by scanning label strings.

    Braces are dropped ('{' is absorbed, '}' becomes the shared END class),
    \\sqrt index brackets are dropped, and every other token becomes a
    predictable class.  Roles come from the fixed structural symbol tables;
    anything unlisted is a plain visible symbol.

    Args:
        corpus: non-empty list of LaTeX label strings.

    Raises:
        EmptyCorpus: on an empty list.
        UnbalancedBraces: when a label's braces do not balance.
        UnknownControlSequence: when a backslash is not followed by letters.
    """
    if not corpus:
        raise EmptyCorpus("vocabulary build needs at least one label")
    seen: set[str] = set()
    for label in corpus:
        toks = _tokenize(label, vocab=None)
        depth = 0
        sqrt_index_depth = 0
        prev = None
        for pos, t in enumerate(toks):
            if t == "{":
                depth += 1
            elif t == "}":
                depth -= 1
                if depth < 0:
                    raise UnbalancedBraces(label, pos)
            elif t == "[" and prev == "\\sqrt":
                sqrt_index_depth += 1
            elif t == "]" and sqrt_index_depth > 0:
                sqrt_index_depth -= 1
            else:
                seen.add(t)
            prev = t
        if depth != 0:
            raise UnbalancedBraces(label, len(toks))
    ordered = sorted(seen)
    roles = []
    for sym in ordered:
        if sym in IRS_SYMBOLS:
            roles.append(ROLE_IRS)
        elif sym in HSE_GROUP_COUNTS:
            roles.append(ROLE_HSE)
        else:
            roles.append(ROLE_VISIBLE)
    symbols = ordered + [NONE_SYMBOL, END_SYMBOL, SOS_SYMBOL, EOS_SYMBOL]
    roles += [ROLE_NONE, ROLE_END, ROLE_SOS, ROLE_EOS]
    return TokenVocab(symbols, roles)


def _tokenize(s: str, vocab: TokenVocab | None) -> list[str]:
    """Split a LaTeX string into surface tokens.

    Whitespace-separated chunks are kept whole when they are known symbols;
    anything else is scanned greedily: control sequences take a maximal
    letter run, known multi-character symbols take the longest vocabulary
    match, and remaining characters split one by one.
    """
    multi = []
    if vocab is not None:
        multi = sorted((sym for sym in vocab.symbols if len(sym) > 1 and not sym.startswith("\\")),
                       key=len, reverse=True)
    out: list[str] = []
    for chunk in s.split():
        if chunk in ("{", "}", "[", "]"):
            out.append(chunk)
            continue
        if (vocab is not None and chunk in vocab) or chunk in IRS_SYMBOLS or chunk in HSE_GROUP_COUNTS:
            out.append(chunk)
            continue
        i = 0
        while i < len(chunk):
            c = chunk[i]
            if c == "\\":
                m = _CONTROL_RE.match(chunk, i)
                if m is None:
                    raise UnknownControlSequence(f"bad control sequence at {chunk[i:i + 8]!r}")
                out.append(m.group())
                i = m.end()
                continue
            if c in "{}[]":
                out.append(c)
                i += 1
                continue
            for sym in multi:
                if chunk.startswith(sym, i):
                    out.append(sym)
                    i += len(sym)
                    break
            else:
                out.append(c)
                i += 1
    return out


def parse_latex(s: str, vocab: TokenVocab) -> list[int]:
    """Parse a LaTeX string into its canonical class-id sequence.

    Accepts spaced or unspaced input.  Un-braced structural arguments are
    normalized as if braced: ``x ^ 2`` parses like ``x ^ { 2 }``.  A \\sqrt
    written with a bracket index contributes two groups, index first.

    Raises:
        UnbalancedBraces: stray or unclosed braces.
        DanglingGroup: a structural token missing an argument group.
        VocabMiss: a token absent from the vocabulary.
        UnknownControlSequence: malformed backslash token.
    """
    toks = _tokenize(s, vocab)
    out: list[int] = []
    i = _parse_run(toks, 0, out, vocab, closer=None, source=s)
    if i != len(toks):
        raise UnbalancedBraces(s, i)
    return out


def _parse_run(toks, i, out, vocab, closer, source) -> int:
    """Parse units until `closer` (or input end when closer is None)."""
    while i < len(toks):
        t = toks[i]
        if closer is not None and t == closer:
            return i
        if t == "}":
            raise UnbalancedBraces(source, i)
        i = _parse_unit(toks, i, out, vocab, source)
    if closer is not None:
        raise UnbalancedBraces(source, len(toks))
    return i


def _parse_unit(toks, i, out, vocab, source) -> int:
    """Parse one unit: a symbol, or a structural symbol with its groups."""
    t = toks[i]
    if t == "{":
        raise UnbalancedBraces(source, i)
    cid = vocab.id_of(t)
    out.append(cid)
    if not vocab.is_structural(cid):
        return i + 1
    i += 1
    if t == "\\sqrt" and i < len(toks) and toks[i] == "[":
        i = _parse_run(toks, i + 1, out, vocab, closer="]", source=source)
        out.append(vocab.end_id)
        i += 1
        groups_left = 1
    else:
        groups_left = vocab.group_count(cid)
    for _ in range(groups_left):
        if i >= len(toks) or toks[i] in ("}", "]"):
            raise DanglingGroup(f"{t!r} is missing an argument group")
        if toks[i] == "{":
            i = _parse_run(toks, i + 1, out, vocab, closer="}", source=source)
            out.append(vocab.end_id)
            i += 1
        else:
            i = _parse_unit(toks, i, out, vocab, source)
            out.append(vocab.end_id)
    return i


def instance_group_counts(seq: list[int], vocab: TokenVocab) -> dict[int, int]:
    """Resolve the argument-group count of each structural token instance.

    Returns a map from sequence position to group count.  Most symbols have
    a fixed count; a \\sqrt instance is read as index-less (one group) unless
    that reading would leave the rest of the sequence ill-nested, in which
    case it takes two groups, index first.

    Raises:
        IllNested: the sequence closes groups it never opened, leaves groups
            open, or contains tokens that cannot appear in canonical form.
    """
    counts: dict[int, int] = {}
    stack: list[int] = []
    for pos, cid in enumerate(seq):
        role = vocab.role_of(cid)
        if role == ROLE_END:
            if not stack:
                raise IllNested(f"group end at position {pos} closes nothing")
            stack[-1] -= 1
            if stack[-1] == 0:
                stack.pop()
        elif role in (ROLE_HSE, ROLE_IRS):
            g = vocab.group_count(cid)
            if vocab.symbol_of(cid) == "\\sqrt":
                pending = sum(stack)
                if not _closable(seq, pos + 1, pending + 1, vocab):
                    g = 2
            counts[pos] = g
            stack.append(g)
        elif role in (ROLE_NONE, ROLE_SOS, ROLE_EOS):
            raise IllNested(f"{vocab.symbol_of(cid)!r} cannot appear in canonical form")
    if stack:
        raise IllNested("group left open at sequence end")
    return counts


def end_parents(seq: list[int], vocab: TokenVocab) -> list[int | None]:
    """Position of the owning structural token for each END in a sequence.

    Non-END positions map to None.  Both ENDs of a two-group symbol point
    back at the same owner.
    """
    counts = instance_group_counts(seq, vocab)
    parents: list[int | None] = [None] * len(seq)
    stack: list[list[int]] = []  # [owner position, groups remaining]
    for pos, cid in enumerate(seq):
        if vocab.role_of(cid) == ROLE_END:
            frame = stack[-1]
            parents[pos] = frame[0]
            frame[1] -= 1
            if frame[1] == 0:
                stack.pop()
        elif pos in counts:
            stack.append([pos, counts[pos]])
    return parents


def emit_latex(seq: list[int], vocab: TokenVocab) -> str:
    """Render a canonical class-id sequence back to a spaced LaTeX string.

    Structural arguments are always emitted braced.  A \\sqrt instance is
    emitted index-less unless treating it so would leave the rest of the
    sequence ill-nested, in which case its first group becomes a [...] index.

    Raises:
        IllNested: an END with no open group, or groups left open at the end.
        VocabMiss: an id outside the vocabulary.
    """
    counts = instance_group_counts(seq, vocab)
    parts: list[str] = []
    # Stack frames: [groups_remaining, closer_for_current_group].
    stack: list[list] = []
    for pos, cid in enumerate(seq):
        role = vocab.role_of(cid)
        if role == ROLE_END:
            frame = stack[-1]
            parts.append(frame[1])
            frame[0] -= 1
            if frame[0] == 0:
                stack.pop()
            else:
                frame[1] = "}"
                parts.append("{")
            continue
        parts.append(vocab.symbol_of(cid))
        if pos in counts:
            groups = counts[pos]
            if vocab.symbol_of(cid) == "\\sqrt" and groups == 2:
                stack.append([2, "]"])
                parts.append("[")
            else:
                stack.append([groups, "}"])
                parts.append("{")
    return " ".join(parts)


def _closable(seq, start, pending, vocab) -> bool:
    """Whether seq[start:] can close exactly `pending` open groups.

    Future \\sqrt instances may take one or two groups, so the pending-end
    count is tracked as an interval.
    """
    lo = hi = pending
    for cid in seq[start:]:
        role = vocab.role_of(cid)
        if role == ROLE_END:
            if hi == 0:
                return False
            lo = max(lo, 1) - 1
            hi -= 1
        elif role in (ROLE_HSE, ROLE_IRS):
            if vocab.symbol_of(cid) == "\\sqrt":
                lo += 1
                hi += 2
            else:
                g = vocab.group_count(cid)
                lo += g
                hi += g
    return lo == 0


def gt_targets(seq: list[int]) -> tuple[list[int], list[int], list[int]]:
    """Chain supervision targets for a canonical sequence.

    Nodes take graph positions 1..L with a virtual start at 0 and a virtual
    end at L+1.  Each node's self target is its own class, its left neighbor
    is the previous position, and its right neighbor the next.

    Returns:
        (self_targets, left_targets, right_targets), each of length L.
    """
    if not seq:
        raise ValueError("empty token sequence has no targets")
    n = len(seq)
    self_targets = list(seq)
    left_targets = list(range(0, n))
    right_targets = list(range(2, n + 2))
    return self_targets, left_targets, right_targets
