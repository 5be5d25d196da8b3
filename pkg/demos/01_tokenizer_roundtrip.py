"""Tokens, canonical sequences, and the round trip back to LaTeX.

The parser rewrites brace-structured LaTeX into a flat canonical sequence:
group-opening symbols keep their class, every closed group becomes a single
end token, and layout braces disappear.  The emitter inverts that exactly.
"""

from hmegraph import build_vocab, default_vocab, emit_latex, parse_latex


def show(latex, vocab):
    seq = parse_latex(latex, vocab)
    symbols = [vocab.symbol_of(cid) for cid in seq]
    back = emit_latex(seq, vocab)
    print(f"  {latex}")
    print(f"    ids      {seq}")
    print(f"    symbols  {symbols}")
    print(f"    emitted  {back}")
    assert parse_latex(back, vocab) == seq
    return seq


def main():
    vocab = default_vocab()
    print(f"built-in vocabulary: {len(vocab)} classes, "
          f"{vocab.num_predictable} predictable")
    print(f"special ids: none={vocab.none_id} end={vocab.end_id} "
          f"sos={vocab.sos_id} eos={vocab.eos_id}")

    print("\nflat expression:")
    show("x + 1 = y", vocab)

    print("\nscripts collapse their braces into end tokens:")
    show("x ^ { 2 } + a _ { i k }", vocab)

    print("\na fraction owns two groups, so it is followed by two ends:")
    show("\\frac { x + 1 } { y }", vocab)

    print("\nan indexed root emits its index group first:")
    show("\\sqrt [ 3 ] { x + 1 }", vocab)

    print("\nvocabularies can also be grown from a label file:")
    small = build_vocab(["p + q", "p ^ { 2 }"])
    print(f"  {small.symbols}")
    show("q ^ { p }", small)


if __name__ == "__main__":
    main()
