"""From attention maps to per-cell training targets.

Grid supervision needs to know which cell "is" each label token.  The
chain runs: attention argmax per token -> windowed candidate costs ->
minimum-cost assignment -> a target grid plus neighbor targets, and the
two losses scored against it.
"""

import numpy as np

from hmegraph import (
    build_cost,
    default_vocab,
    estimate_positions,
    hungarian,
    loss_pgd,
    loss_total,
    loss_vat,
    make_sample,
    make_targets,
    parse_latex,
    teacher_matrices,
)


def main():
    vocab = default_vocab()
    label = "\\frac { x } { y } = z"
    grid = (8, 16)
    sample = make_sample(label, vocab, grid, seed=4)
    seq = parse_latex(label, vocab)

    positions = estimate_positions(sample.attn, seq, vocab)
    pred_steps = [p for p, cid in enumerate(seq) if vocab.is_predictable(cid)]
    print("argmax cell per predictable token:")
    for step, cell in zip(pred_steps, positions):
        print(f"  step {step} ({vocab.symbol_of(seq[step])}) -> {cell}")

    cost = build_cost(sample.probs, positions, seq, vocab, km=5)
    pairs = hungarian(cost)
    print(f"\ncost matrix {cost.shape}, assignment {pairs}")

    target = make_targets(pairs, seq, vocab, *grid)
    occupied = np.argwhere(target.grid != vocab.none_id)
    print(f"target grid: {len(occupied)} occupied cells "
          f"for {len(positions)} predictable tokens")
    print("end tokens inherit their owner's cell:")
    for pos, cell in enumerate(target.cells):
        print(f"  step {pos} ({vocab.symbol_of(seq[pos])}) -> {tuple(cell)}")

    vat = loss_vat(sample.probs, target.grid)
    self_t, left_t, right_t = teacher_matrices(seq, vocab)
    pgd = loss_pgd(self_t, left_t, right_t,
                   (target.self_targets, target.left_targets,
                    target.right_targets))
    print(f"\ncell loss on clean one-hot scores: {vat}")
    print(f"node loss on teacher matrices:     {pgd.total}")
    print(f"combined at the default mix:       {loss_total(vat, pgd)}")


if __name__ == "__main__":
    main()
