"""Exact and cell-based alpha-mixing coefficients for a two-state chain.

For finite laws the supremum over events is taken by enumerating subsets of
the smaller side.  Smoothed pairs are discretized on quantile cells whose
masses come from the normal CDF.

    python3 demos/mixing_coefficients.py
"""

from entclt import ProcessSpec, alpha_exact, alpha_smoothed_pair
from entclt.processes import exact_block_pair, markov_joint_law

spec = ProcessSpec("markov_fn", flip_prob=0.25)

print("lag   alpha_exact    2^-t/4")
for t in range(1, 7):
    print(f"{t:3d}  {alpha_exact(markov_joint_law(spec, t)):.12f}  {0.5 ** t / 4:.12f}")

print("\nblocks of 8 steps, smoothed with tau = 0.5")
print("gap   alpha(blocks)  alpha(smoothed)  delta_4/4   cell error")
for gap in (0, 2, 4, 8, 16):
    P, law = exact_block_pair(spec, 8, 8, gap, 0.5)
    rep = alpha_smoothed_pair(P)
    print(f"{gap:3d}  {alpha_exact(law):13.6f}  {rep.alpha:15.6f}  {rep.delta4 / 4:9.6f}"
          f"  {rep.cell_error_bound:.4f}")
