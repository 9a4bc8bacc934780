"""End-to-end walkthrough: from ranker outputs to rank prediction sets.

Synthesizes a ranking problem (200 calibration items with known relative
ranks, 100 new items), wraps a noisy toy ranker with the conformal pipeline,
and prints prediction sets for a few test items together with the derived
targets: rank among the test items only, and top-k membership candidates.
"""

import numpy as np

from rankcp import (
    calibrate,
    fit_quantile_envelope,
    predict_sets,
    proxy_scores,
    ranks_within,
    select_k,
    simulate_sorted_ranks,
    synthesize_problem,
    test_only_set,
    topk_candidates,
)

N, M = 200, 100
ALPHA, DELTA = 0.1, 0.02
SEED = 11


def main():
    problem = synthesize_problem(
        "sigmoid", N, M, noise_sd=0.07, mode="VA", seed=SEED
    )
    print(f"problem: n={N} calibration items, m={M} test items, VA outputs")

    sims = simulate_sorted_ranks(N, M, 50_000, seed=SEED + 1)
    env = fit_quantile_envelope(sims, DELTA)
    print(f"quantile envelope at delta={DELTA}: gamma_hat={env.param:.5f}, "
          f"slack={env.mc_meta.slack:.4f}")

    k = select_k(ALPHA, DELTA, N)
    thr = calibrate(proxy_scores(problem, env), k, alpha=ALPHA)
    print(f"calibration index k={k} of {N}, threshold S_(k)={thr.value:.4f}")

    sets = predict_sets(problem, thr)
    pooled = ranks_within(problem.truth)
    true_test = pooled[N:]

    print("\nfirst eight test items:")
    print(f"{'id':>6} {'true rank':>9} {'set':>12} {'test-only set':>14} {'hit':>4}")
    for j in range(8):
        s = sets[j]
        t = test_only_set(s, env)
        hit = "yes" if s.contains(int(true_test[j])) else "MISS"
        print(f"{s.item:>6} {true_test[j]:>9} [{s.lo:>4}, {s.hi:>4}] "
              f"   [{t.lo:>3}, {t.hi:>3}] {hit:>6}")

    covered = np.mean([s.contains(int(r)) for s, r in zip(sets, true_test)])
    width = np.mean([s.size for s in sets])
    print(f"\nempirical coverage on this draw: {covered:.3f} "
          f"(target >= {1 - ALPHA}), mean set size {width:.1f} of {N + M}")

    k_top = 15
    candidates = topk_candidates(sets, k_top)
    truly_top = {sets[j].item for j in range(M) if true_test[j] <= k_top}
    print(f"\ntop-{k_top} candidates: {len(candidates)} items, "
          f"containing {len(candidates & truly_top)} of the {len(truly_top)} "
          "test items truly in the top")


if __name__ == "__main__":
    main()
