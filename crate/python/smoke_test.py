"""Smoke test for the `qb` extension module.

Build first with `cargo build --release -p qb-py`, then run
`python3 python/smoke_test.py` from the repository root.
"""

import glob
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_qb():
    candidates = []
    for profile in ("release", "debug"):
        for name in ("libqb.so", "libqb.dylib"):
            candidates += glob.glob(os.path.join(ROOT, "target", profile, name))
    if not candidates:
        sys.exit("libqb not found; run `cargo build --release -p qb-py` first")
    staging = tempfile.mkdtemp()
    shutil.copy(candidates[0], os.path.join(staging, "qb.so"))
    sys.path.insert(0, staging)
    import qb

    return qb


def main():
    qb = load_qb()

    sym3 = qb.Group("sym", 3)
    assert sym3.order() == 6 and len(sym3.elements()) == 6
    assert sym3.apply([2, 0, 1], ["a", "b", "c"]) == ["c", "a", "b"]

    mapping, cost = qb.solve_lap([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assert sorted(mapping) == [0, 1, 2] and math.isclose(cost, 5.0)

    p = [[0.0], [1.0], [5.0]]
    q = [[5.0], [0.0], [1.0]]
    assert qb.quotient_distance(p, q, sym3) == 0.0
    assert qb.quotient_distance(p, q, qb.Group("none", 3)) > 1.0

    a = [[2.0, 0.0], [0.0, 1.0]]
    b = [[1.0, 0.3], [0.3, 0.5]]
    assert qb.bures_distance(a, a) == 0.0
    back = qb.bures_exp(a, qb.bures_log(a, b))
    assert all(math.isclose(x, y, abs_tol=1e-9) for r, s in zip(back, b) for x, y in zip(r, s))

    draws, log_density = qb.gmm5_samples(400, 1)
    assert len(draws) == len(log_density) == 400
    sym5 = qb.Group("sym", 5)
    report = qb.sgd_gaussian_mixture(draws, sym5, 1000, seed=2, eval_samples=32)
    err = qb.mixture_distance(report.estimate, qb.gmm5_truth(), sym5)
    assert err < 0.1, err
    assert report.trailing_objective <= report.objective_trace[0][1]

    relabeled, mean = qb.pivot_relabel(draws, qb.boundary_index(draws), sym5)
    assert len(relabeled) == 400 and len(mean) == 5

    x = qb.default_template()
    obs = qb.mra_generate(x, 1e-6, 30, 3)
    chain = qb.mra_gibbs(obs, 1e-6, 60, 4)
    rec = qb.mra_reconstruct(chain, seed=5)
    assert qb.relative_error(rec, x) < 1e-3

    try:
        qb.Group("dihedral", 3)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown group accepted")

    print("qb smoke test passed: gmm5 error %.4f, %s" % (err, report))


if __name__ == "__main__":
    main()
