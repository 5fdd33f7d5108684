"""Smoke test for the maxlin extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import math

import maxlin


def main():
    s = math.sqrt(0.5)
    m = maxlin.Model([[s, s], [0.0, 1.0]])
    assert m.dim == 2
    assert abs(m.scaling([1, 2]) - 1.5) < 1e-12
    assert abs(m.wm()[1][1] - 1.0 / 3.0) < 1e-12

    t = maxlin.transform_matrix(4)
    assert len(t) == 10 and t[0][:5] == [1, 0, 0, 0, -1]

    a2 = maxlin.recover_a2(2, [1.5, 1.0, 1.0])
    assert all(abs(x - y) < 1e-12 for x, y in zip(a2[0], [0.5, 0.5]))

    model = maxlin.Model.ten_node(0)
    exact = model.learn_exact(algorithm="threshold")
    assert exact["generations"] == [[10], [8, 9], [5, 6, 7], [1, 2, 3, 4]], exact["generations"]

    x = model.simulate(5000, 3)
    assert len(x) == 5000 and len(x[0]) == 10
    est = maxlin.learn(x)
    assert est["k"] == maxlin.default_k(5000) == 71
    assert sorted(est["discovery"]) == list(range(1, 11))
    assert len(est["a_hat"]) == 10

    try:
        maxlin.Model([[1.0, 0.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("non-square matrix accepted")

    print("smoke test ok:", model, "discovery", est["discovery"])


if __name__ == "__main__":
    main()
