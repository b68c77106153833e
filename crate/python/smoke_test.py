"""Smoke test for the boostforest Python bindings.

Build and install first:

    pip install -e crates/python --no-build-isolation
    python python/smoke_test.py
"""

import math
import os
import random
import tempfile

import boostforest


def regression():
    here = os.path.dirname(os.path.abspath(__file__))
    x, y = boostforest.load_csv(os.path.join(here, "..", "data", "concrete.csv"), "reg")
    assert len(x) == 1030 and len(x[0]) == 8
    forest = boostforest.Forest.train(x, y, "reg", n_estimators=10, seed=1)
    pred = forest.predict(x[:50])
    rmse = math.sqrt(sum((p - t) ** 2 for p, t in zip(pred, y[:50])) / 50)
    spread = math.sqrt(sum((t - sum(y) / len(y)) ** 2 for t in y) / len(y))
    assert rmse < 0.5 * spread, (rmse, spread)
    print(f"regression: {forest!r}, train RMSE {rmse:.2f} MPa (label std {spread:.2f})")
    return forest, x


def classification():
    rng = random.Random(0)
    x = [[rng.random(), rng.random()] for _ in range(150)]
    y = [float(min(2, int(3 * (a + b) / 2))) for a, b in x]
    forest = boostforest.Forest.train(x, y, "multiclass", n_estimators=10, seed=2)
    proba = forest.predict_proba(x)
    assert all(abs(sum(p) - 1.0) < 1e-9 for p in proba)
    acc = sum(p == t for p, t in zip(forest.predict(x), y)) / len(y)
    assert acc > 0.9, acc
    print(f"classification: training accuracy {acc:.3f}")

    rows = boostforest.cross_validate(x, y, "multiclass", ["boosttree-ridge", "cart"], seed=3, n_estimators=5)
    for r in rows:
        print(f"  cv {r['algorithm']}: {r['metric']} {r['mean']:.3f} +- {r['std']:.3f} (rank {r['rank']})")
    assert len(rows) == 2


def round_trip(forest, x):
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.bf")
        forest.save(path)
        loaded = boostforest.Forest.load(path)
        assert loaded.predict(x[:20]) == forest.predict(x[:20])
        with open(path, "r+b") as f:
            f.seek(-10, os.SEEK_END)
            b = f.read(1)
            f.seek(-10, os.SEEK_END)
            f.write(bytes([b[0] ^ 1]))
        try:
            boostforest.Forest.load(path)
        except ValueError as e:
            print(f"corrupted model rejected: {e}")
        else:
            raise AssertionError("corrupted model was accepted")


if __name__ == "__main__":
    f, x = regression()
    classification()
    round_trip(f, x)
    print("smoke test passed")
