"""Smoke test for the pystochmhd extension module.

Build and install with
    pip install -e crates/stochmhd-py --no-build-isolation
then run
    python3 python/smoke_test.py
"""

import json
import math
import tempfile

import pystochmhd as m


def main():
    assert m.r_lambda(8.0, 0.0) == 0.0
    assert m.r_lambda(1.0, 3.0) == 0.0
    r = [m.r_lambda(lam, 10.0) for lam in (8.0, 16.0, 32.0)]
    assert r[0] < r[1] < r[2]

    v = m.ou_variance(1.0, 1.0, 50.0)
    assert math.isclose(v, 0.5, rel_tol=1e-12)

    reports = m.identity_suite(n=32, seeds=[1, 2])
    assert reports and all(ok for name, _, _, ok in reports if not name.endswith("_neg"))

    consts = m.inequality_constants(n=16, samples=10, seed=3)
    assert len(consts) == 10 and all(mx > 0 for _, mx, _ in consts)

    with tempfile.TemporaryDirectory() as out:
        cfg = {"kind": "noise-stats", "n": 16, "samples": 500}
        assert m.run_config(json.dumps(cfg), out)
        manifest = json.load(open(f"{out}/manifest.json"))
        assert {f["path"] for f in manifest["files"]} >= {"ou_stats.json", "config.json"}

    try:
        m.run_config(json.dumps({"kind": "simulate", "n": 16, "exponent": 5}), "/tmp")
    except ValueError as e:
        assert "exponent" in str(e)
    else:
        raise AssertionError("invalid config accepted")

    print(f"pystochmhd {m.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
