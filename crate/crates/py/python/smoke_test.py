"""Smoke test for the compiled extension.

Build it with `maturin develop` inside crates/py, or copy
target/release/libvcd_py.so to vcd_py.so next to this script, then run
`python smoke_test.py`.
"""
import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import vcd_py  # noqa: E402


def main():
    cond = vcd_py.Frame.textured(16, 16, 3, seed=0)
    frames = [cond] + [cond.circshift(k, 0) for k in range(1, 4)]
    n, (h, w, c) = len(frames), cond.shape
    buffer = [v for f in frames for v in f.data()]

    report = json.loads(vcd_py.score_buffer(buffer, (n, h, w, c), "projections = 16"))
    assert [f["i"] for f in report["frames"]] == [2, 3, 4], report
    assert all(f["amp"] < 1e-9 for f in report["frames"])

    err = json.loads(vcd_py.score_buffer(buffer[:-1], (n, h, w, c), ""))
    assert err["kind"] == "shape", err

    cfg = vcd_py.MetricConfig("projections = 16")
    assert vcd_py.fdl(cond, cond, cfg) == 0.0
    assert math.isclose(vcd_py.temporal_weight(2, 4), 0.75)
    try:
        vcd_py.temporal_weight(0, 4)
    except vcd_py.VcdError:
        pass
    else:
        raise AssertionError("expected VcdError")

    print("ok: mean", report["mean"])


if __name__ == "__main__":
    main()
