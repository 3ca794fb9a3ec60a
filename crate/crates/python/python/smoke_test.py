"""Smoke test for the xsum extension module.

Build and install first, e.g. `maturin develop` or
`pip install --no-build-isolation .` from crates/python.
"""

import math
import os
import subprocess
import sys
import tempfile

import xsum


def main():
    gallery, profile = xsum.generate_synthetic(n_images=60, n_clusters=10, aligned_topics=4, seed=7)
    assert len(gallery) == 60
    assert profile.segment_id == "synthetic"

    for method in xsum.METHODS:
        summary = xsum.summarize(method, gallery, profile, k=6)
        assert summary.method == method
        assert len(summary) == 6, (method, summary)
        m = summary.metrics
        assert 0.0 <= m.div <= 1.0
        if method in ("topic", "cross"):
            assert all(t is not None for t in summary.topic_ids)
        print(f"{method:8s} div={m.div:.3f} repr={m.repr:.3f} cov={m.cov:.3f} rcov={m.rcov:.3f}")

    # selecting everything reproduces the gallery exactly
    full = xsum.evaluate(gallery, profile, list(range(len(gallery))))
    assert (full.div, full.repr, full.cov, full.rcov) == (1.0, 1.0, 1.0, 1.0)

    assert xsum.detect_topics({"a": 0.5, "b": 0.51}) == ["b"]
    assert math.isclose(xsum.cosine_similarity([1.0, 0.0], [1.0, 1.0]), math.sqrt(0.5))
    assert xsum.tempered_sigmoid(0.0) == 0.5

    model = xsum.kmedoids([[0.0, 0.1, 1.0], [0.1, 0.0, 1.0], [1.0, 1.0, 0.0]], k=2)
    assert model.medoids[1] == 2 and model.assignment[:2] == [0, 0]

    g = xsum.Gallery("tiny", ["a", "b", "c"], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                     [{"pool": 0.9}, {"pool": 0.2}, {}])
    p = xsum.SegmentProfile("Beach", ["pool"], [("swim", [1.0, 0.2])])
    s = xsum.summarize("cross", g, p, k=2)
    assert s.image_ids == ["a"] and s.short_summary, s

    try:
        xsum.summarize("pam", g, p)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")
    try:
        xsum.Gallery("bad", ["x"], [[0.0, 0.0]])
    except xsum.XsumError:
        pass
    else:
        raise AssertionError("zero vector accepted")

    # workspace written by the CLI, when the binary is around
    exe = os.environ.get("XSUM_BIN")
    if exe:
        with tempfile.TemporaryDirectory() as tmp:
            subprocess.run([exe, "gen-synth", "--seed", "2", "--out", tmp], check=True, capture_output=True)
            ws = xsum.load_workspace(os.path.join(tmp, "manifest.json"))
            gid = ws.gallery_ids[0]
            s = xsum.summarize("clustwp", ws.gallery(gid), ws.profile("synthetic"))
            assert len(s) == 9 and ws.split(gid) == "synthetic"
            print("workspace", gid, s.image_ids)

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
