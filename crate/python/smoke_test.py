"""Smoke test for the qpress extension module.

Build first:  pip install -e crates/python --no-build-isolation
Run:          python python/smoke_test.py
"""

import json
import sys

import qpress


def main() -> int:
    img = qpress.textured(128, 128, bit_depth=8, seed=1)
    assert qpress.Image.from_pgm(img.to_pgm()) == img

    lo, hi = qpress.estimate(img)
    print(f"psnr over the default range: {lo:.4f} .. {hi:.4f}")

    result = qpress.compress(img, 38.0)
    print(result.summary_line())
    assert result.status == "converged"
    assert abs(result.achieved - 38.0) <= 0.1
    assert qpress.measure(img, result.decoded) == result.achieved

    blob = qpress.Blob.from_bytes(result.blob.to_bytes())
    assert qpress.Codec(blob.codec_id).decompress(blob) == result.decoded
    report = json.loads(result.report_json())
    assert report["status"] == "converged"

    try:
        qpress.compress(img, 5.0, codec="stub:60:-1:1:50")
    except qpress.InfeasibleError as e:
        print(f"infeasible as expected: {e}")
    else:
        raise AssertionError("stub target 5 should be infeasible")

    cube = qpress.spectral_cube(4, 64, 64, seed=3)
    out = qpress.compress_cube(cube, 40.0, param_min=0.5, param_max=128.0)
    print(f"cube: {len(out.bands)} bands, mean iterations {out.mean_iterations:.2f}, CR {out.aggregate_cr:.2f}")
    assert all(b.status == "converged" for b in out.bands)

    for m in qpress.metrics():
        print(f"{m} {qpress.measure(img, result.decoded, m):.4f}")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
