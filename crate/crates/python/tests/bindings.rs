use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::ffi::CString;
use std::sync::Once;

static INIT: Once = Once::new();

/// Runs `code` with the module importable as `qpress`.
fn run(code: &str) {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(qpress_module);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed: {e}");
        }
    });
}

use qpress_py::qpress_module;

#[test]
fn image_round_trips_through_pgm() {
    run(r#"
import qpress
img = qpress.Image(3, 2, 16, [0, 1, 2, 65535, 4, 5])
back = qpress.Image.from_pgm(img.to_pgm())
assert back == img
assert (back.width, back.height, back.bit_depth) == (3, 2, 16)
assert back.samples() == [0, 1, 2, 65535, 4, 5]
try:
    qpress.Image(2, 2, 8, [1, 2, 3])
    raise AssertionError("expected a sample-count error")
except qpress.QpressError:
    pass
"#);
}

#[test]
fn measure_matches_closed_forms() {
    run(r#"
import qpress
a = qpress.Image.filled(32, 32, 8, 0)
b = qpress.Image.filled(32, 32, 8, 1)
assert abs(qpress.measure(a, b) - 48.130803608679106) < 1e-9
t = qpress.textured(64, 64, 8, 3)
for m in qpress.metrics():
    v = qpress.measure(t, t, m)
    assert v == (100.0 if m in ("psnr", "wsnr", "psnr_hvs", "psnr_hvs_m") else 1.0), (m, v)
"#);
}

#[test]
fn search_and_codec_agree() {
    run(r#"
import qpress
img = qpress.textured(96, 96, 8, 5)
r = qpress.compress(img, 37.0)
assert r.status == "converged"
assert abs(r.achieved - 37.0) <= 0.1
codec = qpress.Codec("dct")
again = codec.compress(img, r.final_param)
assert again.to_bytes() == r.blob.to_bytes()
assert codec.decompress(again) == r.decoded
assert abs(qpress.measure(img, r.decoded) - r.achieved) == 0.0
assert len(r.history) == r.iterations
assert "iterations=" in r.summary_line()
lo, hi = qpress.estimate(img, codec="stub:60:-1:1:50")
assert (lo, hi) == (59.0, 10.0)
try:
    qpress.compress(img, 5.0, codec="stub:60:-1:1:50")
    raise AssertionError("expected InfeasibleError")
except qpress.InfeasibleError as e:
    assert "[10, 59]" in str(e)
"#);
}

#[test]
fn cube_search_reports_every_band() {
    run(r#"
import json, qpress
bands = qpress.spectral_cube(3, 48, 48, 2)
out = qpress.compress_cube(bands, 40.0, param_min=0.05, param_max=64.0, homomorphic=True)
assert len(out.bands) == 3
assert all(b.status == "converged" for b in out.bands)
for band, original in zip(out.bands, bands):
    assert qpress.measure(original, band.decoded) == band.achieved
manifest = json.loads(out.manifest_json())
assert manifest["complete"] and manifest["aggregate_cr"] == out.aggregate_cr
assert out.total_iterations == sum(b.iterations for b in out.bands)
"#);
}
