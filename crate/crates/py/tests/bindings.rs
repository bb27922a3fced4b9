use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs `code` with the module bound to `vcd_py` and returns its `result` variable.
fn run<T: for<'a, 'py> FromPyObject<'a, 'py>>(code: &str) -> PyResult<T> {
    Python::attach(|py| {
        let module = PyModule::new(py, "vcd_py")?;
        vcd_py::vcd_py(&module)?;
        let scope = PyDict::new(py);
        scope.set_item("vcd_py", module)?;
        py.run(&CString::new(code).unwrap(), Some(&scope), None)?;
        scope.get_item("result")?.expect("result set").extract::<T>().map_err(Into::into)
    })
}

#[test]
fn scalar_functions() {
    let w: f64 = run("result = vcd_py.temporal_weight(2, 51)").unwrap();
    assert_eq!(w, 50.0 / 51.0);
    let d: f64 = run("result = vcd_py.exact_w1d([0.0, 1.0], [2.0, 3.0], order=1)").unwrap();
    assert_eq!(d, 2.0);
    let d: f64 = run("result = vcd_py.sliced_wd([[0.0], [1.0]], [[2.0], [3.0]])").unwrap();
    assert_eq!(d, 2.0);
}

#[test]
fn frames_and_metrics() {
    let (amp, phase): (f64, f64) = run(
        "cond = vcd_py.Frame.textured(16, 16, 3, seed=1)\n\
         cfg = vcd_py.MetricConfig('projections = 32')\n\
         a, p, w, t = vcd_py.vcd_frame(cond, cond.circshift(2, 1), 2, 4, cfg)\n\
         assert w == 0.75 and abs(t - w * (a + p)) < 1e-12\n\
         assert vcd_py.fdl(cond, cond) == 0.0\n\
         result = (a, p)",
    )
    .unwrap();
    assert!(amp <= 1e-9 && phase > 0.01);
}

#[test]
fn buffer_and_video_reports_agree() {
    let (a, b): (String, String) = run(
        "frames = [vcd_py.Frame.textured(5, 4, 3, seed=s) for s in range(3)]\n\
         flat = [v for f in frames for v in f.data()]\n\
         result = (vcd_py.score_buffer(flat, (3, 5, 4, 3), 'seed = 1'),\n\
                   vcd_py.score_video(frames, vcd_py.MetricConfig('seed = 1')))",
    )
    .unwrap();
    assert_eq!(a, b);
    let err: String = run("result = vcd_py.score_buffer([0.5] * 7, (2, 2, 2, 1))").unwrap();
    let v: serde_json::Value = serde_json::from_str(&err).unwrap();
    assert_eq!(v["kind"], "shape");
}

#[test]
fn errors_raise_vcd_error() {
    let msg: String = run(
        "try:\n    vcd_py.temporal_weight(0, 3)\n    result = 'no error'\n\
         except vcd_py.VcdError as e:\n    result = str(e)",
    )
    .unwrap();
    assert!(msg.starts_with("[domain]"), "{msg}");
    let caught: bool = run(
        "try:\n    vcd_py.MetricConfig('alpha = -1')\n    result = False\n\
         except ValueError:\n    result = True",
    )
    .unwrap();
    assert!(caught);
}
