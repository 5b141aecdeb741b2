use pyo3::ffi::c_str;
use pyo3::prelude::*;

fn run(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let m = PyModule::new(py, "pygrouplasso").unwrap();
        pygrouplasso::pygrouplasso(&m).unwrap();
        py.import("sys")
            .unwrap()
            .getattr("modules")
            .unwrap()
            .set_item("pygrouplasso", m)
            .unwrap();
        if let Err(e) = py.run(code, None, None) {
            e.display(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn module_round_trip() {
    run(c_str!(
        r#"
import math
import pygrouplasso as gl

p = gl.Problem([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], [2])
assert (p.n, p.p, p.group_sizes) == (2, 2, [2])
assert abs(p.lambda_max() - math.sqrt(2)) < 1e-15

s = gl.solve(p, lam=1.0)
e = 1 - math.sqrt(2) / 2
assert all(abs(b - e) < 1e-12 for b in s.beta), s.beta
assert s.converged and s.sweeps == 2
assert abs(p.objective(s.beta, lam=1.0) - (0.5 + math.sqrt(2) - 1)) < 1e-12

c = gl.certificate(p, s.beta, lam=1.0)
assert c["w_norm"] < 1e-12 and c["bound_objective"] >= 0

z = gl.solve(p, lam=2.0)
assert z.beta == [0.0, 0.0]

sg = gl.solve(p, lambda1=0.5, lambda2=0.5)
fb, iters, ok = gl.fista(p, lambda1=0.5, lambda2=0.5)
assert ok and all(abs(a - b) < 1e-6 for a, b in zip(sg.beta, fb))

r, alpha = gl.solve_secular([1.0, 1.0], [1.0, 1.0], 1.0)
assert abs(r - (math.sqrt(2) - 1)) < 1e-12

prob, truth = gl.simulate(n=30, k=4, group_size=3, a=0.5, b=0.2, seed=1)
assert prob.n == 30 and len(truth) == 12 and sum(truth) == 6
pts = gl.path(prob)
assert len(pts) == 5 and all(l1 > l2 for (l1, _), (l2, _) in zip(pts, pts[1:]))
assert gl.RNG_NAME == "ChaCha8Rng"

for bad in (lambda: gl.Problem([[1.0]], [1.0, 2.0], [1]), lambda: gl.solve(p), lambda: gl.solve(p, lam=-1.0)):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
big = gl.Problem([[1.0 if i == j else 0.0 for j in range(13)] for i in range(13)], [1.0] * 13, [13])
try:
    gl.solve(big, lambda1=0.1, lambda2=0.1)
except RuntimeError as err:
    assert "13" in str(err)
else:
    raise AssertionError("expected RuntimeError")
"#
    ));
}
