//! Thin wrappers over the double-exponential rule from the `quadrature` crate.

use quadrature::double_exponential;

/// Integrates `f` over `[a, b]` by splitting at `breaks` (sorted, inside `(a, b)`)
/// and applying the double-exponential rule on each panel.
pub fn integrate_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> f64 {
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    let per = abs_tol / pts.len() as f64;
    pts.windows(2)
        .map(|w| double_exponential::integrate(&f, w[0], w[1], per).integral)
        .sum()
}

/// Geometric breakpoints `1, 2, 4, ...` strictly below `b`, for integrands with slow tails.
pub fn geometric_breaks(b: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = 1.0;
    while x < b {
        out.push(x);
        x *= 2.0;
    }
    out
}

/// Composite midpoint rule with `nodes` points.
pub fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    let h = (b - a) / nodes as f64;
    (0..nodes).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Composite Simpson rule with `nodes` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    let m = nodes + nodes % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
