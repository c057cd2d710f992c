//! Piecewise-linear approximation of the per-link queuing delay `z/(1-z)`
//! as a function of utilization `z`.

/// `(slope, intercept)` of each affine piece: `g_k(z) = slope·z - intercept`.
///
/// The first piece covers `0 ≤ z < 1/3`. Adjacent pieces meet at the
/// breakpoints 1/3, 2/3, 4/5, 9/10 and 19/20.
pub const DELAY_PIECES: [(f64, f64); 6] = [
    (1.5, 0.0),
    (4.5, 1.0),
    (15.0, 8.0),
    (50.0, 36.0),
    (200.0, 171.0),
    (4000.0, 3781.0),
];

/// Utilizations at which consecutive pieces meet.
pub const DELAY_BREAKPOINTS: [f64; 5] = [1.0 / 3.0, 2.0 / 3.0, 0.8, 0.9, 0.95];

/// Convex max-of-affine delay cost `g(z)`.
pub fn eval_piecewise_delay(z: f64) -> f64 {
    DELAY_PIECES
        .iter()
        .map(|&(a, b)| a * z - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact M/M/1-style delay `z/(1-z)`; infinite at and beyond saturation.
pub fn queuing_delay(z: f64) -> f64 {
    if z >= 1.0 {
        f64::INFINITY
    } else {
        z / (1.0 - z)
    }
}
