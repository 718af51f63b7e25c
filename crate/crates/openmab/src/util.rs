//! Small shared helpers.

/// Argmax with ties broken by the lowest index. Panics on empty input.
pub(crate) fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fixed-format float for CSV output: 17 significant digits, `.` decimal.
pub(crate) fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
