//! McCormick envelope of `w = x * y` over a box.

/// One linear inequality `cw * w + cx * x + cy * y <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeCut {
    pub cw: f64,
    pub cx: f64,
    pub cy: f64,
    pub rhs: f64,
}

impl EnvelopeCut {
    pub fn slack(&self, w: f64, x: f64, y: f64) -> f64 {
        self.rhs - (self.cw * w + self.cx * x + self.cy * y)
    }
}

/// The four McCormick inequalities for `w = x * y` with `x in [xl, xu]`,
/// `y in [yl, yu]`:
///
/// ```text
/// w >= xl*y + yl*x - xl*yl
/// w >= xu*y + yu*x - xu*yu
/// w <= xu*y + yl*x - xu*yl
/// w <= xl*y + yu*x - xl*yu
/// ```
pub fn mccormick(xl: f64, xu: f64, yl: f64, yu: f64) -> [EnvelopeCut; 4] {
    [
        EnvelopeCut {
            cw: -1.0,
            cx: yl,
            cy: xl,
            rhs: xl * yl,
        },
        EnvelopeCut {
            cw: -1.0,
            cx: yu,
            cy: xu,
            rhs: xu * yu,
        },
        EnvelopeCut {
            cw: 1.0,
            cx: -yl,
            cy: -xu,
            rhs: -xu * yl,
        },
        EnvelopeCut {
            cw: 1.0,
            cx: -yu,
            cy: -xl,
            rhs: -xl * yu,
        },
    ]
}

/// Interval hull of `x * y`.
pub fn product_bounds(xl: f64, xu: f64, yl: f64, yu: f64) -> (f64, f64) {
    let c = [xl * yl, xl * yu, xu * yl, xu * yu];
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_corner_is_tight() {
        for cut in mccormick(0.0, 1.0, 0.0, 1.0) {
            assert!(cut.slack(1.0, 1.0, 1.0) >= -1e-12);
        }
    }

    #[test]
    fn fixed_factor_collapses_to_equality() {
        // x fixed at 2: the envelope must force w = 2y for every y.
        let cuts = mccormick(2.0, 2.0, -1.0, 3.0);
        for &y in &[-1.0, 0.0, 1.7, 3.0] {
            for cut in &cuts {
                assert!(cut.slack(2.0 * y, 2.0, y) >= -1e-12);
            }
            let above = cuts.iter().any(|c| c.slack(2.0 * y + 1e-6, 2.0, y) < 0.0);
            let below = cuts.iter().any(|c| c.slack(2.0 * y - 1e-6, 2.0, y) < 0.0);
            assert!(above && below);
        }
    }
}
