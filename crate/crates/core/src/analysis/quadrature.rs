//! Globally adaptive 7/15-point Gauss-Kronrod quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Uniform pieces the range is split into before refinement starts.
    pub initial_pieces: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
            initial_pieces: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Piece { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, bisecting the worst piece until the summed
/// error estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let n0 = opts.initial_pieces.max(1);
    let width = (b - a) / n0 as f64;
    let mut pieces: Vec<Piece> = (0..n0)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width };
            kronrod(&f, lo, hi)
        })
        .collect();
    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: pieces.len(),
            });
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                abs_error: error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: pieces.len(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // cannot split further in floating point
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: pieces.len() + 1,
            });
        }
        pieces.push(kronrod(&f, p.a, mid));
        pieces.push(kronrod(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((k - 2.0).abs() < 1e-14);
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_polynomials() {
        let r = integrate(|x| x.powi(10) - 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (2f64.powi(11) / 11.0 - 8.0)).abs() < 1e-11);
    }

    #[test]
    fn adapts_to_sharp_peak() {
        let eps = 1e-4f64;
        let f = |x: f64| eps / (x * x + eps * eps);
        let r = integrate(f, -1.0, 1.0, QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value - exact).abs() < 1e-9, "{} vs {exact}", r.value);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions {
            max_intervals: 4,
            ..QuadOptions::default()
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
