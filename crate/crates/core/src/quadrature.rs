//! Quadrature kernels shared by the dispersion, memory-kernel and scattering
//! modules: adaptive Gauss-Kronrod for complex integrands, composite
//! Newton-Cotes weights for convolutions on uniform grids, pairwise summation
//! and polynomial extrapolation to zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Panel { a, b, value, error }
}

/// Adaptive Gauss-Kronrod integration of a complex integrand over `[a, b]`,
/// with optional interior breakpoints where the integrand is sharply peaked.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> Estimate
where
    F: FnMut(f64) -> Complex64,
{
    let mut cuts = vec![a];
    let mut bp: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    bp.sort_by(f64::total_cmp);
    cuts.extend(bp);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&mut f, w[0], w[1]));
        }
    }
    let mut value: Complex64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        let target = tol.abs.max(tol.rel * value.norm());
        if error <= target || heap.len() >= tol.max_intervals {
            // re-sum to shed the drift of the running totals
            let value = heap.iter().map(|p| p.value).sum();
            let error = heap.iter().map(|p| p.error).sum();
            return Estimate {
                value,
                error,
                intervals: heap.len(),
            };
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            error -= worst.error;
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            continue;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> f64
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, tol)
        .value
        .re
}

/// Order of the composite rule used by [`convolution_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Trapezoid,
    /// Composite Simpson with a 3/8 tail on odd interval counts; fourth order.
    Simpson,
}

/// Weights `w_0..=w_n` (already multiplied by `h`) of a composite rule on
/// `n` uniform intervals.
pub fn convolution_weights(n: usize, h: f64, rule: Rule) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        return w;
    }
    match (rule, n) {
        (Rule::Trapezoid, _) | (Rule::Simpson, 1) => {
            for x in w.iter_mut() {
                *x = h;
            }
            w[0] = 0.5 * h;
            w[n] = 0.5 * h;
        }
        (Rule::Simpson, _) => {
            let simpson_end = if n % 2 == 0 { n } else { n - 3 };
            let mut i = 0;
            while i < simpson_end {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
                i += 2;
            }
            if n % 2 == 1 {
                let s = simpson_end;
                w[s] += 3.0 * h / 8.0;
                w[s + 1] += 9.0 * h / 8.0;
                w[s + 2] += 9.0 * h / 8.0;
                w[s + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}

/// Pairwise (cascade) summation; the result does not depend on thread
/// scheduling because the reduction tree is fixed by the slice length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

/// Neville evaluation at zero of the interpolating polynomial through
/// `(x_i, y_i)`: Richardson extrapolation for step-size sequences.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    assert_eq!(xs.len(), ys.len());
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (p[i + 1] * xi - p[i] * xj) / (xi - xj);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_kronrod_polynomial_exact() {
        let est = integrate_real(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &[], Tolerance::default());
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((est - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_resolves_lorentzian_peak() {
        let eps = 1e-5;
        let est = integrate(
            |x| Complex64::new(1.0, 0.0) / Complex64::new(x - 0.3, eps),
            0.0,
            1.0,
            &[0.3],
            Tolerance::default(),
        );
        // principal value log(0.7/0.3) and -i*pi in the eps -> 0 limit
        let exact_im = -((0.7 / eps).atan() + (0.3 / eps).atan());
        let exact_re = 0.5 * ((0.49 + eps * eps) / (0.09 + eps * eps)).ln();
        assert!((est.value.re - exact_re).abs() < 1e-10);
        assert!((est.value.im - exact_im).abs() < 1e-10);
        assert!((est.value.im + PI).abs() < 1e-4);
    }

    #[test]
    fn simpson_weights_are_fourth_order() {
        let f = |x: f64| (3.0 * x).cos();
        let exact = 3f64.sin() / 3.0;
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let w = convolution_weights(n, h, Rule::Simpson);
            (w.iter().enumerate().map(|(i, wi)| wi * f(i as f64 * h)).sum::<f64>() - exact).abs()
        };
        for n in [20usize, 30] {
            let ratio = err(n) / err(2 * n);
            assert!(ratio > 14.0 && ratio < 18.0, "n={n} ratio={ratio}");
        }
        assert!(err(21) < 1e-6 && err(41) < err(21) / 10.0);
        for n in 1..8 {
            let w = convolution_weights(n, 0.1, Rule::Simpson);
            assert!((w.iter().sum::<f64>() - 0.1 * n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn extrapolation_removes_linear_and_quadratic_terms() {
        let xs = [1e-2, 1e-3, 1e-4];
        let ys: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::new(0.5 + 2.0 * x - 7.0 * x * x, -1.0 + x))
            .collect();
        let v = extrapolate_to_zero(&xs, &ys);
        assert!((v - Complex64::new(0.5, -1.0)).norm() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-11);
    }
}
