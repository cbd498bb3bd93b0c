//! Adaptive Gauss-Kronrod quadrature (7-15 pair) used by the Mittag-Leffler
//! integral representation, the Laplace-transform property check, and the
//! hypothesis checkers.

/// Kronrod-15 abscissae on [-1, 1] (symmetric; nonnegative half listed).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Kronrod-15 weights.
#[allow(clippy::excessive_precision)]
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

/// Gauss-7 weights (matching the odd Kronrod abscissae).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadEstimate {
    pub value: f64,
    pub abs_err: f64,
}

/// One Gauss-Kronrod 15(7) panel on [a, b].
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> QuadEstimate {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = WGK[7] * f(c);
    let mut gauss = WG[3] * f(c);
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    QuadEstimate {
        value: kronrod,
        abs_err: (kronrod - gauss).abs(),
    }
}

/// Adaptive integration of `f` over [a, b] to absolute tolerance `tol`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `tol` or the panel budget is exhausted. Returns the
/// value and the final error estimate; callers that must fail on accuracy
/// loss check `abs_err` themselves.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> QuadEstimate {
    if a == b {
        return QuadEstimate { value: 0.0, abs_err: 0.0 };
    }
    const MAX_PANELS: usize = 4000;
    let mut panels: Vec<(f64, f64, QuadEstimate)> = vec![(a, b, gk15(f, a, b))];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.2.abs_err).sum();
        if total_err <= tol || panels.len() >= MAX_PANELS {
            let value = panels.iter().map(|p| p.2.value).sum();
            return QuadEstimate { value, abs_err: total_err };
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.abs_err.total_cmp(&y.1 .2.abs_err))
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval at floating resolution; keep as-is
            panels.push((pa, pb, gk15(f, pa, pb)));
            let value = panels.iter().map(|p| p.2.value).sum();
            let abs_err = panels.iter().map(|p| p.2.abs_err).sum();
            return QuadEstimate { value, abs_err };
        }
        panels.push((pa, mid, gk15(f, pa, mid)));
        panels.push((mid, pb, gk15(f, mid, pb)));
    }
}

/// Adaptive integration over [a, b] seeded with interior breakpoints
/// (peaks, kinks). Breakpoints outside (a, b) are ignored.
pub(crate) fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> QuadEstimate {
    let mut edges: Vec<f64> = vec![a];
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.sort_by(f64::total_cmp);
    for p in pts {
        if p > *edges.last().unwrap() {
            edges.push(p);
        }
    }
    edges.push(b);
    let per_tol = tol / edges.len() as f64;
    let mut value = 0.0;
    let mut abs_err = 0.0;
    for w in edges.windows(2) {
        let est = integrate(f, w[0], w[1], per_tol);
        value += est.value;
        abs_err += est.abs_err;
    }
    QuadEstimate { value, abs_err }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let est = integrate(&|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert!((est.value - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn decaying_exponential() {
        let est = integrate(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-13);
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_via_breakpoints() {
        // int_0^1 x^{-1/2} dx = 2; adaptive refinement digs into the endpoint
        let est = integrate(&|x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-9);
        assert!((est.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn peaked_integrand() {
        // narrow Lorentzian: int 1/((x-5)^2 + 1e-4) dx over [0,10] = 2*atan(500)/0.01
        let f = |x: f64| 1.0 / ((x - 5.0).powi(2) + 1e-4);
        let exact = 2.0 * (500.0_f64).atan() / 0.01;
        let est = integrate_with_breakpoints(&f, 0.0, 10.0, &[4.9, 5.0, 5.1], 1e-9);
        assert!((est.value - exact).abs() < 1e-6);
    }
}
