//! Small numerical kernels: compensated summation, quadrature, trend probes.

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(exp(u) + 1)` for any real `u`.
pub fn ln_1p_exp(u: f64) -> f64 {
    if u > 35.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Exp-sinh quadrature of `g` over `[a, inf)`. Returns value and error estimate.
pub fn exp_sinh<G: Fn(f64) -> f64>(g: G, a: f64, rel_tol: f64) -> (f64, f64) {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let e = s.exp();
        let u = a + e;
        if !u.is_finite() || e == 0.0 {
            return 0.0;
        }
        let w = half_pi * t.cosh() * e;
        let v = g(u) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut h = 1.0f64;
    let mut total = node(0.0);
    let scan = |h: f64, start: i64, step: i64, total_mag: f64| -> f64 {
        let mut acc = KahanSum::new();
        for dir in [1.0f64, -1.0] {
            let mut k = start;
            let mut small = 0;
            loop {
                let t = dir * k as f64 * h;
                if t.abs() > 8.0 {
                    break;
                }
                let v = node(t);
                acc.add(v);
                if v.abs() <= 1e-18 * total_mag.max(v.abs()).max(1e-300) {
                    small += 1;
                    if small >= 3 {
                        break;
                    }
                } else {
                    small = 0;
                }
                k += step;
            }
        }
        acc.value()
    };
    total += scan(h, 1, 1, total.abs());
    let mut estimate = total * h;
    let mut err = f64::INFINITY;
    for _ in 0..9 {
        h *= 0.5;
        total += scan(h, 1, 2, total.abs());
        let next = total * h;
        err = (next - estimate).abs();
        estimate = next;
        if err <= rel_tol * estimate.abs() {
            break;
        }
    }
    (estimate, err.max(1e-15 * estimate.abs()))
}

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = g(c);
    let mut k = WGK[7] * fc;
    let mut gs = WG[3] * fc;
    for i in 0..7 {
        let dx = hw * XGK[i];
        let s = g(c - dx) + g(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            gs += WG[i / 2] * s;
        }
    }
    (k * hw, ((k - gs) * hw).abs())
}

/// Adaptive Gauss-Kronrod quadrature on a finite interval.
pub fn integrate<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut stack = vec![(a, b, gk15(&g, a, b))];
    let mut done = KahanSum::new();
    let mut done_err = 0.0;
    let mut evals = 0usize;
    while let Some((lo, hi, (val, err))) = stack.pop() {
        let local_tol = (abs_tol.max(rel_tol * val.abs())) * ((hi - lo) / (b - a)).abs().sqrt();
        if err <= local_tol || evals > 20_000 || (hi - lo).abs() < 1e-13 * (b - a).abs() {
            done.add(val);
            done_err += err;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        evals += 1;
        stack.push((lo, mid, gk15(&g, lo, mid)));
        stack.push((mid, hi, gk15(&g, mid, hi)));
    }
    (done.value(), done_err)
}

/// Qualitative behaviour of a positive probe sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trend {
    Converges(f64),
    ToInfinity,
    ToZero,
    Unclear,
}

/// Classifies the tail of a probe sequence taken along a geometric grid.
pub fn trend(values: &[f64]) -> Trend {
    let n = values.len();
    if n < 6 || values.iter().any(|v| !v.is_finite() && *v != f64::INFINITY) {
        return Trend::Unclear;
    }
    let last = &values[n - 5..];
    if last.iter().all(|v| *v == f64::INFINITY) {
        return Trend::ToInfinity;
    }
    if last.iter().any(|v| !v.is_finite()) {
        return Trend::Unclear;
    }
    if last.iter().all(|v| *v == 0.0) {
        return Trend::ToZero;
    }
    let hi = last.iter().cloned().fold(f64::MIN, f64::max);
    let lo = last.iter().cloned().fold(f64::MAX, f64::min);
    let incr = last.windows(2).all(|w| w[1] >= w[0]);
    let decr = last.windows(2).all(|w| w[1] <= w[0]);
    if (incr || decr) && (hi - lo) <= 1e-2 * hi.abs().max(lo.abs()) {
        return Trend::Converges(last[4]);
    }
    if lo > 0.0 {
        let logs: Vec<f64> = last.iter().map(|v| v.ln()).collect();
        let d: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
        let steady = |d: &[f64]| d.windows(2).all(|w| w[1] >= 0.9 * w[0]);
        if d.iter().all(|x| *x > 0.0) && steady(&d) {
            return Trend::ToInfinity;
        }
        let nd: Vec<f64> = d.iter().map(|x| -x).collect();
        if nd.iter().all(|x| *x > 0.0) && steady(&nd) {
            return Trend::ToZero;
        }
        let lin: Vec<f64> = last.windows(2).map(|w| w[1] - w[0]).collect();
        if lin.iter().all(|x| *x > 0.0) && steady(&lin) {
            return Trend::ToInfinity;
        }
    }
    Trend::Unclear
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_sinh_algebraic_and_exponential() {
        let (v, _) = exp_sinh(|u| 1.0 / (u * u), 1.0, 1e-14);
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let (v, _) = exp_sinh(|u| (-u).exp(), 0.0, 1e-14);
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let (v, _) = exp_sinh(|u| 1.0 / (u.powf(1.5)), 4.0, 1e-14);
        assert!((v - 1.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn gauss_kronrod_smooth() {
        let (v, e) = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-13);
        assert!((v - 2.0).abs() < 1e-12 && e < 1e-10);
        let (v, _) = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-13)).abs() < 1e-15);
    }

    #[test]
    fn trend_shapes() {
        let conv: Vec<f64> = (1..20).map(|j| 2.0 + 0.5f64.powi(j)).collect();
        assert!(matches!(trend(&conv), Trend::Converges(_)));
        let inf: Vec<f64> = (1..20).map(|j| j as f64).collect();
        assert_eq!(trend(&inf), Trend::ToInfinity);
        let zero: Vec<f64> = (1..20).map(|j| 0.7f64.powi(j)).collect();
        assert_eq!(trend(&zero), Trend::ToZero);
    }
}
