//! Gauss-Legendre rules and an adaptive Gauss-Kronrod integrator.

use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Maps the rule onto `[a, b]` and sums `f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `(point, weight)` pairs on `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

macro_rules! cached_rule {
    ($name:ident, $n:expr) => {
        pub fn $name() -> &'static GaussRule {
            static RULE: OnceLock<GaussRule> = OnceLock::new();
            RULE.get_or_init(|| GaussRule::new($n))
        }
    };
}

cached_rule!(gauss8, 8);
cached_rule!(gauss10, 10);
cached_rule!(gauss16, 16);
cached_rule!(gauss24, 24);

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

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive G7-K15 with relative tolerance `tol` (absolute floor
/// `1e-300`). Integrable endpoint singularities are handled by bisection.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v0, e0) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    let mut evals = 1usize;
    while err > tol * total.abs().max(1e-300) && evals < 4000 {
        // split the interval with the largest error estimate
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            intervals.push((lo, hi, v, 0.0));
            err -= e;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v;
        err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        evals += 2;
    }
    // re-sum to shed accumulated rounding from the running updates
    intervals.iter().map(|iv| iv.2).sum()
}

/// Endpoint of `[a, b]` carrying an integrable singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularEnd {
    Left,
    Right,
}

/// Integrates `f` over `[a, b]` after the substitution
/// `x = a + (b - a) w^g` (or its mirror), which turns an endpoint behavior
/// `|x - end|^{beta}` into `w^{g(beta + 1) - 1}`. Points closer to the
/// singular end than its floating-point spacing are dropped, so the
/// singular end should be placed at 0 when it is strong.
pub fn integrate_graded<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, end: SingularEnd, g: f64, tol: f64) -> f64 {
    let len = b - a;
    integrate_adaptive(
        |w: f64| {
            let jac = len * g * w.powf(g - 1.0);
            let off = len * w.powf(g);
            let x = match end {
                SingularEnd::Left => a + off,
                SingularEnd::Right => b - off,
            };
            if jac == 0.0 || off == 0.0 {
                0.0
            } else {
                f(x) * jac
            }
        },
        0.0,
        1.0,
        tol,
    )
}
