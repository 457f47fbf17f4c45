//! Helpers shared by the integration tests: seeded instances and
//! brute-force maximizers that share no code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relay_alloc::channel::{generate_channels, ChannelConfig, Tap};
use relay_alloc::types::dual_index as di;
use relay_alloc::{DualPoint, ProblemInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Midpoint-relay instance with equal budgets; below three subcarriers the
/// delay profile collapses to a single Rayleigh tap.
pub fn instance(n: usize, seed: u64, snr_db: f64, qos: [f64; 2]) -> ProblemInstance {
    let mut cfg = ChannelConfig::new(n, 0.5, seed).unwrap();
    if n < cfg.taps.len() {
        cfg.taps = vec![Tap { delay: 0, power_db: 0.0 }];
    }
    let ch = generate_channels(&cfg).unwrap();
    ProblemInstance::new(ch, [1.0, 1.0], qos, [10f64.powf(snr_db / 10.0); 3]).unwrap()
}

/// Random dual point satisfying the boundedness constraints.
pub fn random_dual(r: &mut impl Rng, weights: [f64; 2]) -> DualPoint {
    let mut v = [0.0; di::DIM];
    for k in 0..2 {
        v[di::MU_A + k] = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..2.0) };
    }
    let lab_cap = (0..2).map(|k| weights[k] + v[di::MU_A + k]).fold(f64::INFINITY, f64::min);
    v[di::LAM_AB] = r.gen_range(0.0..1.0) * lab_cap;
    for k in 0..2 {
        let level = weights[k] + v[di::MU_A + k];
        v[di::LAM_B1_A + k] = r.gen_range(0.0..1.0) * level;
        v[di::LAM_C1_A + k] = r.gen_range(0.0..1.0) * (level - v[di::LAM_AB]);
    }
    for j in 0..3 {
        v[di::ALPHA_A + j] = 10f64.powf(r.gen_range(-3.0..0.5));
    }
    DualPoint::new(v, weights).unwrap()
}

const PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut a = hi - PHI * (hi - lo);
    let mut b = lo + PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + PHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - PHI * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    // The boundary can beat the interior for monotone profiles.
    [lo.min(x), x, hi]
        .into_iter()
        .max_by(|p, q| f(*p).total_cmp(&f(*q)))
        .unwrap()
}

/// Upper end of a search bracket for a concave profit whose marginal gain
/// at zero is `slope0` and whose price per unit is `price`.
pub fn bracket(level: f64, price: f64) -> f64 {
    (level / (std::f64::consts::LN_2 * price)).max(1e-6) * 1.5 + 1.0
}

/// Log2 without the library helper.
pub fn c(x: f64) -> f64 {
    (1.0 + x).log2()
}

/// Maximizer of a concave `f` on `[0, hi_a] x [0, hi_b]` by repeatedly
/// zooming a 41 x 41 grid around its best node.
pub fn grid_max2(f: &dyn Fn(f64, f64) -> f64, hi_a: f64, hi_b: f64) -> [f64; 2] {
    const K: usize = 40;
    let (mut lo, mut hi) = ([0.0, 0.0], [hi_a, hi_b]);
    let mut best = [0.0, 0.0];
    for _ in 0..60 {
        let step = [(hi[0] - lo[0]) / K as f64, (hi[1] - lo[1]) / K as f64];
        let mut fb = f64::NEG_INFINITY;
        for i in 0..=K {
            for j in 0..=K {
                let p = [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]];
                let v = f(p[0], p[1]);
                if v > fb {
                    fb = v;
                    best = p;
                }
            }
        }
        for d in 0..2 {
            lo[d] = (best[d] - 2.0 * step[d]).max(0.0);
            hi[d] = best[d] + 2.0 * step[d];
        }
        if step[0].max(step[1]) < 1e-13 {
            break;
        }
    }
    best
}

/// Maximizer over `x >= 0` of a concave function given its derivative:
/// bisection on the sign of `df`.
pub fn argmax_by_slope(df: &dyn Fn(f64) -> f64) -> f64 {
    if df(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while df(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if df(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
