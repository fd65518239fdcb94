//! Internal numerical kernels: adaptive Gauss-Kronrod quadrature, bisection
//! root finding, an incremental quantile bisection, and small derivative-free
//! minimizers used by the balance-function machinery.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half) with the embedded 7-point Gauss
// rule; standard QUADPACK values.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7/K15 panel: returns (kronrod value, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    kron *= half;
    gauss *= half;
    (kron, (kron - gauss).abs())
}

/// Adaptive quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Bisects the worst panel until the summed error estimate drops below the
/// tolerance. Intended for integrands that are smooth away from at most a
/// mild (integrable) endpoint singularity.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(&f, a, b);
    // (error, a, b, value); plain vec scanned for the worst panel — panel
    // counts stay small enough that a heap is not worth the bookkeeping
    let mut panels: Vec<(f64, f64, f64, f64)> = vec![(e, a, b, v)];
    let mut total_err = e;
    let max_panels = 2000;
    while total_err > tol && panels.len() < max_panels {
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .expect("non-empty panel list");
        let (err, pa, pb, _pv) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval is at floating-point resolution; keep as-is
            panels.push((0.0, pa, pb, _pv));
            total_err -= err;
            continue;
        }
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        total_err += e1 + e2 - err;
        panels.push((e1, pa, mid, v1));
        panels.push((e2, mid, pb, v2));
    }
    panels.iter().map(|p| p.3).sum()
}

/// Bisection for a root of `f` on `[lo, hi]`; requires a sign change.
pub(crate) fn bisect_root<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < xtol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quantile of a continuous distribution on `[0, z_max]` by bisection on its
/// monotone CDF.
///
/// `segment(a, b)` must return the probability mass on `[a, b]`. Bisection
/// keeps the mass at the moving bracket ends, so every iteration integrates
/// only the half interval it just crossed; total integration work stays
/// proportional to a couple of full CDF evaluations.
pub(crate) fn quantile_bisect<S: Fn(f64, f64) -> f64>(
    segment: S,
    z_max: f64,
    prob: f64,
    f_tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, z_max);
    let mut g_lo = 0.0_f64;
    let mut best = 0.5 * z_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(best);
        }
        let g_mid = g_lo + segment(lo, mid);
        best = mid;
        if (g_mid - prob).abs() <= f_tol {
            return Ok(mid);
        }
        if g_mid < prob {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!(
        "quantile bisection did not reach tolerance {f_tol} for prob {prob}"
    )))
}

/// Golden-section minimization of a unimodal-enough `f` on `[a, b]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Nelder-Mead on two variables with reflection/expansion/contraction and
/// shrink, stopping on simplex diameter. `f` is responsible for clamping or
/// penalizing points outside its feasible region.
pub(crate) fn nelder_mead_2d<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    scale: f64,
    xtol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + scale, start[1]],
        [start[0], start[1] + scale],
    ];
    let mut values = simplex.map(&f);
    for _ in 0..max_iter {
        // order ascending by value
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let (b, m, w) = (order[0], order[1], order[2]);
        let diam = simplex
            .iter()
            .flat_map(|p| {
                simplex
                    .iter()
                    .map(move |q| (p[0] - q[0]).hypot(p[1] - q[1]))
            })
            .fold(0.0_f64, f64::max);
        if diam < xtol {
            break;
        }
        let centroid = [
            0.5 * (simplex[b][0] + simplex[m][0]),
            0.5 * (simplex[b][1] + simplex[m][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[w][0]),
            centroid[1] + (centroid[1] - simplex[w][1]),
        ];
        let fr = f(reflect);
        if fr < values[b] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - simplex[w][0]),
                centroid[1] + 2.0 * (centroid[1] - simplex[w][1]),
            ];
            let fe = f(expand);
            if fe < fr {
                simplex[w] = expand;
                values[w] = fe;
            } else {
                simplex[w] = reflect;
                values[w] = fr;
            }
        } else if fr < values[m] {
            simplex[w] = reflect;
            values[w] = fr;
        } else {
            let contract = [
                centroid[0] + 0.5 * (simplex[w][0] - centroid[0]),
                centroid[1] + 0.5 * (simplex[w][1] - centroid[1]),
            ];
            let fc = f(contract);
            if fc < values[w] {
                simplex[w] = contract;
                values[w] = fc;
            } else {
                // shrink towards the best vertex
                for i in 0..3 {
                    if i == b {
                        continue;
                    }
                    simplex[i] = [
                        simplex[b][0] + 0.5 * (simplex[i][0] - simplex[b][0]),
                        simplex[b][1] + 0.5 * (simplex[i][1] - simplex[b][1]),
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best], values[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_mass() {
        let v = integrate(
            |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -10.0,
            10.0,
            1e-12,
        );
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn integrates_log_singularity() {
        // int_0^1 -ln(x) dx = 1
        let v = integrate(|x: f64| -(x.max(1e-320)).ln(), 0.0, 1.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn bisect_finds_cosine_root() {
        let r = bisect_root(|x: f64| x.cos(), 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(bisect_root(|x: f64| x.abs() + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn quantile_bisect_standard_normal_folded() {
        // half-normal quantile via the incremental segment interface
        let segment = |a: f64, b: f64| {
            integrate(
                |z: f64| (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp(),
                a,
                b,
                1e-13,
            )
        };
        let q = quantile_bisect(segment, 10.0, 0.5, 1e-10).unwrap();
        assert!((q - 0.674_489_750_196_081_7).abs() < 1e-8);
    }

    #[test]
    fn golden_min_quadratic() {
        // bracket comparisons bottom out near sqrt(eps); the value converges
        // quadratically faster than the abscissa
        let (x, v) = golden_min(|x| (x - 1.3) * (x - 1.3) + 2.0, -4.0, 4.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nelder_mead_rosenbrock_ish() {
        let f = |p: [f64; 2]| (p[0] - 0.3).powi(2) + 3.0 * (p[1] - 0.7).powi(2);
        let (p, v) = nelder_mead_2d(f, [0.0, 0.0], 0.1, 1e-9, 500);
        assert!((p[0] - 0.3).abs() < 1e-6 && (p[1] - 0.7).abs() < 1e-6);
        assert!(v < 1e-12);
    }
}
