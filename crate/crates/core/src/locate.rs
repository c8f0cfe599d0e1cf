//! Range-difference multilateration and outcome classification.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2};

use crate::geom::Point;
use crate::receiver::RstdSet;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub step_tolerance_m: f64,
    pub max_halvings: usize,
    /// Solutions with a larger RMS range-difference residual are rejected.
    pub max_rms_residual_m: f64,
    /// Solutions farther than this from the centroid of the used sites are rejected.
    pub max_centroid_distance_m: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance_m: 1e-3,
            max_halvings: 8,
            max_rms_residual_m: 30.0,
            max_centroid_distance_m: 1500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PositionEstimate {
    pub xy_m: Point,
    pub residual_norm: f64,
    pub converged: bool,
    pub n_bs_used: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OutcomeKind {
    Success,
    LargeError,
    DoS,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Success => "success",
            OutcomeKind::LargeError => "large_error",
            OutcomeKind::DoS => "dos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OutcomeClass {
    pub kind: OutcomeKind,
    pub error_m: Option<f64>,
}

struct Geometry {
    reference: Point,
    others: Vec<(Point, f64)>,
}

impl Geometry {
    fn residuals(&self, p: &Point) -> Vec<f64> {
        let d_ref = (p - self.reference).norm();
        self.others
            .iter()
            .map(|(q, range_diff)| range_diff - ((p - q).norm() - d_ref))
            .collect()
    }

    fn norm(&self, p: &Point) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    /// Gauss-Newton step from `p`, or `None` if the normal matrix is singular.
    fn step(&self, p: &Point) -> Option<Vector2<f64>> {
        let u_ref = unit(p - self.reference)?;
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for ((q, _), r) in self.others.iter().zip(self.residuals(p)) {
            // d r / d p = -(u_q - u_ref)
            let j = -(unit(p - q)? - u_ref);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let inv = jtj.try_inverse()?;
        let s = -(inv * jtr);
        s.iter().all(|v| v.is_finite()).then_some(s)
    }
}

fn unit(v: Vector2<f64>) -> Option<Vector2<f64>> {
    let n = v.norm();
    (n > 1e-9).then(|| v / n)
}

/// Damped Gauss-Newton solve of the range-difference equations. Fewer than
/// three sites is an error; non-convergence yields `converged = false`.
pub fn multilaterate(
    rstds: &RstdSet,
    bs_positions: &BTreeMap<u32, Point>,
    initial_guess: &Point,
    cfg: &SolverConfig,
) -> Result<PositionEstimate> {
    let reference = *bs_positions
        .get(&rstds.reference_bs)
        .ok_or_else(|| Error::param(format!("no position for reference {}", rstds.reference_bs)))?;
    let mut others = Vec::new();
    for (&id, &dt) in &rstds.values_s {
        if id == rstds.reference_bs {
            continue;
        }
        let q = *bs_positions
            .get(&id)
            .ok_or_else(|| Error::param(format!("no position for base station {id}")))?;
        others.push((q, SPEED_OF_LIGHT * dt));
    }
    let n_bs_used = others.len() + 1;
    if n_bs_used < 3 {
        return Err(Error::MeasurementUnavailable(format!(
            "{n_bs_used} base stations, need at least 3"
        )));
    }
    let geo = Geometry { reference, others };
    let sites: Vec<Point> = std::iter::once(geo.reference)
        .chain(geo.others.iter().map(|o| o.0))
        .collect();
    let centroid = centroid(&sites);
    // Three hyperbolae can intersect twice; also start near each site and
    // keep the best fit, preferring the solution nearest the initial guess.
    let starts: Vec<Point> = std::iter::once(*initial_guess)
        .chain(
            sites
                .iter()
                .map(|q| initial_guess + (q - initial_guess) * 0.9),
        )
        .collect();
    let runs: Vec<(Point, f64, bool, usize)> =
        starts.iter().map(|s| gauss_newton(&geo, s, cfg)).collect();
    let best_cost = runs
        .iter()
        .filter(|r| r.2)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min);
    let chosen = runs
        .iter()
        .filter(|r| r.2 && r.1 <= best_cost + TIE_TOLERANCE_M)
        .min_by(|a, b| {
            (a.0 - initial_guess)
                .norm()
                .total_cmp(&(b.0 - initial_guess).norm())
        })
        .unwrap_or(&runs[0]);
    let (p, cost, converged, iterations) = *chosen;
    let rms = cost / ((n_bs_used - 1) as f64).sqrt();
    let plausible = cost.is_finite()
        && p.iter().all(|v| v.is_finite())
        && rms <= cfg.max_rms_residual_m
        && (p - centroid).norm() <= cfg.max_centroid_distance_m;
    Ok(PositionEstimate {
        xy_m: p,
        residual_norm: cost,
        converged: converged && plausible,
        n_bs_used,
        iterations,
    })
}

const TIE_TOLERANCE_M: f64 = 0.5;

/// One damped Gauss-Newton run: (solution, residual norm, converged, iterations).
fn gauss_newton(geo: &Geometry, start: &Point, cfg: &SolverConfig) -> (Point, f64, bool, usize) {
    let mut p = *start;
    let mut cost = geo.norm(&p);
    let mut iterations = 0;
    'outer: for it in 1..=cfg.max_iterations {
        iterations = it;
        let Some(step) = geo.step(&p) else {
            return (p, cost, false, it);
        };
        let mut scale = 1.0;
        for _ in 0..=cfg.max_halvings {
            let cand = p + step * scale;
            let c = geo.norm(&cand);
            if c.is_finite() && c <= cost {
                p = cand;
                cost = c;
                if (step * scale).norm() < cfg.step_tolerance_m {
                    return (p, cost, true, it);
                }
                continue 'outer;
            }
            scale *= 0.5;
        }
        // No descent along the step: a (local) minimum only if the step is tiny.
        return (p, cost, (step * scale).norm() < cfg.step_tolerance_m, it);
    }
    (p, cost, false, iterations)
}

pub fn classify_outcome(
    est: Option<&PositionEstimate>,
    truth: &Point,
    threshold_m: f64,
) -> OutcomeClass {
    match est.filter(|e| e.converged) {
        None => OutcomeClass {
            kind: OutcomeKind::DoS,
            error_m: None,
        },
        Some(e) => {
            let err = (e.xy_m - truth).norm();
            OutcomeClass {
                kind: if err <= threshold_m {
                    OutcomeKind::Success
                } else {
                    OutcomeKind::LargeError
                },
                error_m: Some(err),
            }
        }
    }
}

/// Noiseless RSTDs a UE at `p` would measure (reference = first id).
pub fn synthesize_rstds(p: &Point, bs: &BTreeMap<u32, Point>, reference_bs: u32) -> RstdSet {
    let d_ref = (p - bs[&reference_bs]).norm();
    RstdSet {
        reference_bs,
        values_s: bs
            .iter()
            .map(|(&id, q)| (id, ((p - q).norm() - d_ref) / SPEED_OF_LIGHT))
            .collect(),
    }
}

/// Centroid of the listed sites.
pub fn centroid(points: &[Point]) -> Point {
    points.iter().sum::<Point>() / points.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{pt, rotate};
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn triangle() -> BTreeMap<u32, Point> {
        let r = 500.0 / 3f64.sqrt();
        (0..3)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::TAU / 3.0;
                (i as u32 + 1, pt(r * a.cos(), r * a.sin()))
            })
            .collect()
    }

    fn in_triangle<R: Rng>(rng: &mut R, bs: &BTreeMap<u32, Point>) -> Point {
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        bs[&1] + (bs[&2] - bs[&1]) * u + (bs[&3] - bs[&1]) * v
    }

    #[test]
    fn centroid_recovered() {
        let bs = triangle();
        let c = centroid(&bs.values().copied().collect::<Vec<_>>());
        let r = synthesize_rstds(&c, &bs, 1);
        assert!(r.values_s.values().all(|v| v.abs() < 1e-15));
        let e = multilaterate(&r, &bs, &pt(30.0, -20.0), &SolverConfig::default()).unwrap();
        assert!(e.converged);
        assert!((e.xy_m - c).norm() < 1e-3);
    }

    #[test]
    fn random_round_trip() {
        let bs = triangle();
        let mut rng = rng_from(8);
        let c = centroid(&bs.values().copied().collect::<Vec<_>>());
        for _ in 0..100 {
            let p = in_triangle(&mut rng, &bs);
            let e = multilaterate(
                &synthesize_rstds(&p, &bs, 1),
                &bs,
                &c,
                &SolverConfig::default(),
            )
            .unwrap();
            assert!(e.converged);
            assert!((e.xy_m - p).norm() <= 0.01, "{:?} vs {:?}", e.xy_m, p);
            assert!(e.residual_norm <= (geo_norm(&bs, &p, &c)) + 1e-9);
        }
    }

    fn geo_norm(bs: &BTreeMap<u32, Point>, truth: &Point, at: &Point) -> f64 {
        let r = synthesize_rstds(truth, bs, 1);
        let d_ref = (at - bs[&1]).norm();
        r.values_s
            .iter()
            .filter(|(&id, _)| id != 1)
            .map(|(id, v)| (SPEED_OF_LIGHT * v - ((at - bs[id]).norm() - d_ref)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn too_few_sites() {
        let bs = triangle();
        let mut r = synthesize_rstds(&pt(0.0, 0.0), &bs, 1);
        r.values_s.remove(&3);
        assert!(multilaterate(&r, &bs, &pt(0.0, 0.0), &SolverConfig::default()).is_err());
        assert_eq!(
            classify_outcome(None, &pt(0.0, 0.0), 15.0).kind,
            OutcomeKind::DoS
        );
    }

    #[test]
    fn classification() {
        let mk = |x: f64, conv| PositionEstimate {
            xy_m: pt(x, 0.0),
            residual_norm: 0.0,
            converged: conv,
            n_bs_used: 3,
            iterations: 1,
        };
        let t = pt(0.0, 0.0);
        assert_eq!(
            classify_outcome(Some(&mk(3.2, true)), &t, 15.0).kind,
            OutcomeKind::Success
        );
        assert_eq!(
            classify_outcome(Some(&mk(15.0, true)), &t, 15.0).kind,
            OutcomeKind::Success
        );
        assert_eq!(
            classify_outcome(Some(&mk(200.0, true)), &t, 15.0).kind,
            OutcomeKind::LargeError
        );
        let dos = classify_outcome(Some(&mk(1.0, false)), &t, 15.0);
        assert_eq!(dos.kind, OutcomeKind::DoS);
        assert_eq!(dos.error_m, None);
    }

    #[test]
    fn fake_position_outside_cell_is_found() {
        let bs = triangle();
        let fake = pt(180.0, 60.0);
        let c = centroid(&bs.values().copied().collect::<Vec<_>>());
        let e = multilaterate(
            &synthesize_rstds(&fake, &bs, 2),
            &bs,
            &c,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(e.converged);
        assert!((e.xy_m - fake).norm() < 0.01);
    }

    #[test]
    fn overdetermined_beats_subsets() {
        let mut bs = triangle();
        bs.insert(4, pt(0.0, -600.0));
        bs.insert(5, pt(450.0, 250.0));
        let mut rng = rng_from(12);
        let (mut full, mut sub) = (Vec::new(), Vec::new());
        let c = pt(0.0, 0.0);
        for _ in 0..100 {
            let p = in_triangle(&mut rng, &bs);
            let mut r = synthesize_rstds(&p, &bs, 1);
            for (id, v) in r.values_s.iter_mut() {
                if *id != 1 {
                    *v += rng.gen_range(-1.0..1.0) * 10.0 / SPEED_OF_LIGHT;
                }
            }
            let e = multilaterate(&r, &bs, &c, &SolverConfig::default()).unwrap();
            full.push((e.xy_m - p).norm());
            let mut r3 = r.clone();
            r3.values_s.retain(|id, _| *id <= 3);
            let sub_bs: BTreeMap<u32, Point> = bs
                .iter()
                .filter(|(id, _)| **id <= 3)
                .map(|(a, b)| (*a, *b))
                .collect();
            let e3 = multilaterate(&r3, &sub_bs, &c, &SolverConfig::default()).unwrap();
            sub.push((e3.xy_m - p).norm());
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(&mut full) <= median(&mut sub));
    }

    proptest! {
        #[test]
        fn rigid_motion_equivariance(tx in -2000.0..2000.0f64, ty in -2000.0..2000.0f64,
                                     rot in 0.0..std::f64::consts::TAU, u in 0.05..0.45f64, v in 0.05..0.45f64) {
            let bs = triangle();
            let p = bs[&1] + (bs[&2] - bs[&1]) * u + (bs[&3] - bs[&1]) * v;
            let init = pt(10.0, 5.0);
            let a = multilaterate(&synthesize_rstds(&p, &bs, 1), &bs, &init, &SolverConfig::default()).unwrap();
            let f = |q: &Point| rotate(q, rot) + pt(tx, ty);
            let bs2: BTreeMap<u32, Point> = bs.iter().map(|(i, q)| (*i, f(q))).collect();
            let b = multilaterate(&synthesize_rstds(&f(&p), &bs2, 1), &bs2, &f(&init), &SolverConfig::default()).unwrap();
            prop_assert!(a.converged && b.converged);
            prop_assert!((f(&a.xy_m) - b.xy_m).norm() < 1e-6);
        }
    }
}
