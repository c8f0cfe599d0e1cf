//! Cell topology, serving-set selection and UE trajectories.
//!
//! Sites sit on a triangular lattice with spacing equal to the inter-site
//! distance (ISD). Every point of the plane lies in one lattice triangle,
//! and the three sites at its vertices form the serving set. Hexagonal
//! cells of side ISD/√3 centred on the triangles have these sites as
//! alternate vertices. Neighbouring triangles share an edge, so a handover
//! keeps two of the three serving sites.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::geom::{pt, rotate, Point};
use crate::rng::rng_from;
use crate::{Error, Result};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;
const EDGE_EPS: f64 = 1e-9;

/// One base-station site.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BaseStation {
    pub id: u32,
    pub position: Point,
    /// Lattice colour in {0, 1, 2}; the three sites of a triangle differ.
    pub color: usize,
    pub lattice: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Topology {
    pub isd_m: f64,
    pub cell_side_m: f64,
    pub rotation_rad: f64,
    pub offset: Point,
    pub seed: u64,
    pub stations: Vec<BaseStation>,
    lattice_range: ((i64, i64), (i64, i64)),
}

/// Axis-aligned rectangle in local metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub min: Point,
    pub max: Point,
}

impl Extent {
    pub fn around(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p)));
        Some(Self { min, max })
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            min: self.min - Point::repeat(margin),
            max: self.max + Point::repeat(margin),
        }
    }
}

/// Build a lattice covering `extent` plus two sites of margin, with a
/// random offset and rotation drawn from `seed`.
pub fn build_topology(extent: &Extent, isd_m: f64, seed: u64) -> Result<Topology> {
    if !(isd_m > 0.0) {
        return Err(Error::param(format!("ISD must be positive, got {isd_m}")));
    }
    let mut rng = rng_from(seed);
    let rotation_rad = rng.gen_range(0.0..std::f64::consts::TAU / 6.0);
    let offset = pt(rng.gen_range(0.0..isd_m), rng.gen_range(0.0..isd_m));
    let margin = 2.0 * isd_m;
    let ext = extent.expanded(margin);
    let corners = [
        ext.min,
        ext.max,
        pt(ext.min.x, ext.max.y),
        pt(ext.max.x, ext.min.y),
    ];
    let mut lo = (i64::MAX, i64::MAX);
    let mut hi = (i64::MIN, i64::MIN);
    for c in corners {
        let (i, j) = to_lattice(&c, isd_m, rotation_rad, &offset);
        lo = (lo.0.min(i.floor() as i64), lo.1.min(j.floor() as i64));
        hi = (hi.0.max(i.ceil() as i64), hi.1.max(j.ceil() as i64));
    }
    let mut stations = Vec::new();
    for j in lo.1..=hi.1 {
        for i in lo.0..=hi.0 {
            stations.push(BaseStation {
                id: stations.len() as u32 + 1,
                position: from_lattice(i as f64, j as f64, isd_m, rotation_rad, &offset),
                color: (i - j).rem_euclid(3) as usize,
                lattice: (i, j),
            });
        }
    }
    Ok(Topology {
        isd_m,
        cell_side_m: isd_m / 3f64.sqrt(),
        rotation_rad,
        offset,
        seed,
        stations,
        lattice_range: (lo, hi),
    })
}

fn to_lattice(p: &Point, isd: f64, rot: f64, offset: &Point) -> (f64, f64) {
    let q = rotate(&(p - offset), -rot) / isd;
    let j = q.y / SQRT3_2;
    (q.x - 0.5 * j, j)
}

fn from_lattice(i: f64, j: f64, isd: f64, rot: f64, offset: &Point) -> Point {
    rotate(&pt(i + 0.5 * j, SQRT3_2 * j), rot) * isd + offset
}

type Triangle = [(i64, i64); 3];

impl Topology {
    pub fn station(&self, id: u32) -> Option<&BaseStation> {
        self.stations
            .get(id.checked_sub(1)? as usize)
            .filter(|b| b.id == id)
    }

    fn station_at(&self, ij: (i64, i64)) -> Option<&BaseStation> {
        let ((i0, j0), (i1, j1)) = self.lattice_range;
        if ij.0 < i0 || ij.0 > i1 || ij.1 < j0 || ij.1 > j1 {
            return None;
        }
        let width = (i1 - i0 + 1) as usize;
        self.stations
            .get((ij.1 - j0) as usize * width + (ij.0 - i0) as usize)
    }

    fn centroid(&self, t: &Triangle) -> Point {
        t.iter()
            .map(|&(i, j)| {
                from_lattice(
                    i as f64,
                    j as f64,
                    self.isd_m,
                    self.rotation_rad,
                    &self.offset,
                )
            })
            .sum::<Point>()
            / 3.0
    }

    /// Lattice triangle containing `p`; boundary ties go to the triangle
    /// with the lexicographically smallest centroid.
    fn containing_triangle(&self, p: &Point) -> Triangle {
        let (fi, fj) = to_lattice(p, self.isd_m, self.rotation_rad, &self.offset);
        let (i0, j0) = (fi.floor() as i64, fj.floor() as i64);
        let mut candidates: Vec<Triangle> = Vec::new();
        for dj in -1..=0 {
            for di in -1..=0 {
                let (i, j) = (i0 + di, j0 + dj);
                let u = fi - i as f64;
                let v = fj - j as f64;
                if u >= -EDGE_EPS && v >= -EDGE_EPS && u + v <= 1.0 + EDGE_EPS {
                    candidates.push([(i, j), (i + 1, j), (i, j + 1)]);
                }
                if u <= 1.0 + EDGE_EPS && v <= 1.0 + EDGE_EPS && u + v >= 1.0 - EDGE_EPS {
                    candidates.push([(i + 1, j), (i, j + 1), (i + 1, j + 1)]);
                }
            }
        }
        candidates
            .into_iter()
            .min_by(|a, b| {
                let (ca, cb) = (self.centroid(a), self.centroid(b));
                ca.x.total_cmp(&cb.x).then(ca.y.total_cmp(&cb.y))
            })
            .expect("every point lies in some lattice triangle")
    }

    /// Serving set at `position`: the three vertex sites of its cell, by id.
    pub fn serving_bs(&self, position: &Point) -> Result<[u32; 3]> {
        let tri = self.containing_triangle(position);
        let mut ids = [0u32; 3];
        for (slot, ij) in ids.iter_mut().zip(tri) {
            *slot = self
                .station_at(ij)
                .ok_or(Error::OutsideExtent {
                    x: position.x,
                    y: position.y,
                })?
                .id;
        }
        ids.sort_unstable();
        Ok(ids)
    }

    /// Centroid of the serving cell at `position`.
    pub fn cell_centroid(&self, position: &Point) -> Point {
        self.centroid(&self.containing_triangle(position))
    }

    pub fn positions(&self, ids: &[u32]) -> Result<Vec<Point>> {
        ids.iter()
            .map(|&id| {
                self.station(id)
                    .map(|b| b.position)
                    .ok_or_else(|| Error::param(format!("unknown base station {id}")))
            })
            .collect()
    }
}

/// Ground-truth UE state at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub xy_m: Point,
    pub velocity_mps: Point,
}

/// Read a `t_s,x_m,y_m[,vx_mps,vy_mps]` CSV trajectory. Missing velocities
/// are filled by central differences (one-sided at the ends).
pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(file, path)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn parse_trajectory<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let with_velocity = match names.as_slice() {
        ["t_s", "x_m", "y_m"] => false,
        ["t_s", "x_m", "y_m", "vx_mps", "vy_mps"] => true,
        _ => return Err(parse_err(path, 1, format!("unexpected header {names:?}"))),
    };
    let mut rows: Vec<(f64, Point, Option<Point>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", names.len(), rec.len()),
            ));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| parse_err(path, line, "non-numeric field"))?;
        if let Some(&(t_prev, _, _)) = rows.last() {
            if vals[0] <= t_prev {
                return Err(parse_err(
                    path,
                    line,
                    format!("timestamp {} not after {}", vals[0], t_prev),
                ));
            }
        }
        let v = with_velocity.then(|| pt(vals[3], vals[4]));
        rows.push((vals[0], pt(vals[1], vals[2]), v));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "trajectory has no points"));
    }
    let n = rows.len();
    Ok((0..n)
        .map(|k| {
            let (t, p, v) = rows[k];
            let velocity = v.unwrap_or_else(|| {
                if n == 1 {
                    return Point::zeros();
                }
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                (rows[b].1 - rows[a].1) / (rows[b].0 - rows[a].0)
            });
            TrajectoryPoint {
                t_s: t,
                xy_m: p,
                velocity_mps: velocity,
            }
        })
        .collect())
}

/// Write a trajectory in the format accepted by [`load_trajectory`].
pub fn write_trajectory(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(["t_s", "x_m", "y_m", "vx_mps", "vy_mps"])
        .map_err(io)?;
    for p in points {
        w.write_record([
            format!("{:.3}", p.t_s),
            format!("{:.6}", p.xy_m.x),
            format!("{:.6}", p.xy_m.y),
            format!("{:.6}", p.velocity_mps.x),
            format!("{:.6}", p.velocity_mps.y),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parameters of the built-in urban drive generator: cruise segments at
/// piecewise-constant speed separated by short stops (intersections).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTrajectory {
    pub n_points: usize,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub segment_min_s: f64,
    pub segment_max_s: f64,
    pub stop_probability: f64,
    pub stop_min_s: f64,
    pub stop_max_s: f64,
    pub max_accel_mps2: f64,
    pub max_turn_deg_s: f64,
    /// Radius around the origin the path is steered back into.
    pub roam_radius_m: f64,
}

impl Default for SyntheticTrajectory {
    fn default() -> Self {
        Self {
            n_points: 1200,
            speed_min_mps: 5.0,
            speed_max_mps: 15.0,
            segment_min_s: 50.0,
            segment_max_s: 60.0,
            stop_probability: 1.0,
            stop_min_s: 10.0,
            stop_max_s: 12.0,
            max_accel_mps2: 2.5,
            max_turn_deg_s: 6.0,
            roam_radius_m: 700.0,
        }
    }
}

impl SyntheticTrajectory {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_points >= 1
            && self.speed_min_mps >= 0.0
            && self.speed_max_mps >= self.speed_min_mps
            && self.segment_min_s > 0.0
            && self.segment_max_s >= self.segment_min_s
            && (0.0..=1.0).contains(&self.stop_probability)
            && self.stop_min_s >= 0.0
            && self.stop_max_s >= self.stop_min_s
            && self.max_accel_mps2 > 0.0
            && self.max_turn_deg_s > 0.0
            && self.roam_radius_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid synthetic trajectory parameters: {self:?}"
            )))
        }
    }

    /// Generate `n_points` samples at 1 s spacing starting at the origin.
    pub fn generate(&self, seed: u64) -> Result<Vec<TrajectoryPoint>> {
        self.validate()?;
        const SUBSTEPS: usize = 20;
        let dt = 1.0 / SUBSTEPS as f64;
        let mut rng = rng_from(seed);
        let unit = Uniform::new_inclusive(0.0, 1.0);
        let lerp = |a: f64, b: f64, u: f64| a + (b - a) * u;
        let mut pos = Point::zeros();
        let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut target_heading = heading;
        let mut speed = 0.0;
        let mut target_speed = 0.0;
        let mut remaining = 0.0;
        let mut stopping = true;
        let max_turn = self.max_turn_deg_s.to_radians();
        let mut out = Vec::with_capacity(self.n_points);
        for k in 0..self.n_points {
            let velocity = Point::new(heading.cos(), heading.sin()) * speed;
            out.push(TrajectoryPoint {
                t_s: k as f64,
                xy_m: pos,
                velocity_mps: velocity,
            });
            for _ in 0..SUBSTEPS {
                if remaining <= 0.0 {
                    // Alternate cruise segments and optional stops.
                    if !stopping && rng.gen_bool(self.stop_probability) {
                        stopping = true;
                        target_speed = 0.0;
                        remaining = lerp(self.stop_min_s, self.stop_max_s, unit.sample(&mut rng));
                    } else {
                        stopping = false;
                        target_speed = lerp(
                            self.speed_min_mps,
                            self.speed_max_mps,
                            unit.sample(&mut rng),
                        );
                        remaining = lerp(
                            self.segment_min_s,
                            self.segment_max_s,
                            unit.sample(&mut rng),
                        );
                        let turn = rng.gen_range(-90f64..=90.0).to_radians();
                        target_heading = heading + turn;
                        if pos.norm() > self.roam_radius_m {
                            target_heading = (-pos.y).atan2(-pos.x);
                        }
                    }
                }
                let dv = (target_speed - speed)
                    .clamp(-self.max_accel_mps2 * dt, self.max_accel_mps2 * dt);
                speed += dv;
                if speed > 0.5 {
                    let dh =
                        crate::geom::wrap_deg((target_heading - heading).to_degrees()).to_radians();
                    heading += dh.clamp(-max_turn * dt, max_turn * dt);
                }
                pos += Point::new(heading.cos(), heading.sin()) * speed * dt;
                remaining -= dt;
            }
        }
        Ok(out)
    }
}
