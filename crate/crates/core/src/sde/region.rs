use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};

/// Slab `{x : -back_depth < x·ℓ < front}`, optionally truncated laterally to
/// `|Π_ℓ(x)| < lateral` where `Π_ℓ` projects on the orthogonal complement
/// of `ℓ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlabRegion {
    pub ell: Vec<f64>,
    pub back_depth: f64,
    pub front: f64,
    pub lateral: Option<f64>,
}

impl SlabRegion {
    pub fn new(ell: Vec<f64>, back_depth: f64, front: f64, lateral: Option<f64>) -> Result<Self> {
        if !linalg::is_unit(&ell, 1e-12) {
            return Err(Error::config("slab direction ell must be a unit vector"));
        }
        if !(back_depth > 0.0) || !(front > 0.0) {
            return Err(Error::config("slab depths must be positive"));
        }
        if let Some(l) = lateral {
            if !(l > 0.0) {
                return Err(Error::config("lateral bound must be positive when present"));
            }
        }
        Ok(SlabRegion { ell, back_depth, front, lateral })
    }

    /// Symmetric interval `(-h, h)` in one dimension.
    pub fn interval(h: f64) -> Result<Self> {
        SlabRegion::new(vec![1.0], h, h, None)
    }

    pub fn along(&self, x: &[f64]) -> f64 {
        linalg::dot(x, &self.ell)
    }
}

/// Exit face labels. `Lateral` covers the lateral slab truncation and the
/// whole boundary of box/ball regions; `Timeout` marks paths stopped at the
/// time horizon while still inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitFace {
    Front,
    Back,
    Lateral,
    Timeout,
}

impl ExitFace {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExitFace::Front => "front",
            ExitFace::Back => "back",
            ExitFace::Lateral => "lateral",
            ExitFace::Timeout => "timeout",
        }
    }
}

/// Stopping geometry for first-exit simulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Region {
    Slab(SlabRegion),
    /// Axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::config("ball radius must be positive"));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::config("box must satisfy lo < hi componentwise"));
        }
        Ok(Region::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Slab(s) => s.ell.len(),
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Slab(s) => {
                let along = s.along(x);
                if along <= -s.back_depth || along >= s.front {
                    return false;
                }
                match s.lateral {
                    Some(lat) => linalg::orthogonal_norm(x, &s.ell) < lat,
                    None => true,
                }
            }
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| *xi > *l && *xi < *h),
            Region::Ball { center, radius } => linalg::dist(x, center) < *radius,
        }
    }

    /// Distance from an interior point to the boundary (positive inside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Slab(s) => {
                let along = s.along(x);
                let mut d = (s.front - along).min(along + s.back_depth);
                if let Some(lat) = s.lateral {
                    d = d.min(lat - linalg::orthogonal_norm(x, &s.ell));
                }
                d
            }
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| (xi - l).min(h - xi))
                .fold(f64::INFINITY, f64::min),
            Region::Ball { center, radius } => radius - linalg::dist(x, center),
        }
    }

    /// Smallest enclosing axis-aligned box (for occupation grids).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Slab(s) => {
                // conservative: extent front/back along ell and lateral across
                let d = s.ell.len();
                let reach = s.front.max(s.back_depth) + s.lateral.unwrap_or(0.0);
                (vec![-reach; d], vec![reach; d])
            }
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Place `x_new` (the first iterate outside) on the nearest crossed
    /// face: planar faces get orthogonal projection, curved faces radial
    /// projection.
    pub(crate) fn place_on_boundary(&self, x_new: &[f64]) -> (ExitFace, Vec<f64>) {
        match self {
            Region::Slab(s) => {
                let along = s.along(x_new);
                let mut best = (ExitFace::Front, f64::INFINITY);
                if along >= s.front {
                    best = (ExitFace::Front, along - s.front);
                }
                if along <= -s.back_depth {
                    let viol = -s.back_depth - along;
                    if viol < best.1 {
                        best = (ExitFace::Back, viol);
                    }
                }
                if let Some(lat) = s.lateral {
                    let pn = linalg::orthogonal_norm(x_new, &s.ell);
                    if pn >= lat {
                        let viol = pn - lat;
                        if viol < best.1 {
                            best = (ExitFace::Lateral, viol);
                        }
                    }
                }
                debug_assert!(best.1.is_finite(), "place_on_boundary on interior point");
                let mut pos = x_new.to_vec();
                match best.0 {
                    ExitFace::Front => {
                        linalg::add_scaled(&mut pos, &s.ell, s.front - along);
                    }
                    ExitFace::Back => {
                        linalg::add_scaled(&mut pos, &s.ell, -s.back_depth - along);
                    }
                    ExitFace::Lateral => {
                        let lat = s.lateral.expect("lateral face requires bound");
                        let pn = linalg::orthogonal_norm(x_new, &s.ell);
                        // rescale the orthogonal component onto the cylinder
                        let scale = lat / pn;
                        for (p, l) in pos.iter_mut().zip(&s.ell) {
                            let along_part = along * l;
                            *p = along_part + (*p - along_part) * scale;
                        }
                    }
                    ExitFace::Timeout => unreachable!(),
                }
                (best.0, pos)
            }
            Region::Box { lo, hi } => {
                let mut face_axis = 0usize;
                let mut face_hi = true;
                let mut best = f64::INFINITY;
                for (i, (xi, (l, h))) in x_new.iter().zip(lo.iter().zip(hi)).enumerate() {
                    if *xi >= *h && xi - h < best {
                        best = xi - h;
                        face_axis = i;
                        face_hi = true;
                    }
                    if *xi <= *l && l - xi < best {
                        best = l - xi;
                        face_axis = i;
                        face_hi = false;
                    }
                }
                debug_assert!(best.is_finite());
                let mut pos = x_new.to_vec();
                pos[face_axis] = if face_hi { hi[face_axis] } else { lo[face_axis] };
                (ExitFace::Lateral, pos)
            }
            Region::Ball { center, radius } => {
                let dist = linalg::dist(x_new, center);
                let scale = radius / dist;
                let pos = x_new
                    .iter()
                    .zip(center)
                    .map(|(xi, c)| c + (xi - c) * scale)
                    .collect();
                (ExitFace::Lateral, pos)
            }
        }
    }

    /// Brownian-bridge crossing test over one step with both endpoints
    /// inside: for each planar face, the bridge crosses with probability
    /// `exp(-2 d₁ d₂ / (q dt))` where `d₁`, `d₂` are the distances of the
    /// endpoints to the face and `q = n·a·n` for the face normal `n`.
    /// Curved faces (ball boundary, slab lateral cylinder) are not bridged.
    pub(crate) fn bridge_exit(
        &self,
        x_prev: &[f64],
        x_new: &[f64],
        a: &Matrix,
        dt: f64,
        rng: &mut CounterRng,
    ) -> Option<(ExitFace, Vec<f64>)> {
        match self {
            Region::Slab(s) => {
                let q = a.quadratic_form(&s.ell);
                let a1 = s.along(x_prev);
                let a2 = s.along(x_new);
                // front face x·ℓ = front
                let p_front = bridge_probability(s.front - a1, s.front - a2, q, dt);
                if p_front > 0.0 && rng.uniform() < p_front {
                    let mut pos = x_new.to_vec();
                    linalg::add_scaled(&mut pos, &s.ell, s.front - a2);
                    return Some((ExitFace::Front, pos));
                }
                // back face x·ℓ = -back_depth
                let p_back = bridge_probability(a1 + s.back_depth, a2 + s.back_depth, q, dt);
                if p_back > 0.0 && rng.uniform() < p_back {
                    let mut pos = x_new.to_vec();
                    linalg::add_scaled(&mut pos, &s.ell, -s.back_depth - a2);
                    return Some((ExitFace::Back, pos));
                }
                None
            }
            Region::Box { lo, hi } => {
                for i in 0..lo.len() {
                    let q = a.get(i, i);
                    let p_hi = bridge_probability(hi[i] - x_prev[i], hi[i] - x_new[i], q, dt);
                    if p_hi > 0.0 && rng.uniform() < p_hi {
                        let mut pos = x_new.to_vec();
                        pos[i] = hi[i];
                        return Some((ExitFace::Lateral, pos));
                    }
                    let p_lo = bridge_probability(x_prev[i] - lo[i], x_new[i] - lo[i], q, dt);
                    if p_lo > 0.0 && rng.uniform() < p_lo {
                        let mut pos = x_new.to_vec();
                        pos[i] = lo[i];
                        return Some((ExitFace::Lateral, pos));
                    }
                }
                None
            }
            Region::Ball { .. } => None,
        }
    }
}

#[inline]
fn bridge_probability(d1: f64, d2: f64, q: f64, dt: f64) -> f64 {
    debug_assert!(d1 > 0.0 && d2 > 0.0, "bridge endpoints must be inside");
    let exponent = -2.0 * d1 * d2 / (q * dt);
    // far from the face the crossing probability underflows any uniform draw
    if exponent < -40.0 {
        return 0.0;
    }
    exponent.exp()
}
