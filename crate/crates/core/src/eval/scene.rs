//! Seeded indoor test scenes built from axis-aligned boxes.

use nalgebra::Vector3;
use rand::Rng;

use crate::seed::rng_from_seed;

/// Mean spacing of surface samples in meters.
pub const SAMPLE_SPACING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn contains_strict(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    /// Whether `p` lies on one of the six faces within `tol`.
    pub fn on_boundary(&self, p: &Vector3<f64>, tol: f64) -> bool {
        let inside = (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol);
        inside && (0..3).any(|i| (p[i] - self.min[i]).abs() <= tol || (p[i] - self.max[i]).abs() <= tol)
    }

    /// Entry distance of a ray from outside, if it hits.
    fn ray_entry(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) / dir[i];
            let b = (self.max[i] - origin[i]) / dir[i];
            t_near = t_near.max(a.min(b));
            t_far = t_far.min(a.max(b));
        }
        (t_near <= t_far && t_near > 0.0).then_some(t_near)
    }

    /// Exit distance of a ray starting inside.
    fn ray_exit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        (0..3)
            .filter(|&i| dir[i] != 0.0)
            .map(|i| {
                let bound = if dir[i] > 0.0 { self.max[i] } else { self.min[i] };
                (bound - origin[i]) / dir[i]
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vector3<f64>,
    /// Unit normal pointing into free space.
    pub normal: Vector3<f64>,
}

/// Closed room with boxes and pillars standing on the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub room: Aabb,
    pub obstacles: Vec<Aabb>,
    pub samples: Vec<SurfacePoint>,
}

impl Scene {
    /// Distance to the first surface along a unit ray from a point inside
    /// the room.
    pub fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        self.obstacles
            .iter()
            .filter_map(|b| b.ray_entry(origin, dir))
            .fold(self.room.ray_exit(origin, dir), f64::min)
    }

    pub fn is_free(&self, p: &Vector3<f64>) -> bool {
        self.room.contains_strict(p) && !self.obstacles.iter().any(|b| b.contains_strict(p) || b.on_boundary(p, 0.0))
    }

    pub fn on_surface(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.room.on_boundary(p, tol) || self.obstacles.iter().any(|b| b.on_boundary(p, tol))
    }
}

const ROOM_HALF_X: f64 = 12.0;
const ROOM_HALF_Y: f64 = 8.0;
const ROOM_HEIGHT: f64 = 4.0;
/// Obstacles keep clear of the band |y| < this, where test paths run.
const CORRIDOR_HALF_WIDTH: f64 = 1.5;
const BOX_COUNT: usize = 10;
const PILLAR_COUNT: usize = 6;

fn side_offset(rng: &mut impl Rng, half_extent: f64) -> f64 {
    let lo = CORRIDOR_HALF_WIDTH + half_extent;
    let hi = ROOM_HALF_Y - 0.5 - half_extent;
    let y = rng.random_range(lo..hi);
    if rng.random::<bool>() {
        y
    } else {
        -y
    }
}

/// Scatters uniform random samples over the rectangle spanned by axes `u`
/// and `v` at fixed coordinate `w`, one per `SAMPLE_SPACING²` of area.
fn sample_face(
    out: &mut Vec<SurfacePoint>,
    rng: &mut impl Rng,
    axes: (usize, usize, usize),
    lo: (f64, f64),
    hi: (f64, f64),
    w: f64,
    normal_sign: f64,
) {
    let (u, v, n) = axes;
    let area = (hi.0 - lo.0) * (hi.1 - lo.1);
    let count = (area / (SAMPLE_SPACING * SAMPLE_SPACING)).ceil() as usize;
    let mut normal = Vector3::zeros();
    normal[n] = normal_sign;
    for _ in 0..count {
        let mut p = Vector3::zeros();
        p[u] = rng.random_range(lo.0..=hi.0);
        p[v] = rng.random_range(lo.1..=hi.1);
        p[n] = w;
        out.push(SurfacePoint { position: p, normal });
    }
}

fn sample_box(out: &mut Vec<SurfacePoint>, rng: &mut impl Rng, b: &Aabb, inward: bool, skip_bottom: bool) {
    let sign = if inward { -1.0 } else { 1.0 };
    for n in 0..3 {
        let (u, v) = ((n + 1) % 3, (n + 2) % 3);
        let lo = (b.min[u], b.min[v]);
        let hi = (b.max[u], b.max[v]);
        if !(skip_bottom && n == 2) {
            sample_face(out, rng, (u, v, n), lo, hi, b.min[n], -sign);
        }
        sample_face(out, rng, (u, v, n), lo, hi, b.max[n], sign);
    }
}

/// Builds the scene for `seed`. The room is fixed; box and pillar layout
/// comes from the seed.
pub fn generate_scene(seed: u64) -> Scene {
    let mut rng = rng_from_seed(seed);
    let room = Aabb::new(
        Vector3::new(-ROOM_HALF_X, -ROOM_HALF_Y, 0.0),
        Vector3::new(ROOM_HALF_X, ROOM_HALF_Y, ROOM_HEIGHT),
    );
    let mut obstacles = Vec::with_capacity(BOX_COUNT + PILLAR_COUNT);
    for _ in 0..BOX_COUNT {
        let half = Vector3::new(rng.random_range(0.25..1.0), rng.random_range(0.25..1.0), 0.0);
        let height = rng.random_range(0.5..2.5);
        let cx = rng.random_range(-ROOM_HALF_X + 1.5..ROOM_HALF_X - 1.5);
        let cy = side_offset(&mut rng, half.y);
        obstacles.push(Aabb::new(
            Vector3::new(cx - half.x, cy - half.y, 0.0),
            Vector3::new(cx + half.x, cy + half.y, height),
        ));
    }
    for _ in 0..PILLAR_COUNT {
        let cx = rng.random_range(-ROOM_HALF_X + 1.0..ROOM_HALF_X - 1.0);
        let cy = side_offset(&mut rng, 0.2);
        obstacles.push(Aabb::new(Vector3::new(cx - 0.2, cy - 0.2, 0.0), Vector3::new(cx + 0.2, cy + 0.2, ROOM_HEIGHT)));
    }

    let mut samples = Vec::new();
    sample_box(&mut samples, &mut rng, &room, true, false);
    for b in &obstacles {
        sample_box(&mut samples, &mut rng, b, false, true);
    }
    samples.retain(|s| !obstacles.iter().any(|b| b.contains_strict(&s.position)));
    Scene { seed, room, obstacles, samples }
}
