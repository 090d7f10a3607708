#![allow(dead_code)]

use rand::Rng;
use transport_core::geometry::{Shape, SpatialDomain, Vec2};

/// Forward exit time by bisection on point membership; independent of the closed forms.
pub fn bisect_exit(domain: &SpatialDomain, x: Vec2, v: Vec2) -> f64 {
    let mut lo = 0.0;
    let mut hi = 2.0 * domain.diameter() / v.norm();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if domain.contains(x + v * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn hexagon() -> SpatialDomain {
    let verts = (0..6)
        .map(|k| Vec2::polar(1.0, k as f64 * std::f64::consts::PI / 3.0 + 0.1))
        .collect();
    SpatialDomain::polygon(verts).unwrap()
}

pub fn triangle() -> SpatialDomain {
    SpatialDomain::polygon(vec![
        Vec2::new(-1.0, -0.5),
        Vec2::new(1.5, -0.2),
        Vec2::new(0.1, 1.3),
    ])
    .unwrap()
}

pub fn domains_2d() -> Vec<SpatialDomain> {
    vec![
        SpatialDomain::unit_disk(),
        SpatialDomain::disk(Vec2::new(0.3, -1.2), 2.5).unwrap(),
        hexagon(),
        triangle(),
    ]
}

pub fn centre(domain: &SpatialDomain) -> Vec2 {
    match domain.shape() {
        Shape::Interval { a, b } => Vec2::scalar(0.5 * (a + b)),
        Shape::Disk { center, .. } => *center,
        Shape::Polygon { vertices, .. } => {
            vertices.iter().fold(Vec2::ZERO, |a, v| a + *v) * (1.0 / vertices.len() as f64)
        }
    }
}

/// Uniform interior point by rejection from a square around the centre. With
/// `shrink > 0` the point also stays inside after scaling away from the centre by
/// `1 + shrink`.
pub fn interior_point<R: Rng>(domain: &SpatialDomain, rng: &mut R, shrink: f64) -> Vec2 {
    let d = domain.diameter();
    let c = centre(domain);
    loop {
        let p = c + Vec2::new(rng.gen_range(-d..d), rng.gen_range(-d..d));
        let p = if domain.dim() == 1 {
            Vec2::scalar(p.x)
        } else {
            p
        };
        if domain.contains(p) && (shrink <= 0.0 || domain.contains(c + (p - c) * (1.0 + shrink))) {
            return p;
        }
    }
}

pub fn velocity<R: Rng>(rng: &mut R, smin: f64, smax: f64) -> Vec2 {
    let s = rng.gen_range(smin..smax);
    Vec2::polar(s, rng.gen_range(0.0..std::f64::consts::TAU))
}
