//! Sampling geometries: tensor grids (equispaced, jittered, random) and the
//! polar-type grids (polar, modified polar, linogram, golden-angle variants).
//!
//! Randomized kinds draw from a ChaCha12 stream seeded with the request seed;
//! uniform reals come from the top 53 bits of each 64-bit word, so the same
//! seed reproduces the same set bit-exactly on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;
use std::io::Write;

use crate::domain::SamplingSet;
use crate::{domain_err, Result};

/// A grid specification. Polar kinds are two-dimensional by construction;
/// tensor kinds take one size per axis (d ∈ {1, 2, 3}).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridRequest {
    Equispaced { sizes: Vec<usize> },
    Jittered { sizes: Vec<usize>, seed: u64 },
    Random { sizes: Vec<usize>, seed: u64 },
    Polar { radii: usize, angles: usize },
    ModifiedPolar { radii: usize, angles: usize },
    Linogram { radii: usize, angles: usize },
    GoldenPolar { radii: usize, angles: usize },
    GoldenLinogram { radii: usize, angles: usize },
}

fn check_sizes(sizes: &[usize], even: bool) -> Result<()> {
    if sizes.is_empty() || sizes.len() > 3 {
        return domain_err("tensor grids take 1 to 3 per-axis sizes");
    }
    for &n in sizes {
        if n == 0 || (even && n % 2 != 0) {
            return domain_err(format!("invalid per-axis size {n}"));
        }
    }
    Ok(())
}

fn check_polar(radii: usize, angles: usize) -> Result<()> {
    if radii == 0 || radii % 2 != 0 || angles == 0 || angles % 2 != 0 {
        return domain_err(format!(
            "polar grids need even positive sizes, got R={radii}, T={angles}"
        ));
    }
    Ok(())
}

fn uniform01(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform draw from [-1, 1) with 53-bit resolution.
fn eta(rng: &mut ChaCha12Rng) -> f64 {
    2.0 * uniform01(rng) - 1.0
}

fn signed_range(n: usize) -> std::ops::Range<i64> {
    -(n as i64) / 2..n as i64 / 2
}

/// Golden-angle sequence, reduced to `[-π/2, π/2)`.
fn golden_angle(t: usize) -> f64 {
    let increment = 2.0 * PI / (1.0 + 5.0f64.sqrt());
    (PI / 2.0 + t as f64 * increment).rem_euclid(PI) - PI / 2.0
}

pub fn generate_grid(req: &GridRequest) -> Result<SamplingSet> {
    match req {
        GridRequest::Equispaced { sizes } => {
            check_sizes(sizes, true)?;
            let d = sizes.len();
            let mut coords = Vec::new();
            tensor_visit(sizes, &mut |idx| {
                for (t, &i) in idx.iter().enumerate() {
                    coords.push(i as f64 / sizes[t] as f64);
                }
            });
            SamplingSet::new(d, coords)
        }
        GridRequest::Jittered { sizes, seed } => {
            check_sizes(sizes, false)?;
            let d = sizes.len();
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            let mut coords = Vec::new();
            tensor_visit_cells(sizes, &mut |cell| {
                for (t, &i) in cell.iter().enumerate() {
                    let n = sizes[t] as f64;
                    let center = -0.5 + (2.0 * i as f64 + 1.0) / (2.0 * n);
                    coords.push(center + eta(&mut rng) / n);
                }
            });
            SamplingSet::new(d, coords)
        }
        GridRequest::Random { sizes, seed } => {
            check_sizes(sizes, false)?;
            let d = sizes.len();
            let n_total: usize = sizes.iter().product();
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            let coords: Vec<f64> = (0..n_total * d).map(|_| 0.5 * eta(&mut rng)).collect();
            SamplingSet::new(d, coords)
        }
        GridRequest::Polar { radii, angles } => {
            check_polar(*radii, *angles)?;
            let mut coords = Vec::new();
            for t in signed_range(*angles) {
                let theta = PI * t as f64 / *angles as f64;
                let (sin_t, cos_t) = theta.sin_cos();
                for j in signed_range(*radii) {
                    let r = j as f64 / *radii as f64;
                    coords.push(r * cos_t);
                    coords.push(r * sin_t);
                }
            }
            SamplingSet::new(2, coords)
        }
        GridRequest::ModifiedPolar { radii, angles } => {
            check_polar(*radii, *angles)?;
            let mut coords = Vec::new();
            for t in signed_range(*angles) {
                let theta = PI * t as f64 / *angles as f64;
                let (sin_t, cos_t) = theta.sin_cos();
                for j in signed_range(extended_radii(*radii)) {
                    let r = j as f64 / *radii as f64;
                    let (x, y) = (r * cos_t, r * sin_t);
                    if in_unit_square(x) && in_unit_square(y) {
                        coords.push(x);
                        coords.push(y);
                    }
                }
            }
            SamplingSet::new(2, coords)
        }
        GridRequest::Linogram { radii, angles } => {
            check_polar(*radii, *angles)?;
            let mut coords = Vec::new();
            for t in signed_range(angles / 2) {
                let slope = 4.0 * t as f64 / *angles as f64;
                for j in signed_range(*radii) {
                    let r = j as f64 / *radii as f64;
                    coords.push(r);
                    coords.push(slope * r);
                }
            }
            for t in signed_range(angles / 2) {
                let slope = 4.0 * t as f64 / *angles as f64;
                for j in signed_range(*radii) {
                    let r = j as f64 / *radii as f64;
                    coords.push(-slope * r);
                    coords.push(r);
                }
            }
            SamplingSet::new(2, coords)
        }
        GridRequest::GoldenPolar { radii, angles } => {
            check_polar(*radii, *angles)?;
            let mut coords = Vec::new();
            for t in 0..*angles {
                let theta = golden_angle(t);
                let (sin_t, cos_t) = theta.sin_cos();
                for j in signed_range(*radii) {
                    let r = j as f64 / *radii as f64;
                    coords.push(r * cos_t);
                    coords.push(r * sin_t);
                }
            }
            SamplingSet::new(2, coords)
        }
        GridRequest::GoldenLinogram { radii, angles } => {
            check_polar(*radii, *angles)?;
            let mut coords = Vec::new();
            for t in 0..*angles {
                let theta = golden_angle(t);
                let u = theta - PI / 4.0;
                for j in signed_range(*radii) {
                    let s = (2.0 * j as f64 + 1.0) / (2.0 * *radii as f64);
                    if theta >= 0.0 {
                        coords.push(s);
                        coords.push(s * u.tan());
                    } else {
                        coords.push(-s * (u.cos() / u.sin()));
                        coords.push(s);
                    }
                }
            }
            SamplingSet::new(2, coords)
        }
    }
}

/// Radius count of the modified polar grid: `⌈√2·R⌉` rounded up to even, so
/// the signed index set is well defined.
pub fn extended_radii(radii: usize) -> usize {
    let n = (2.0f64.sqrt() * radii as f64).ceil() as usize;
    n + n % 2
}

fn in_unit_square(c: f64) -> bool {
    (-0.5..0.5).contains(&c)
}

fn tensor_visit(sizes: &[usize], f: &mut impl FnMut(&[i64])) {
    let mut idx = vec![0i64; sizes.len()];
    visit_rec(sizes, 0, &mut idx, &mut |idx| f(idx));
}

fn visit_rec(sizes: &[usize], axis: usize, idx: &mut Vec<i64>, f: &mut impl FnMut(&[i64])) {
    if axis == sizes.len() {
        f(idx);
        return;
    }
    for i in signed_range(sizes[axis]) {
        idx[axis] = i;
        visit_rec(sizes, axis + 1, idx, f);
    }
}

fn tensor_visit_cells(sizes: &[usize], f: &mut impl FnMut(&[usize])) {
    let mut idx = vec![0usize; sizes.len()];
    visit_cells_rec(sizes, 0, &mut idx, f);
}

fn visit_cells_rec(sizes: &[usize], axis: usize, idx: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if axis == sizes.len() {
        f(idx);
        return;
    }
    for i in 0..sizes[axis] {
        idx[axis] = i;
        visit_cells_rec(sizes, axis + 1, idx, f);
    }
}

/// Writes one row per point with `d` columns; the decimal formatting is the
/// shortest representation that round-trips to the same double.
pub fn write_points_csv<W: Write>(set: &SamplingSet, out: &mut W) -> Result<()> {
    let header: Vec<String> = (1..=set.dim()).map(|t| format!("x{t}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in set.iter() {
        let row: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_count_and_radius() {
        let set = generate_grid(&GridRequest::Polar { radii: 12, angles: 24 }).unwrap();
        assert_eq!(set.len(), 288);
        for p in set.iter() {
            assert!((p[0] * p[0] + p[1] * p[1]).sqrt() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn linogram_count_and_max_norm() {
        let radii = 12;
        let set = generate_grid(&GridRequest::Linogram { radii, angles: 24 }).unwrap();
        assert_eq!(set.len(), 288);
        for p in set.iter() {
            let max_norm = p[0].abs().max(p[1].abs());
            assert!(max_norm <= 0.5 + 1e-12);
            // max-norm is |j|/R, an integer multiple of 1/R.
            let scaled = max_norm * radii as f64;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn modified_polar_filtered_against_oracle() {
        let radii = 12usize;
        let angles = 24usize;
        let set = generate_grid(&GridRequest::ModifiedPolar { radii, angles }).unwrap();
        // Direct construction-and-filter oracle.
        let mut count = 0usize;
        let nr = extended_radii(radii);
        assert_eq!(nr, 18);
        for t in -(angles as i64) / 2..angles as i64 / 2 {
            let theta = PI * t as f64 / angles as f64;
            for j in -(nr as i64) / 2..nr as i64 / 2 {
                let r = j as f64 / radii as f64;
                let (x, y) = (r * theta.cos(), r * theta.sin());
                if (-0.5..0.5).contains(&x) && (-0.5..0.5).contains(&y) {
                    count += 1;
                }
            }
        }
        assert_eq!(set.len(), count);
        assert!(set.len() < nr * angles);
        for p in set.iter() {
            assert!((-0.5..0.5).contains(&p[0]) && (-0.5..0.5).contains(&p[1]));
        }
    }

    #[test]
    fn equispaced_is_exact_lattice() {
        let set = generate_grid(&GridRequest::Equispaced { sizes: vec![8] }).unwrap();
        assert_eq!(set.len(), 8);
        for (i, p) in set.iter().enumerate() {
            assert_eq!(p[0], (i as i64 - 4) as f64 / 8.0);
        }
    }

    #[test]
    fn seeded_kinds_are_reproducible() {
        for req in [
            GridRequest::Jittered { sizes: vec![9, 7], seed: 424242 },
            GridRequest::Random { sizes: vec![50], seed: 424242 },
        ] {
            let a = generate_grid(&req).unwrap();
            let b = generate_grid(&req).unwrap();
            assert_eq!(a, b);
        }
        let a = generate_grid(&GridRequest::Random { sizes: vec![50], seed: 1 }).unwrap();
        let b = generate_grid(&GridRequest::Random { sizes: vec![50], seed: 2 }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn golden_angles_in_range() {
        for t in 0..4096 {
            let theta = golden_angle(t);
            assert!((-PI / 2.0..PI / 2.0).contains(&theta));
        }
        let set = generate_grid(&GridRequest::GoldenLinogram { radii: 12, angles: 24 }).unwrap();
        assert_eq!(set.len(), 288);
        let polar = generate_grid(&GridRequest::GoldenPolar { radii: 12, angles: 24 }).unwrap();
        assert_eq!(polar.len(), 288);
    }

    #[test]
    fn invalid_requests_rejected() {
        assert!(generate_grid(&GridRequest::Polar { radii: 11, angles: 24 }).is_err());
        assert!(generate_grid(&GridRequest::Equispaced { sizes: vec![] }).is_err());
        assert!(generate_grid(&GridRequest::Equispaced { sizes: vec![7] }).is_err());
        assert!(generate_grid(&GridRequest::Random { sizes: vec![4, 4, 4, 4], seed: 0 }).is_err());
    }

    #[test]
    fn csv_roundtrips_doubles() {
        let set = generate_grid(&GridRequest::Random { sizes: vec![20], seed: 9 }).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, p) in text.lines().skip(1).zip(set.iter()) {
            let parsed: f64 = line.parse().unwrap();
            assert_eq!(parsed, p[0]);
        }
    }
}
