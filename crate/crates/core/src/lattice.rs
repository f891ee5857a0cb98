// SPDX-License-Identifier: Apache-2.0

//! Diamond lattice geometry.
//!
//! Sites are addressed by integer vectors in units of a0/4. With the origin
//! on sublattice A, sublattice A holds the FCC points (all components even,
//! sum divisible by 4) and sublattice B the points shifted by (1,1,1) (all
//! components odd, sum = 3 mod 4).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{HyperfineCouplings, PhysicalConstants};
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Largest radius accepted by [`enumerate_sites`].
pub const MAX_ENUMERATION_RADIUS: f64 = 5e-9;

/// Closest approach accepted by the point-dipole hyperfine model.
pub const MIN_HYPERFINE_RADIUS: f64 = 0.5e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    /// Position in units of a0/4.
    pub index: [i32; 3],
    /// Position in m.
    pub cartesian: Vec3,
}

impl LatticeSite {
    /// Builds a site, rejecting integer vectors that are not diamond sites.
    pub fn new(index: [i32; 3], a0: f64) -> Result<Self> {
        if !is_diamond_site(index) {
            return Err(Error::InvalidArgument(format!("{index:?} is not a diamond lattice site")));
        }
        let q = a0 / 4.0;
        Ok(Self {
            index,
            cartesian: [index[0] as f64 * q, index[1] as f64 * q, index[2] as f64 * q],
        })
    }

    pub fn sublattice(&self) -> Sublattice {
        if (self.index[0] + self.index[1] + self.index[2]).rem_euclid(2) == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    pub fn radius(&self) -> f64 {
        vec3::norm(&self.cartesian)
    }
}

pub fn is_diamond_site(v: [i32; 3]) -> bool {
    let sum = v[0] + v[1] + v[2];
    let all_even = v.iter().all(|x| x.rem_euclid(2) == 0);
    let all_odd = v.iter().all(|x| x.rem_euclid(2) == 1);
    (all_even && sum.rem_euclid(4) == 0) || (all_odd && sum.rem_euclid(4) == 3)
}

/// Differences between two diamond sites: every all-odd vector, plus the
/// FCC vectors.
pub fn is_pair_displacement(v: [i32; 3]) -> bool {
    let all_even = v.iter().all(|x| x.rem_euclid(2) == 0);
    let all_odd = v.iter().all(|x| x.rem_euclid(2) == 1);
    all_odd || (all_even && (v[0] + v[1] + v[2]).rem_euclid(4) == 0 && v != [0, 0, 0])
}

fn norm2(v: [i32; 3]) -> i64 {
    v.iter().map(|&x| (x as i64) * (x as i64)).sum()
}

/// All sites with 0 < |r| <= `max_radius`, ordered by radius then by index.
pub fn enumerate_sites(max_radius: f64, constants: &PhysicalConstants) -> Result<Vec<LatticeSite>> {
    enumerate_sites_with_cap(max_radius, MAX_ENUMERATION_RADIUS, constants)
}

pub fn enumerate_sites_with_cap(
    max_radius: f64,
    cap: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<LatticeSite>> {
    if !(max_radius > 0.0 && max_radius.is_finite()) {
        return Err(Error::InvalidArgument(String::from("max_radius must be positive")));
    }
    if max_radius > cap {
        return Err(Error::EnumerationTooLarge { radius: max_radius, cap });
    }
    let q = constants.a0 / 4.0;
    let bound = Float::floor(max_radius / q) as i32;
    let limit = max_radius / q;
    let mut sites = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            for z in -bound..=bound {
                let v = [x, y, z];
                if v == [0, 0, 0] || !is_diamond_site(v) {
                    continue;
                }
                // Compare in index units so the cut does not depend on rounding of a0/4.
                if (norm2(v) as f64) <= limit * limit * (1.0 + 1e-12) {
                    sites.push(LatticeSite::new(v, constants.a0)?);
                }
            }
        }
    }
    sites.sort_by(|a, b| norm2(a.index).cmp(&norm2(b.index)).then(a.index.cmp(&b.index)));
    Ok(sites)
}

/// Secular point-dipole hyperfine parameters of a 13C at `position`.
///
/// a_par = K (3 cos^2 t - 1) / r^3 and a_perp = K |3 sin t cos t| / r^3 with
/// K = (mu0/4pi) gamma_e gamma_n hbar. `phi` is the azimuth of the position
/// about `nv_axis`, shifted by pi when cos t < 0 so that a_perp stays
/// non-negative and `(cos phi, sin phi)` is the direction of the transverse
/// hyperfine field.
pub fn hyperfine_from_position(
    position: &Vec3,
    nv_axis: &Vec3,
    constants: &PhysicalConstants,
) -> Result<HyperfineCouplings> {
    let r = vec3::norm(position);
    if !(r.is_finite() && r >= MIN_HYPERFINE_RADIUS) {
        return Err(Error::SingularPosition);
    }
    let axis = vec3::normalized(nv_axis)
        .ok_or_else(|| Error::InvalidArgument(String::from("nv_axis must be nonzero")))?;
    let cos_t = (vec3::dot(position, &axis) / r).clamp(-1.0, 1.0);
    let sin_t = Float::sqrt((1.0 - cos_t * cos_t).max(0.0));
    let k = constants.hyperfine_prefactor() / (r * r * r);
    let a_par = k * (3.0 * cos_t * cos_t - 1.0);
    let transverse = 3.0 * k * sin_t * cos_t;
    let (e1, e2) = vec3::perpendicular_frame(&axis);
    let mut phi = Float::atan2(vec3::dot(position, &e2), vec3::dot(position, &e1));
    if transverse < 0.0 {
        phi += core::f64::consts::PI;
    }
    Ok(HyperfineCouplings { a_par, a_perp: transverse.abs(), phi: wrap_angle(phi) })
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    use core::f64::consts::PI;
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Signed nuclear dipolar coupling for a pair separated by `displacement`:
/// omega_D = (3/4) (mu0 hbar / 4pi) gamma_n^2 / r^3 (1 - 3 cos^2 t).
pub fn dipolar_coupling(
    displacement: &Vec3,
    field_axis: &Vec3,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let r = vec3::norm(displacement);
    if r == 0.0 {
        return Err(Error::CoincidentNuclei);
    }
    let axis = vec3::normalized(field_axis)
        .ok_or_else(|| Error::InvalidArgument(String::from("field axis must be nonzero")))?;
    let cos_t = vec3::dot(displacement, &axis) / r;
    Ok(0.75 * constants.nuclear_dipolar_prefactor() / (r * r * r) * (1.0 - 3.0 * cos_t * cos_t))
}

pub fn pair_coupling(
    site_i: &LatticeSite,
    site_j: &LatticeSite,
    field_axis: &Vec3,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if site_i.index == site_j.index {
        return Err(Error::CoincidentNuclei);
    }
    let d = vec3::sub(&site_i.cartesian, &site_j.cartesian);
    dipolar_coupling(&d, field_axis, constants)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    /// Representative displacement in a0/4 units.
    pub displacement: [i32; 3],
    /// Shell number, 1 = nearest neighbours.
    pub shell: usize,
    pub shell_label: String,
    /// Unordered pair orientations in the class.
    pub multiplicity: usize,
    pub distance: f64,
    /// Angle between the representative displacement and the field axis.
    pub angle_to_field: f64,
    /// Signed omega_D in rad/s.
    pub omega_d: f64,
}

impl PairCandidate {
    pub fn omega_d_hz(&self) -> f64 {
        self.omega_d / (2.0 * core::f64::consts::PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidateTable {
    pub field_axis: Vec3,
    pub entries: Vec<PairCandidate>,
}

pub fn shell_label(shell: usize) -> String {
    match shell {
        1 => String::from("NN"),
        n => {
            let suffix = match (n % 10, n % 100) {
                (1, r) if r != 11 => "st",
                (2, r) if r != 12 => "nd",
                (3, r) if r != 13 => "rd",
                _ => "th",
            };
            format!("{n}{suffix}-shell")
        }
    }
}

/// The 48 signed permutation matrices of the cubic group, applied to integer vectors.
fn cubic_group() -> Vec<[[i32; 3]; 3]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for p in PERMS {
        for signs in 0..8 {
            let mut m = [[0i32; 3]; 3];
            for row in 0..3 {
                let s = if signs & (1 << row) != 0 { -1 } else { 1 };
                m[row][p[row]] = s;
            }
            out.push(m);
        }
    }
    out
}

fn apply_int(m: &[[i32; 3]; 3], v: [i32; 3]) -> [i32; 3] {
    let mut out = [0; 3];
    for (row, o) in out.iter_mut().enumerate() {
        *o = m[row][0] * v[0] + m[row][1] * v[1] + m[row][2] * v[2];
    }
    out
}

fn apply_real(m: &[[i32; 3]; 3], v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (row, o) in out.iter_mut().enumerate() {
        *o = m[row][0] as f64 * v[0] + m[row][1] as f64 * v[1] + m[row][2] as f64 * v[2];
    }
    out
}

/// Cubic operations mapping the field axis onto itself or its negative,
/// which leave every omega_D unchanged.
fn field_stabilizer(axis: &Vec3) -> Vec<[[i32; 3]; 3]> {
    cubic_group()
        .into_iter()
        .filter(|m| {
            let image = apply_real(m, axis);
            let plus = vec3::norm(&vec3::sub(&image, axis));
            let minus = vec3::norm(&[image[0] + axis[0], image[1] + axis[1], image[2] + axis[2]]);
            plus < 1e-9 || minus < 1e-9
        })
        .collect()
}

/// The first `max_shell` distinct squared lengths of pair displacements, in
/// (a0/4)^2 units, with all vectors of each length.
fn displacement_shells(max_shell: usize) -> Vec<(i64, Vec<[i32; 3]>)> {
    let mut bound = 4;
    loop {
        let mut by_norm: alloc::collections::BTreeMap<i64, Vec<[i32; 3]>> = Default::default();
        for x in -bound..=bound {
            for y in -bound..=bound {
                for z in -bound..=bound {
                    let v = [x, y, z];
                    if is_pair_displacement(v) {
                        by_norm.entry(norm2(v)).or_default().push(v);
                    }
                }
            }
        }
        // Shells are complete only up to the inscribed sphere of the box.
        let complete: Vec<_> = by_norm
            .into_iter()
            .filter(|(n2, _)| *n2 <= (bound as i64) * (bound as i64))
            .collect();
        if complete.len() >= max_shell {
            return complete.into_iter().take(max_shell).collect();
        }
        bound *= 2;
    }
}

/// Symmetry-distinct displacement classes of the first `max_shell` shells
/// with their dipolar frequencies, sorted by |omega_D| descending.
pub fn enumerate_pair_frequencies(
    max_shell: usize,
    field_axis: &Vec3,
    constants: &PhysicalConstants,
) -> Result<PairCandidateTable> {
    if max_shell == 0 {
        return Err(Error::InvalidArgument(String::from("max_shell must be at least 1")));
    }
    let axis = vec3::normalized(field_axis)
        .ok_or_else(|| Error::InvalidArgument(String::from("field axis must be nonzero")))?;
    let group = field_stabilizer(&axis);
    let q = constants.a0 / 4.0;
    let mut entries = Vec::new();
    for (shell_idx, (_, vectors)) in displacement_shells(max_shell).into_iter().enumerate() {
        let mut seen: BTreeSet<[i32; 3]> = BTreeSet::new();
        for v in vectors {
            if seen.contains(&v) {
                continue;
            }
            let mut orbit: BTreeSet<[i32; 3]> = BTreeSet::new();
            for m in &group {
                let w = apply_int(m, v);
                orbit.insert(w);
                orbit.insert([-w[0], -w[1], -w[2]]);
            }
            seen.extend(orbit.iter().copied());
            let rep = *orbit.iter().next_back().expect("orbit contains v");
            let cart = [rep[0] as f64 * q, rep[1] as f64 * q, rep[2] as f64 * q];
            let distance = vec3::norm(&cart);
            let angle = Float::acos((vec3::dot(&cart, &axis) / distance).clamp(-1.0, 1.0));
            let omega_d = dipolar_coupling(&cart, &axis, constants)?;
            entries.push(PairCandidate {
                displacement: rep,
                shell: shell_idx + 1,
                shell_label: shell_label(shell_idx + 1),
                multiplicity: orbit.len() / 2,
                distance,
                angle_to_field: angle,
                omega_d,
            });
        }
    }
    entries.sort_by(|a, b| {
        b.omega_d
            .abs()
            .total_cmp(&a.omega_d.abs())
            .then(a.shell.cmp(&b.shell))
            .then(b.displacement.cmp(&a.displacement))
    });
    Ok(PairCandidateTable { field_axis: axis, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    /// Builds the crystal from the conventional cubic cell: FCC corners and
    /// face centers plus the (1,1,1) basis atom, translated by whole cells.
    fn oracle_sites(max_radius: f64) -> Vec<[i32; 3]> {
        let basis = [[0, 0, 0], [2, 2, 0], [2, 0, 2], [0, 2, 2]];
        let q = consts().a0 / 4.0;
        let cells = (max_radius / consts().a0).ceil() as i32 + 1;
        let mut out = Vec::new();
        for i in -cells..=cells {
            for j in -cells..=cells {
                for k in -cells..=cells {
                    for b in basis {
                        for off in [[0, 0, 0], [1, 1, 1]] {
                            let v = [4 * i + b[0] + off[0], 4 * j + b[1] + off[1], 4 * k + b[2] + off[2]];
                            let r = q * (norm2(v) as f64).sqrt();
                            if v != [0, 0, 0] && r <= max_radius {
                                out.push(v);
                            }
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn nearest_neighbour_shell() {
        let sites = enumerate_sites(1.6e-10, &consts()).unwrap();
        assert_eq!(sites.len(), 4);
        for s in &sites {
            assert!((s.radius() - consts().a0 * 3f64.sqrt() / 4.0).abs() < 1e-15);
            assert_eq!(s.sublattice(), Sublattice::B);
        }
    }

    #[test]
    fn below_nearest_neighbour_is_empty() {
        assert!(enumerate_sites(0.5e-10, &consts()).unwrap().is_empty());
    }

    #[test]
    fn second_shell_has_twelve_sites() {
        let sites = enumerate_sites(3.0e-10, &consts()).unwrap();
        let second: Vec<_> = sites
            .iter()
            .filter(|s| (s.radius() - consts().a0 / 2f64.sqrt()).abs() < 1e-14)
            .collect();
        assert_eq!(second.len(), 12);
        assert!(second.iter().all(|s| s.sublattice() == Sublattice::A));
    }

    #[test]
    fn enumeration_matches_conventional_cell_oracle() {
        for radius in [3.0e-10, 5.5e-10, 8.0e-10] {
            let mut got: Vec<_> = enumerate_sites(radius, &consts()).unwrap().iter().map(|s| s.index).collect();
            got.sort();
            assert_eq!(got, oracle_sites(radius));
        }
    }

    #[test]
    fn enumeration_order_is_by_radius() {
        let sites = enumerate_sites(6e-10, &consts()).unwrap();
        for w in sites.windows(2) {
            let (a, b) = (norm2(w[0].index), norm2(w[1].index));
            assert!(a < b || (a == b && w[0].index < w[1].index));
        }
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(
            enumerate_sites(1e-8, &consts()),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(enumerate_sites(-1.0, &consts()).is_err());
    }

    #[test]
    fn sublattice_parity() {
        assert!(LatticeSite::new([1, 0, 0], consts().a0).is_err());
        assert_eq!(LatticeSite::new([2, 2, 0], consts().a0).unwrap().sublattice(), Sublattice::A);
        assert_eq!(LatticeSite::new([-1, -1, 1], consts().a0).unwrap().sublattice(), Sublattice::B);
    }

    #[test]
    fn hyperfine_special_angles() {
        let c = consts();
        let z = [0.0, 0.0, 1.0];
        let r = 7e-10;
        let magic = (1.0 / 3f64.sqrt()).acos();
        let p = [r * magic.sin(), 0.0, r * magic.cos()];
        let hf = hyperfine_from_position(&p, &z, &c).unwrap();
        assert!(hf.a_par.abs() < 1e-9 * hf.a_perp);
        let hf = hyperfine_from_position(&[0.0, 0.0, r], &z, &c).unwrap();
        assert!(hf.a_perp.abs() < 1e-9 * hf.a_par);
        let expected = 2.0 * c.hyperfine_prefactor() / (r * r * r);
        assert!((hf.a_par - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn hyperfine_equatorial_value() {
        // K / r^3 / 2pi at 0.5 nm: 1e-7 * 2pi*28.03e9 * 2pi*10.71e6 * hbar / 1.25e-28 / 2pi
        let k_hand = 1e-7 * (2.0 * PI * 28.03e9) * (2.0 * PI * 10.71e6) * 1.054_571_817e-34;
        let hand = k_hand / 1.25e-28 / (2.0 * PI);
        assert!((hand - 159.1e3).abs() < 0.5e3);
        let hf = hyperfine_from_position(&[5e-10, 0.0, 0.0], &[0.0, 0.0, 1.0], &consts()).unwrap();
        assert!((hf.a_par.abs() / (2.0 * PI) - hand).abs() < 1e-6 * hand);
        assert!(hf.a_perp.abs() < 1e-6);
    }

    #[test]
    fn hyperfine_rejects_origin() {
        assert_eq!(
            hyperfine_from_position(&[0.0; 3], &[0.0, 0.0, 1.0], &consts()),
            Err(Error::SingularPosition)
        );
    }

    #[test]
    fn hyperfine_phi_tracks_transverse_field() {
        let c = consts();
        let z = [0.0, 0.0, 1.0];
        let upper = hyperfine_from_position(&[3e-10, 0.0, 6e-10], &z, &c).unwrap();
        let lower = hyperfine_from_position(&[3e-10, 0.0, -6e-10], &z, &c).unwrap();
        assert!((upper.a_perp - lower.a_perp).abs() < 1e-9 * upper.a_perp);
        assert!((wrap_angle(upper.phi - lower.phi).abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn nn_pair_frequency() {
        let c = consts();
        let a = LatticeSite::new([0, 0, 0], c.a0).unwrap();
        let b = LatticeSite::new([1, -1, -1], c.a0).unwrap();
        let w = pair_coupling(&a, &b, &[1.0, 1.0, 1.0], &c).unwrap();
        // Hand evaluation: (3/4) * 1e-7 * hbar * gamma_n^2 / (sqrt(3) a0/4)^3 * (1 - 1/3) / 2pi
        let r = 3f64.sqrt() * c.a0 / 4.0;
        let gn = 2.0 * PI * 10.71e6;
        let hand = 0.75 * 1e-7 * 1.054_571_817e-34 * gn * gn / (r * r * r) * (2.0 / 3.0) / (2.0 * PI);
        assert!((w / (2.0 * PI) - hand).abs() < 1e-9 * hand);
        assert!((hand - 1031.5).abs() < 1.0, "{hand}");
    }

    #[test]
    fn magic_angle_pair_vanishes() {
        let c = consts();
        // (1,1,-1) against field (1,1,1): cos = 1/3, so not magic; use field (1,0,0)
        // and displacement (1,1,1): cos^2 = 1/3.
        let a = LatticeSite::new([0, 0, 0], c.a0).unwrap();
        let b = LatticeSite::new([1, 1, 1], c.a0).unwrap();
        assert!(pair_coupling(&a, &b, &[1.0, 0.0, 0.0], &c).unwrap().abs() < 1e-9);
        assert_eq!(pair_coupling(&a, &a, &[1.0, 0.0, 0.0], &c), Err(Error::CoincidentNuclei));
    }

    #[test]
    fn first_shell_table() {
        let t = enumerate_pair_frequencies(1, &[1.0, 1.0, 1.0], &consts()).unwrap();
        assert_eq!(t.entries.len(), 2);
        let hz: Vec<f64> = t.entries.iter().map(|e| e.omega_d_hz().abs()).collect();
        assert!((hz[0] - 3094.5).abs() < 3.0, "{hz:?}");
        assert!((hz[1] - 1031.5).abs() < 1.0, "{hz:?}");
        assert_eq!(t.entries[0].multiplicity, 1);
        assert_eq!(t.entries[1].multiplicity, 3);
    }

    /// Brute force over all 24 third-shell vectors: |1 - 3cos^2| takes the
    /// values 25/11 - 1, 1 - 9/11 and 1 - 1/11 for the three families.
    #[test]
    fn third_shell_family_frequencies() {
        let c = consts();
        let axis = [1.0, 1.0, 1.0];
        let mut brute: Vec<f64> = Vec::new();
        for v in displacement_shells(3)[2].1.iter() {
            let cart = [v[0] as f64 * c.a0 / 4.0, v[1] as f64 * c.a0 / 4.0, v[2] as f64 * c.a0 / 4.0];
            let hz = (dipolar_coupling(&cart, &axis, &c).unwrap() / (2.0 * PI)).abs();
            if !brute.iter().any(|b| (b - hz).abs() < 1e-6) {
                brute.push(hz);
            }
        }
        brute.sort_by(f64::total_cmp);
        assert_eq!(brute.len(), 3);
        assert!((brute[0] - 40.0).abs() < 2.0, "{brute:?}");
        assert!((brute[1] - 200.0).abs() < 5.0, "{brute:?}");
        assert!((brute[2] - 280.0).abs() < 5.0, "{brute:?}");

        let t = enumerate_pair_frequencies(3, &axis, &c).unwrap();
        let third: Vec<f64> = t.entries.iter().filter(|e| e.shell == 3).map(|e| e.omega_d_hz().abs()).collect();
        assert_eq!(third.len(), 3);
        for b in brute {
            assert!(third.iter().any(|x| (x - b).abs() < 1e-9));
        }
        let total: usize = t.entries.iter().filter(|e| e.shell == 3).map(|e| e.multiplicity).sum();
        assert_eq!(total, 12);
    }

    #[test]
    fn table_sorted_and_reproducible() {
        let c = consts();
        let axis = [1.0, 1.0, 1.0];
        let t = enumerate_pair_frequencies(6, &axis, &c).unwrap();
        for w in t.entries.windows(2) {
            assert!(w[0].omega_d.abs() >= w[1].omega_d.abs());
        }
        for e in &t.entries {
            let origin = LatticeSite::new([0, 0, 0], c.a0).unwrap();
            let other = if is_diamond_site(e.displacement) {
                LatticeSite::new(e.displacement, c.a0).unwrap()
            } else {
                LatticeSite::new([-e.displacement[0], -e.displacement[1], -e.displacement[2]], c.a0).unwrap()
            };
            let w = pair_coupling(&other, &origin, &axis, &c).unwrap();
            assert!((w.abs() - e.omega_d.abs()).abs() <= 1e-12 * e.omega_d.abs().max(1e-30));
            let recomputed = 0.75 * c.nuclear_dipolar_prefactor() / e.distance.powi(3)
                * (1.0 - 3.0 * e.angle_to_field.cos().powi(2));
            assert!((recomputed - e.omega_d).abs() <= 1e-12 * recomputed.abs().max(1e-9));
            assert!(e.distance > 0.0);
        }
    }

    #[test]
    fn field_axis_magic_to_class() {
        // Field along (1,0,0) is at the magic angle to every (1,1,1)-type displacement.
        let t = enumerate_pair_frequencies(1, &[1.0, 0.0, 0.0], &consts()).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert!(t.entries[0].omega_d.abs() < 1e-9);
        assert_eq!(t.entries[0].multiplicity, 4);
    }

    #[test]
    fn labels() {
        assert_eq!(shell_label(1), "NN");
        assert_eq!(shell_label(2), "2nd-shell");
        assert_eq!(shell_label(3), "3rd-shell");
        assert_eq!(shell_label(11), "11th-shell");
        assert_eq!(shell_label(22), "22nd-shell");
    }

    proptest::proptest! {
        #[test]
        fn pair_coupling_symmetric_and_cubic(i in 0usize..200, j in 0usize..200) {
            let c = consts();
            proptest::prop_assume!(i != j);
            let sites = enumerate_sites(8e-10, &c).unwrap();
            let sa = sites[i % sites.len()];
            let sb = sites[j % sites.len()];
            proptest::prop_assume!(sa.index != sb.index);
            let axis = [1.0, 1.0, 1.0];
            let w1 = pair_coupling(&sa, &sb, &axis, &c).unwrap();
            let w2 = pair_coupling(&sb, &sa, &axis, &c).unwrap();
            proptest::prop_assert_eq!(w1, w2);
            let d = vec3::sub(&sa.cartesian, &sb.cartesian);
            let w_double = dipolar_coupling(&vec3::scale(&d, 2.0), &axis, &c).unwrap();
            proptest::prop_assert!((w_double * 8.0 - w1).abs() <= 1e-12 * w1.abs().max(1e-9));
        }

        #[test]
        fn a_par_bounds(theta in 0.0f64..PI, r in 3e-10f64..3e-9) {
            let c = consts();
            let hf = hyperfine_from_position(&[r * theta.sin(), 0.0, r * theta.cos()], &[0.0, 0.0, 1.0], &c).unwrap();
            let k = c.hyperfine_prefactor() / (r * r * r);
            proptest::prop_assert!(hf.a_par >= -k * (1.0 + 1e-12) && hf.a_par <= 2.0 * k * (1.0 + 1e-12));
            proptest::prop_assert!(hf.a_perp >= 0.0);
            // |B_dip| = K sqrt(1 + 3 cos^2) / r^3: the two components rebuild the tensor column norm.
            let mag = (hf.a_par * hf.a_par + hf.a_perp * hf.a_perp).sqrt();
            let expected = k * (1.0 + 3.0 * theta.cos().powi(2)).sqrt();
            proptest::prop_assert!((mag - expected).abs() <= 1e-12 * expected);
        }
    }
}
