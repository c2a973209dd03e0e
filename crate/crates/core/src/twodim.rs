//! The diagonal-charge tensor space and the time-zero field modes
//! `Ψ_{α,m} = Σ_t Y_{α,t} ⊗ Y_{α,t-m}`.
//!
//! In level-shift terms the mode pairs a left shift `δ` with a right shift
//! `δ + m`. The sum over `δ` is infinite; here it is cut by the level cutoff
//! and organised in bands labelled by the output left level, which are
//! mutually orthogonal. The norms of the bands drive the tail estimates.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockSpace, SectorState, TensorKey, TensorState};
use crate::scalar::Scalar;
use crate::vertex::{vacuum_mode_norm_sq_table, VertexField};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TwodimError {
    #[error("input sector {j} lies outside the charge window [{min}, {max}]")]
    SectorOutsideWindow { j: i64, min: i64, max: i64 },
    #[error("input level {level} exceeds the cutoff {cutoff}")]
    AboveCutoff { level: u32, cutoff: u32 },
}

/// One Fourier mode of the time-zero field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeZeroMode {
    /// `α = alpha_mult · α0`
    pub alpha_mult: i64,
    pub m: i64,
    /// Adds the `-α` part, giving the mode of the symmetric field.
    pub symmetrized: bool,
}

impl TimeZeroMode {
    pub fn new(alpha_mult: i64, m: i64) -> Self {
        TimeZeroMode { alpha_mult, m, symmetrized: false }
    }

    pub fn symmetric(alpha_mult: i64, m: i64) -> Self {
        TimeZeroMode { alpha_mult, m, symmetrized: true }
    }

    /// `Ψ_{α,m}† = Ψ_{-α,-m}`; the symmetric mode goes to its own `-m` mode.
    pub fn adjoint(self) -> Self {
        if self.symmetrized {
            TimeZeroMode { m: -self.m, ..self }
        } else {
            TimeZeroMode { alpha_mult: -self.alpha_mult, m: -self.m, symmetrized: false }
        }
    }

    fn multipliers(self) -> Vec<i64> {
        if self.symmetrized {
            vec![self.alpha_mult, -self.alpha_mult]
        } else {
            vec![self.alpha_mult]
        }
    }
}

/// What the truncation did to one application of a time-zero mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport<S> {
    /// Squared norm of each band, keyed by output left level.
    #[serde(skip)]
    pub band_norms_sq: BTreeMap<u32, S>,
    /// Highest band that was computed completely, if any.
    pub last_full_band: Option<u32>,
    /// Some component was dropped because a level exceeded the cutoff.
    pub overflow: bool,
    /// Some component was dropped because its sector left the charge window.
    pub charge_overflow: bool,
    /// Highest band touched.
    pub depth: u32,
}

impl<S: Scalar> TailReport<S> {
    /// `(band, ‖band‖²)` over the complete bands, in float.
    pub fn full_band_series(&self) -> Vec<(f64, f64)> {
        let Some(last) = self.last_full_band else {
            return Vec::new();
        };
        self.band_norms_sq.range(..=last).map(|(n, v)| (*n as f64, v.re_f64())).collect()
    }

    pub fn total_norm_sq(&self) -> S {
        let mut acc = S::zero();
        for v in self.band_norms_sq.values() {
            acc += v;
        }
        acc
    }
}

/// Time-zero field modes on the diagonal tensor space of a truncated space.
#[derive(Debug, Clone)]
pub struct TimeZeroField<S> {
    field: Arc<VertexField<S>>,
}

impl<S: Scalar> TimeZeroField<S> {
    pub fn new(space: FockSpace<S>) -> Self {
        TimeZeroField { field: Arc::new(VertexField::new(space)) }
    }

    pub fn from_field(field: Arc<VertexField<S>>) -> Self {
        TimeZeroField { field }
    }

    pub fn vertex(&self) -> &VertexField<S> {
        &self.field
    }

    pub fn space(&self) -> &FockSpace<S> {
        self.field.space()
    }

    /// Band-truncated `Ψ_{α,m} v` (plus the `-α` part when symmetrized).
    pub fn apply(&self, mode: TimeZeroMode, v: &TensorState<S>) -> Result<(TensorState<S>, TailReport<S>), TwodimError> {
        let space = self.space();
        let cutoff = space.cutoff() as i64;
        let trunc = &space.trunc;
        for (key, _) in v.iter() {
            if !trunc.in_window(key.j) {
                return Err(TwodimError::SectorOutsideWindow {
                    j: key.j,
                    min: trunc.charge_window.0,
                    max: trunc.charge_window.1,
                });
            }
            let level = key.left.level().max(key.right.level());
            if level as i64 > cutoff {
                return Err(TwodimError::AboveCutoff { level, cutoff: cutoff as u32 });
            }
        }
        let mults = mode.multipliers();
        let mut charge_overflow = false;
        for (key, _) in v.iter() {
            for &k in &mults {
                if !trunc.in_window(key.j + k) {
                    charge_overflow = true;
                }
            }
        }
        // Band n is complete iff every input's right partner stays below the cutoff.
        let mut last_full: Option<i64> = Some(cutoff);
        let mut overflow = v.overflow();
        for (key, _) in v.iter() {
            let limit = cutoff + key.left.level() as i64 - key.right.level() as i64 - mode.m;
            if limit < cutoff {
                overflow = true;
            }
            last_full = last_full.map(|l| l.min(limit));
        }
        let last_full_band = last_full.filter(|&l| l >= 0).map(|l| l as u32);

        let entries: Vec<(&TensorKey, &S)> = v.iter().collect();
        let bands: Vec<(u32, TensorState<S>)> = (0..=cutoff)
            .into_par_iter()
            .map(|n| (n as u32, self.band(&mults, mode.m, n, &entries)))
            .collect();

        let mut out = TensorState::zero();
        out.set_overflow(overflow || charge_overflow);
        let mut band_norms_sq = BTreeMap::new();
        let mut depth = 0;
        for (n, band) in bands {
            if band.is_empty() {
                continue;
            }
            depth = n;
            band_norms_sq.insert(n, band.norm_sq());
            for (k, c) in band.into_entries() {
                out.add_term(k, c);
            }
        }
        Ok((out, TailReport { band_norms_sq, last_full_band, overflow, charge_overflow, depth }))
    }

    /// Components of the image with output left level `n`.
    fn band(&self, mults: &[i64], m: i64, n: i64, entries: &[(&TensorKey, &S)]) -> TensorState<S> {
        let space = self.space();
        let cutoff = space.cutoff() as i64;
        let mut acc = TensorState::zero();
        for &k in mults {
            for (key, coef) in entries {
                let target = key.j + k;
                if !space.trunc.in_window(target) {
                    continue;
                }
                let delta_l = n - key.left.level() as i64;
                let delta_r = delta_l + m;
                let right_level = key.right.level() as i64 + delta_r;
                if right_level < 0 || right_level > cutoff {
                    continue;
                }
                let (Some(left), Some(right)) =
                    (self.field.column(k, delta_l, &key.left), self.field.column(k, delta_r, &key.right))
                else {
                    continue;
                };
                for (mu, a) in left.iter() {
                    let ca = (*coef).clone() * a;
                    for (nu, b) in right.iter() {
                        acc.add_term(TensorKey::new(target, mu.clone(), nu.clone()), ca.clone() * b);
                    }
                }
            }
        }
        acc
    }
}

/// `S_N = Σ_{n ≤ N} ‖Y_{n}Ω‖² ‖Y_{n+m}Ω‖²` for `N = 0..=n_max`: the squared
/// norm of the `N`-band partial sum of `Ψ_{α,m}Ω⊗Ω`, from the closed form.
pub fn partial_sum_norm_series<S: Scalar>(d: &S, m: i64, n_max: u32) -> Vec<S> {
    let table = vacuum_mode_norm_sq_table(d, (n_max as i64 + m.abs()) as u32);
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut acc = S::zero();
    for n in 0..=n_max as i64 {
        if n + m >= 0 {
            acc += table[n as usize].clone() * &table[(n + m) as usize];
        }
        out.push(acc.clone());
    }
    out
}

/// Closed-form band norms `‖Y_nΩ‖²‖Y_{n+m}Ω‖²` for `n = 0..=n_max`.
pub fn vacuum_band_norms<S: Scalar>(d: &S, m: i64, n_max: u32) -> Vec<S> {
    let table = vacuum_mode_norm_sq_table(d, (n_max as i64 + m.abs()) as u32);
    (0..=n_max as i64)
        .map(|n| if n + m >= 0 { table[n as usize].clone() * &table[(n + m) as usize] } else { S::zero() })
        .collect()
}

/// Swaps the two tensor factors.
pub fn flip<S: Scalar>(v: &TensorState<S>) -> TensorState<S> {
    v.map_keys(|k| TensorKey::new(k.j, k.right.clone(), k.left.clone()))
}

/// The automorphism `J_m ↦ -J_m`: sends `J_{-λ}Ω_β` to `(-1)^{ℓ(λ)} J_{-λ}Ω_{-β}`.
pub fn sign_automorphism_sector<S: Scalar>(v: &SectorState<S>) -> SectorState<S> {
    let mut out = SectorState::zero();
    out.set_overflow(v.overflow());
    for ((j, p), c) in v.iter() {
        out.add_term((-j, p.clone()), c.clone() * &S::from_i64(p.parity_sign()));
    }
    out
}

/// [`sign_automorphism_sector`] on both factors.
pub fn sign_automorphism<S: Scalar>(v: &TensorState<S>) -> TensorState<S> {
    let mut out = TensorState::zero();
    out.set_overflow(v.overflow());
    for (k, c) in v.iter() {
        let s = k.left.parity_sign() * k.right.parity_sign();
        out.add_term(TensorKey::new(-k.j, k.left.clone(), k.right.clone()), c.clone() * &S::from_i64(s));
    }
    out
}

/// All basis keys of sector `j` with both levels at most `max_level`.
pub fn tensor_basis(j: i64, max_level: u32) -> Vec<TensorKey> {
    let b = crate::fock::basis_up_to(max_level);
    let mut out = Vec::with_capacity(b.len() * b.len());
    for l in &b {
        for r in &b {
            out.push(TensorKey::new(j, l.clone(), r.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Partition, Truncation};
    use crate::{GaussRational, Rational};
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.iter().copied()).unwrap()
    }

    fn tz(l: u32) -> TimeZeroField<Rational> {
        TimeZeroField::new(FockSpace::new(Truncation::new(l, -2, 2).unwrap(), Rational::ratio(1, 2)))
    }

    #[test]
    fn vacuum_bands_match_closed_form() {
        let l = 9;
        let f = tz(l);
        let d = Rational::ratio(1, 8);
        for m in [-2i64, 0, 1, 3] {
            let (out, report) = f.apply(TimeZeroMode::new(1, m), &TensorState::vacuum(0)).unwrap();
            let expected = vacuum_band_norms(&d, m, l);
            let last = report.last_full_band.unwrap();
            assert_eq!(last as i64, (l as i64).min(l as i64 - m));
            for n in 0..=last {
                assert_eq!(report.band_norms_sq.get(&n).cloned().unwrap_or_else(Rational::zero), expected[n as usize], "m={m} n={n}");
            }
            assert!(out.iter().all(|(k, _)| k.j == 1));
        }
    }

    #[test]
    fn single_band_at_zero_cutoff() {
        let (out, report) = tz(0).apply(TimeZeroMode::new(1, 0), &TensorState::vacuum(0)).unwrap();
        assert_eq!(out, TensorState::vacuum(1));
        assert_eq!(report.last_full_band, Some(0));
        assert_eq!(report.band_norms_sq.get(&0), Some(&Rational::one()));
    }

    #[test]
    fn flip_exchanges_opposite_modes_on_vacuum() {
        let f = tz(8);
        for m in -3i64..=3 {
            for sym in [false, true] {
                let mode = TimeZeroMode { alpha_mult: 1, m, symmetrized: sym };
                let (a, _) = f.apply(mode, &TensorState::vacuum(0)).unwrap();
                let (b, _) = f.apply(TimeZeroMode { m: -m, ..mode }, &TensorState::vacuum(0)).unwrap();
                assert_eq!(flip(&a).into_entries(), b.into_entries());
            }
        }
        let v: TensorState<Rational> = TensorState::product(0, p(&[1]), Partition::empty());
        assert_eq!(flip(&v), TensorState::product(0, Partition::empty(), p(&[1])));
    }

    #[test]
    fn sign_automorphism_examples() {
        let v: SectorState<Rational> = SectorState::basis((0, p(&[2, 1])));
        assert_eq!(sign_automorphism_sector(&v), v);
        let w: SectorState<Rational> = SectorState::basis((1, p(&[2])));
        assert_eq!(sign_automorphism_sector(&w), SectorState::basis((-1, p(&[2]))).scale(&-Rational::one()));
    }

    #[test]
    fn adjoint_relation_on_interior_pairs() {
        let f = tz(8);
        let keys0 = tensor_basis(0, 2);
        let keys1 = tensor_basis(1, 2);
        for m in -2i64..=2 {
            let mode = TimeZeroMode::new(1, m);
            for a in &keys0 {
                let v = TensorState::basis(a.clone());
                let (pv, _) = f.apply(mode, &v).unwrap();
                for b in &keys1 {
                    let w = TensorState::basis(b.clone());
                    let (pw, _) = f.apply(mode.adjoint(), &w).unwrap();
                    assert_eq!(pv.inner_product(&w), v.inner_product(&pw), "m={m} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn sign_covariance() {
        let f = tz(6);
        for key in tensor_basis(1, 2) {
            let v = TensorState::basis(key);
            for m in -2i64..=2 {
                let (lhs, _) = f.apply(TimeZeroMode::new(1, m), &v).unwrap();
                let (rhs, _) = f.apply(TimeZeroMode::new(-1, m), &sign_automorphism(&v)).unwrap();
                assert_eq!(sign_automorphism(&lhs).into_entries(), rhs.into_entries());
            }
        }
    }

    #[test]
    fn matrix_elements_are_real_in_gaussian_mode() {
        let space = FockSpace::new(Truncation::new(6, -2, 2).unwrap(), GaussRational::new(Rational::ratio(1, 2), Rational::ratio(0, 1)));
        let f = TimeZeroField::new(space);
        for key in tensor_basis(0, 2) {
            let (out, _) = f.apply(TimeZeroMode::symmetric(1, 1), &TensorState::basis(key)).unwrap();
            assert!(out.iter().all(|(_, c)| c.im == Rational::ratio(0, 1)));
        }
    }

    #[test]
    fn sector_overflow_is_reported() {
        let f = tz(4);
        let (_, report) = f.apply(TimeZeroMode::symmetric(1, 0), &TensorState::vacuum(2)).unwrap();
        assert!(report.charge_overflow);
        assert!(f.apply(TimeZeroMode::new(1, 0), &TensorState::vacuum(3)).is_err());
    }

    #[test]
    fn partial_sums_accumulate_band_norms() {
        let d = Rational::ratio(1, 8);
        let s = partial_sum_norm_series(&d, 0, 4);
        assert_eq!(s[0], Rational::one());
        assert_eq!(s[1], Rational::one() + Rational::ratio(1, 16));
        let shifted = partial_sum_norm_series(&d, -2, 3);
        assert_eq!(shifted[1], Rational::ratio(0, 1));
        assert_eq!(shifted[2], Rational::ratio(5, 32));
    }

    proptest! {
        #[test]
        fn flip_and_sign_are_unitary(entries in proptest::collection::vec((0u32..4, 0u32..4, -3i64..4, -3i64..4), 0..6)) {
            let mut v: TensorState<Rational> = TensorState::zero();
            for (a, b, num, den) in entries {
                let den = if den == 0 { 1 } else { den };
                let key = TensorKey::new(0, crate::fock::partitions_of(a)[0].clone(), crate::fock::partitions_of(b).last().unwrap().clone());
                v.add_term(key, Rational::ratio(num, den));
            }
            prop_assert_eq!(flip(&v).norm_sq(), v.norm_sq());
            prop_assert_eq!(sign_automorphism(&v).norm_sq(), v.norm_sq());
            prop_assert_eq!(flip(&flip(&v)), v.clone());
            prop_assert_eq!(sign_automorphism(&sign_automorphism(&v)), v);
        }
    }
}
