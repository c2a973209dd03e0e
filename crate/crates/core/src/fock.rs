//! Partition-indexed bases of the charged sectors and sparse state vectors.
//!
//! A basis vector of the sector with charge `j * alpha0` is the monomial
//! `J_{-n_1} ... J_{-n_k} Ω_j` with `n_1 >= ... >= n_k >= 1`; it is keyed by
//! the partition `(n_1, ..., n_k)`. The monomial basis is orthogonal but not
//! normalized: the squared norm of a monomial is [`Partition::gram`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FockError {
    #[error("sector {j} lies outside the charge window [{min}, {max}]")]
    OutOfWindow { j: i64, min: i64, max: i64 },
    #[error("level {level} exceeds the cutoff {cutoff}")]
    AboveCutoff { level: u32, cutoff: u32 },
    #[error("partition parts must be positive, got {0:?}")]
    NonPositivePart(Vec<i64>),
    #[error("empty charge window [{0}, {1}]")]
    EmptyWindow(i64, i64),
    #[error("cannot take an inner product between a sector state and a tensor state")]
    MixedKinds,
}

/// Multiset of positive integers, stored weakly decreasing.
///
/// Ordering is by level first, then reverse-lexicographic, so that within a
/// level `[4] < [3, 1] < [2, 2] < [2, 1, 1] < [1, 1, 1, 1]`.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<u32>", try_from = "Vec<i64>")]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    /// Builds a partition from parts in any order.
    pub fn new(parts: impl IntoIterator<Item = u32>) -> Result<Self, FockError> {
        let mut parts: Vec<u32> = parts.into_iter().collect();
        if parts.contains(&0) {
            return Err(FockError::NonPositivePart(parts.iter().map(|&p| p as i64).collect()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Partition(parts))
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn level(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Number of parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiplicity(&self, part: u32) -> u32 {
        self.0.iter().filter(|&&p| p == part).count() as u32
    }

    /// `(part, multiplicity)` pairs, largest part first.
    pub fn multiplicities(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for &p in &self.0 {
            match out.last_mut() {
                Some((q, m)) if *q == p => *m += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    pub fn with_part(&self, part: u32) -> Partition {
        debug_assert!(part > 0);
        let mut parts = self.0.clone();
        let pos = parts.partition_point(|&p| p >= part);
        parts.insert(pos, part);
        Partition(parts)
    }

    pub fn without_part(&self, part: u32) -> Option<Partition> {
        let pos = self.0.iter().position(|&p| p == part)?;
        let mut parts = self.0.clone();
        parts.remove(pos);
        Some(Partition(parts))
    }

    /// Multiset union.
    pub fn union(&self, other: &Partition) -> Partition {
        let mut parts = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x >= y {
                        parts.push(x);
                        a.next();
                    } else {
                        parts.push(y);
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    parts.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    parts.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Partition(parts)
    }

    /// The Gram weight `z_λ = Π_i i^{m_i} m_i!`, i.e. `‖J_{-λ}Ω‖²`.
    pub fn gram(&self) -> BigInt {
        let mut acc: u128 = 1;
        for (part, mult) in self.multiplicities() {
            for k in 1..=mult {
                match acc.checked_mul(part as u128 * k as u128) {
                    Some(v) => acc = v,
                    None => return self.gram_big(),
                }
            }
        }
        BigInt::from(acc)
    }

    fn gram_big(&self) -> BigInt {
        let mut acc = BigInt::one();
        for (part, mult) in self.multiplicities() {
            for k in 1..=mult {
                acc *= BigInt::from(part) * BigInt::from(k);
            }
        }
        acc
    }

    /// `(-1)^{number of parts}`.
    pub fn parity_sign(&self) -> i64 {
        if self.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level().cmp(&other.level()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl TryFrom<Vec<i64>> for Partition {
    type Error = FockError;

    fn try_from(parts: Vec<i64>) -> Result<Self, Self::Error> {
        if parts.iter().any(|&p| p <= 0 || p > u32::MAX as i64) {
            return Err(FockError::NonPositivePart(parts));
        }
        Partition::new(parts.into_iter().map(|p| p as u32))
    }
}

/// All partitions of `n` in reverse-lexicographic order.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fill_partitions(n, n, &mut current, &mut out);
    out
}

fn fill_partitions(rest: u32, max_part: u32, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if rest == 0 {
        out.push(Partition(current.clone()));
        return;
    }
    for p in (1..=rest.min(max_part)).rev() {
        current.push(p);
        fill_partitions(rest - p, p, current, out);
        current.pop();
    }
}

/// Sub-multisets of a partition together with their complements.
pub fn sub_multisets(lambda: &Partition) -> Vec<(Partition, Partition)> {
    let mults = lambda.multiplicities();
    let mut out = vec![(Vec::new(), Vec::new())];
    for (part, mult) in mults {
        let mut next = Vec::with_capacity(out.len() * (mult as usize + 1));
        for (taken, left) in &out {
            for k in 0..=mult {
                let mut t: Vec<u32> = taken.clone();
                let mut l: Vec<u32> = left.clone();
                t.extend(std::iter::repeat(part).take(k as usize));
                l.extend(std::iter::repeat(part).take((mult - k) as usize));
                next.push((t, l));
            }
        }
        out = next;
    }
    out.into_iter().map(|(t, l)| (Partition(t), Partition(l))).collect()
}

/// Level cutoff plus charge window: the finite arena every computation runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub level_cutoff: u32,
    pub charge_window: (i64, i64),
}

impl Truncation {
    pub fn new(level_cutoff: u32, j_min: i64, j_max: i64) -> Result<Self, FockError> {
        if j_min > j_max {
            return Err(FockError::EmptyWindow(j_min, j_max));
        }
        Ok(Truncation { level_cutoff, charge_window: (j_min, j_max) })
    }

    pub fn in_window(&self, j: i64) -> bool {
        (self.charge_window.0..=self.charge_window.1).contains(&j)
    }

    pub fn admits(&self, j: i64, level: u32) -> bool {
        self.in_window(j) && level <= self.level_cutoff
    }

    pub fn check_sector(&self, j: i64) -> Result<(), FockError> {
        if self.in_window(j) {
            Ok(())
        } else {
            Err(FockError::OutOfWindow { j, min: self.charge_window.0, max: self.charge_window.1 })
        }
    }

    pub fn sectors(&self) -> impl Iterator<Item = i64> {
        self.charge_window.0..=self.charge_window.1
    }
}

/// Basis of sector `j` at a fixed level, reverse-lexicographically ordered.
pub fn enumerate_basis(trunc: &Truncation, j: i64, level: u32) -> Result<Vec<Partition>, FockError> {
    trunc.check_sector(j)?;
    if level > trunc.level_cutoff {
        return Err(FockError::AboveCutoff { level, cutoff: trunc.level_cutoff });
    }
    Ok(partitions_of(level))
}

/// All basis partitions with level in `0..=max_level`, level-major.
pub fn basis_up_to(max_level: u32) -> Vec<Partition> {
    (0..=max_level).flat_map(partitions_of).collect()
}

/// Gram form on basis partitions (sector independent).
pub fn gram<S: Scalar>(lambda: &Partition, mu: &Partition) -> S {
    if lambda == mu {
        S::from_bigint(&lambda.gram())
    } else {
        S::zero()
    }
}

/// A truncation together with the sector spacing `alpha0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpace<S> {
    pub trunc: Truncation,
    pub alpha0: S,
}

impl<S: Scalar> FockSpace<S> {
    pub fn new(trunc: Truncation, alpha0: S) -> Self {
        FockSpace { trunc, alpha0 }
    }

    /// Charge `β = j·α0` of sector `j`.
    pub fn charge(&self, j: i64) -> S {
        self.alpha0.clone() * S::from_i64(j)
    }

    pub fn cutoff(&self) -> u32 {
        self.trunc.level_cutoff
    }

    pub fn with_cutoff(&self, level_cutoff: u32) -> Self {
        FockSpace {
            trunc: Truncation { level_cutoff, ..self.trunc },
            alpha0: self.alpha0.clone(),
        }
    }
}

/// Key of a chiral basis vector.
pub type SectorKey = (i64, Partition);

/// Key of a basis vector `J_{-λ}Ω_j ⊗ J_{-μ}Ω_j` of the diagonal-charge space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TensorKey {
    pub j: i64,
    pub left: Partition,
    pub right: Partition,
}

impl TensorKey {
    pub fn new(j: i64, left: Partition, right: Partition) -> Self {
        TensorKey { j, left, right }
    }

    pub fn gram(&self) -> BigInt {
        self.left.gram() * self.right.gram()
    }
}

/// Behaviour shared by the chiral and the tensor sparse vectors.
pub trait GramKey: Ord + Clone {
    fn gram_weight(&self) -> BigInt;
}

impl GramKey for SectorKey {
    fn gram_weight(&self) -> BigInt {
        self.1.gram()
    }
}

impl GramKey for TensorKey {
    fn gram_weight(&self) -> BigInt {
        self.gram()
    }
}

/// Sparse vector over an ordered basis, with a flag recording whether any
/// component was dropped by the truncation while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState<K, S> {
    entries: BTreeMap<K, S>,
    overflow: bool,
}

pub type SectorState<S> = SparseState<SectorKey, S>;
pub type TensorState<S> = SparseState<TensorKey, S>;

impl<K: GramKey, S: Scalar> Default for SparseState<K, S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<K: GramKey, S: Scalar> SparseState<K, S> {
    pub fn zero() -> Self {
        SparseState { entries: BTreeMap::new(), overflow: false }
    }

    pub fn basis(key: K) -> Self {
        let mut s = Self::zero();
        s.entries.insert(key, S::one());
        s
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (K, S)>) -> Self {
        let mut s = Self::zero();
        for (k, v) in entries {
            s.add_term(k, v);
        }
        s
    }

    /// Adds `coef` to the component `key`, dropping exact zeros.
    pub fn add_term(&mut self, key: K, coef: S) {
        if coef.is_zero() {
            return;
        }
        match self.entries.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn get(&self, key: &K) -> Option<&S> {
        self.entries.get(key)
    }

    pub fn coefficient(&self, key: &K) -> S {
        self.entries.get(key).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &S)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every coefficient is negligible at `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.entries.values().all(|v| v.is_negligible(tol))
    }

    /// Largest coefficient magnitude (0 for the empty vector).
    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.abs_f64()).fold(0.0, f64::max)
    }

    pub fn overflow(&self) -> bool {
        self.overflow
    }

    pub fn mark_overflow(&mut self) {
        self.overflow = true;
    }

    pub fn set_overflow(&mut self, flag: bool) {
        self.overflow = flag;
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero();
        out.overflow = self.overflow;
        for (k, v) in &self.entries {
            out.add_term(k.clone(), v.clone() * c);
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, c: &S) {
        self.overflow |= other.overflow;
        for (k, v) in &other.entries {
            self.add_term(k.clone(), v.clone() * c);
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &S::one());
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &(-S::one()));
        out
    }

    pub fn into_entries(self) -> BTreeMap<K, S> {
        self.entries
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> S {
        let (small, large, flip) = if self.len() <= other.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = S::zero();
        for (k, a) in &small.entries {
            if let Some(b) = large.entries.get(k) {
                let g = S::from_bigint(&k.gram_weight());
                let term = if flip { b.conj() * a * &g } else { a.conj() * b * &g };
                acc += term;
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> S {
        self.inner_product(self)
    }

    pub fn map_keys(&self, f: impl Fn(&K) -> K) -> Self {
        let mut out = Self::zero();
        out.overflow = self.overflow;
        for (k, v) in &self.entries {
            out.add_term(f(k), v.clone());
        }
        out
    }
}

impl<S: Scalar> SectorState<S> {
    pub fn vacuum(j: i64) -> Self {
        Self::basis((j, Partition::empty()))
    }

    pub fn max_level(&self) -> u32 {
        self.entries.keys().map(|(_, p)| p.level()).max().unwrap_or(0)
    }
}

impl<S: Scalar> TensorState<S> {
    pub fn vacuum(j: i64) -> Self {
        Self::basis(TensorKey::new(j, Partition::empty(), Partition::empty()))
    }

    pub fn product(j: i64, left: Partition, right: Partition) -> Self {
        Self::basis(TensorKey::new(j, left, right))
    }

    /// Largest chiral level over both factors.
    pub fn max_level(&self) -> u32 {
        self.entries.keys().map(|k| k.left.level().max(k.right.level())).max().unwrap_or(0)
    }

    pub fn sectors(&self) -> Vec<i64> {
        let mut js: Vec<i64> = self.entries.keys().map(|k| k.j).collect();
        js.dedup();
        js
    }
}

/// Either kind of state, for inputs whose kind is only known at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyState<S> {
    Sector(SectorState<S>),
    Tensor(TensorState<S>),
}

impl<S: Scalar> AnyState<S> {
    pub fn inner_product(&self, other: &Self) -> Result<S, FockError> {
        match (self, other) {
            (AnyState::Sector(a), AnyState::Sector(b)) => Ok(a.inner_product(b)),
            (AnyState::Tensor(a), AnyState::Tensor(b)) => Ok(a.inner_product(b)),
            _ => Err(FockError::MixedKinds),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use num_traits::Zero;

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.iter().copied()).unwrap()
    }

    // Independent count via the Euler pentagonal recurrence.
    fn partition_count(n: usize) -> u64 {
        let mut t = vec![0i64; n + 1];
        t[0] = 1;
        for i in 1..=n {
            let mut k = 1i64;
            loop {
                let g1 = (k * (3 * k - 1) / 2) as usize;
                if g1 > i {
                    break;
                }
                let s = if k % 2 == 1 { 1 } else { -1 };
                t[i] += s * t[i - g1];
                let g2 = (k * (3 * k + 1) / 2) as usize;
                if g2 <= i {
                    t[i] += s * t[i - g2];
                }
                k += 1;
            }
        }
        t[n] as u64
    }

    #[test]
    fn enumerate_level_four() {
        let t = Truncation::new(12, -2, 2).unwrap();
        let b = enumerate_basis(&t, 0, 4).unwrap();
        assert_eq!(b, vec![p(&[4]), p(&[3, 1]), p(&[2, 2]), p(&[2, 1, 1]), p(&[1, 1, 1, 1])]);
    }

    #[test]
    fn enumerate_vacuum_level() {
        let t = Truncation::new(12, -2, 2).unwrap();
        assert_eq!(enumerate_basis(&t, 0, 0).unwrap(), vec![Partition::empty()]);
    }

    #[test]
    fn enumerate_level_twelve_charged() {
        let t = Truncation::new(12, -2, 2).unwrap();
        assert_eq!(enumerate_basis(&t, 1, 12).unwrap().len(), 77);
    }

    #[test]
    fn enumerate_counts_match_pentagonal_recurrence() {
        for n in 0..=20u32 {
            assert_eq!(partitions_of(n).len() as u64, partition_count(n as usize), "n={n}");
        }
    }

    #[test]
    fn enumerate_rejects_outside_window() {
        let t = Truncation::new(4, -1, 1).unwrap();
        assert_eq!(
            enumerate_basis(&t, 2, 0),
            Err(FockError::OutOfWindow { j: 2, min: -1, max: 1 })
        );
        assert!(matches!(enumerate_basis(&t, 0, 5), Err(FockError::AboveCutoff { .. })));
    }

    #[test]
    fn enumeration_is_strictly_ordered_and_valid() {
        for n in 0..=10 {
            let ps = partitions_of(n);
            for w in ps.windows(2) {
                assert!(w[0] < w[1]);
            }
            for q in ps {
                assert_eq!(q.level(), n);
                assert!(q.parts().windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram::<Rational>(&p(&[1]), &p(&[1])), Rational::from_i64(1));
        assert_eq!(gram::<Rational>(&p(&[2, 1]), &p(&[3])), Rational::from_i64(0));
        assert_eq!(gram::<Rational>(&p(&[2, 2]), &p(&[2, 2])), Rational::from_i64(8));
        assert_eq!(Partition::empty().gram(), BigInt::from(1));
    }

    #[test]
    fn big_gram_falls_back_to_bigint() {
        let ones = Partition::new(std::iter::repeat(1).take(40)).unwrap();
        let fact40: BigInt = (1..=40u32).map(BigInt::from).product();
        assert_eq!(ones.gram(), fact40);
    }

    #[test]
    fn inner_product_examples() {
        let v: TensorState<Rational> = TensorState::vacuum(0);
        assert_eq!(v.inner_product(&v), Rational::from_i64(1));
        let e = TensorState::<Rational>::product(0, p(&[1]), Partition::empty());
        assert_eq!(e.inner_product(&e), Rational::from_i64(1));
        let a: SectorState<Rational> = SectorState::vacuum(0);
        let b: SectorState<Rational> = SectorState::vacuum(1);
        assert_eq!(a.inner_product(&b), Rational::from_i64(0));
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let a = AnyState::Sector(SectorState::<Rational>::vacuum(0));
        let b = AnyState::Tensor(TensorState::<Rational>::vacuum(0));
        assert_eq!(a.inner_product(&b), Err(FockError::MixedKinds));
        assert_eq!(a.inner_product(&a), Ok(Rational::from_i64(1)));
    }

    #[test]
    fn sub_multisets_cover_all_splits() {
        let l = p(&[2, 2, 1]);
        let subs = sub_multisets(&l);
        assert_eq!(subs.len(), 3 * 2);
        for (a, b) in subs {
            assert_eq!(a.union(&b), l);
        }
    }

    #[test]
    fn partition_editing() {
        let l = p(&[3, 1]);
        assert_eq!(l.with_part(2), p(&[3, 2, 1]));
        assert_eq!(l.with_part(1), p(&[3, 1, 1]));
        assert_eq!(l.without_part(3), Some(p(&[1])));
        assert_eq!(l.without_part(2), None);
        assert!(Partition::new([0, 1]).is_err());
        assert_eq!(p(&[1, 3, 2]).parts(), &[3, 2, 1]);
    }

    mod props {
        use super::*;
        use crate::GaussRational;
        use num_complex::Complex;
        use proptest::prelude::*;

        fn tensor_state() -> impl Strategy<Value = TensorState<GaussRational>> {
            let basis = basis_up_to(4);
            let n = basis.len();
            proptest::collection::vec(
                ((-1i64..=1), 0..n, 0..n, -5i64..5, -5i64..5, 1i64..4),
                0..6,
            )
            .prop_map(move |terms| {
                TensorState::from_entries(terms.into_iter().map(|(j, l, r, a, b, d)| {
                    (
                        TensorKey::new(j, basis[l].clone(), basis[r].clone()),
                        Complex::new(Rational::ratio(a, d), Rational::ratio(b, d)),
                    )
                }))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn inner_product_is_hermitian(v in tensor_state(), w in tensor_state()) {
                let vw = v.inner_product(&w);
                let wv = w.inner_product(&v);
                prop_assert_eq!(vw, Scalar::conj(&wv));
            }

            #[test]
            fn norm_is_positive(v in tensor_state()) {
                let n = v.norm_sq();
                prop_assert!(n.im.is_zero());
                prop_assert_eq!(n.re > Rational::from_i64(0), !v.is_empty());
            }
        }
    }
}
