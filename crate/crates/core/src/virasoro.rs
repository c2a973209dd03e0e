//! Sugawara Virasoro modes and the unperturbed two-dimensional generators.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::fock::{FockSpace, Partition, SectorState, TensorKey, TensorState};
use crate::heisenberg::{current_on_basis, Side};
use crate::scalar::Scalar;

/// Deliberate coefficient corruption used to self-test the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SugawaraFault {
    /// Terms of the Sugawara sum containing `J_0` get weight 1/3 instead of 1/2.
    ChargedCrossTerm,
}

/// Generators of the unperturbed de Sitter rotations and boosts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LorentzGenerator {
    /// `L̂_1 ⊗ 1 + 1 ⊗ L̂_{-1}`
    LPlus,
    /// `L̂_{-1} ⊗ 1 + 1 ⊗ L̂_1`
    LMinus,
    /// `L̂_0 ⊗ 1 - 1 ⊗ L̂_0`
    K0,
}

impl LorentzGenerator {
    /// `(side, mode, sign)` terms.
    pub fn terms(self) -> [(Side, i64, i64); 2] {
        match self {
            LorentzGenerator::LPlus => [(Side::Left, 1, 1), (Side::Right, -1, 1)],
            LorentzGenerator::LMinus => [(Side::Left, -1, 1), (Side::Right, 1, 1)],
            LorentzGenerator::K0 => [(Side::Left, 0, 1), (Side::Right, 0, -1)],
        }
    }
}

type Column<S> = Arc<Vec<(Partition, S)>>;

/// `L̂_n = ½ Σ_k :Ĵ_{n-k} Ĵ_k:` on a truncated space, with memoized columns.
#[derive(Debug)]
pub struct Sugawara<S> {
    space: FockSpace<S>,
    fault: Option<SugawaraFault>,
    cache: Mutex<HashMap<(i64, i64, Partition), Option<Column<S>>>>,
}

impl<S: Scalar> Sugawara<S> {
    pub fn new(space: FockSpace<S>) -> Self {
        Sugawara { space, fault: None, cache: Mutex::new(HashMap::new()) }
    }

    pub fn with_fault(space: FockSpace<S>, fault: SugawaraFault) -> Self {
        Sugawara { space, fault: Some(fault), cache: Mutex::new(HashMap::new()) }
    }

    pub fn space(&self) -> &FockSpace<S> {
        &self.space
    }

    /// `L̂_n J_{-λ}Ω_j`, or `None` when the result lies above the cutoff.
    pub fn column(&self, n: i64, j: i64, lambda: &Partition) -> Option<Column<S>> {
        let key = (n, j, lambda.clone());
        if let Some(c) = self.cache.lock().unwrap().get(&key) {
            return c.clone();
        }
        let col = self.compute_column(n, j, lambda);
        self.cache.lock().unwrap().insert(key, col.clone());
        col
    }

    fn compute_column(&self, n: i64, j: i64, lambda: &Partition) -> Option<Column<S>> {
        let level = lambda.level() as i64;
        let target = level - n;
        if target > self.space.cutoff() as i64 {
            return None;
        }
        if target < 0 {
            return Some(Arc::new(Vec::new()));
        }
        let half = S::ratio(1, 2);
        let faulty = S::ratio(1, 3);
        let mut acc: BTreeMap<Partition, S> = BTreeMap::new();
        // Normal order puts the larger index on the right; a term survives only
        // if that index is at most the input level.
        let lo = n.min(0) - level - 1;
        let hi = n.max(0) + level + 1;
        for k in lo..=hi {
            let a = n - k;
            let (first, second) = if k >= a { (k, a) } else { (a, k) };
            let Some((c1, mid)) = current_on_basis(&self.space, first, j, lambda) else {
                continue;
            };
            let Some((c2, out)) = current_on_basis(&self.space, second, j, &mid) else {
                continue;
            };
            let weight = match self.fault {
                Some(SugawaraFault::ChargedCrossTerm) if (first == 0) != (second == 0) => &faulty,
                _ => &half,
            };
            let coef = c1 * &c2 * weight;
            let e = acc.entry(out).or_insert_with(S::zero);
            *e += coef;
        }
        let col = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Some(Arc::new(col))
    }

    /// `L̂_n v`, flagging dropped components.
    pub fn apply(&self, n: i64, v: &SectorState<S>) -> SectorState<S> {
        let mut out = SectorState::zero();
        out.set_overflow(v.overflow());
        for ((j, lambda), coef) in v.iter() {
            match self.column(n, *j, lambda) {
                None => out.mark_overflow(),
                Some(col) => {
                    for (mu, c) in col.iter() {
                        out.add_term((*j, mu.clone()), coef.clone() * c);
                    }
                }
            }
        }
        out
    }

    /// `L̂_n ⊗ 1` or `1 ⊗ L̂_n`.
    pub fn apply_tensor(&self, side: Side, n: i64, v: &TensorState<S>) -> TensorState<S> {
        let mut out = TensorState::zero();
        out.set_overflow(v.overflow());
        for (key, coef) in v.iter() {
            let target = match side {
                Side::Left => &key.left,
                Side::Right => &key.right,
            };
            match self.column(n, key.j, target) {
                None => out.mark_overflow(),
                Some(col) => {
                    for (mu, c) in col.iter() {
                        let k = match side {
                            Side::Left => TensorKey::new(key.j, mu.clone(), key.right.clone()),
                            Side::Right => TensorKey::new(key.j, key.left.clone(), mu.clone()),
                        };
                        out.add_term(k, coef.clone() * c);
                    }
                }
            }
        }
        out
    }

    pub fn apply_lorentz(&self, g: LorentzGenerator, v: &TensorState<S>) -> TensorState<S> {
        let mut out = TensorState::zero();
        for (side, n, sign) in g.terms() {
            out.add_scaled(&self.apply_tensor(side, n, v), &S::from_i64(sign));
        }
        out
    }
}
