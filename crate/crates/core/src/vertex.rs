//! The charged primary field `Y_α(z) = c_α E⁻(α,z) E⁺(α,z) z^{αJ_0}`.
//!
//! Modes are keyed by the integer level shift `δ` rather than the real mode
//! index `s`; on the sector with charge `β` the two are related by
//! `s = -αβ - d - δ` with `d = α²/2`. The factor `z^{αJ_0}` only enters that
//! conversion. On the monomial basis the mode matrices do not depend on the
//! source sector at all; the charge shift `c_α` just relabels the sector.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{partitions_of, sub_multisets, FockSpace, Partition, SectorState};
use crate::heisenberg::annihilate_monomial;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VertexError {
    #[error("alpha = {alpha} is not an integer multiple of alpha0 = {alpha0}")]
    NotInLattice { alpha: String, alpha0: String },
    #[error("alpha0 must be nonzero")]
    ZeroAlpha0,
    #[error("power iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Which exponential factor: `E⁺` lowers the level, `E⁻` raises it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ESign {
    Plus,
    Minus,
}

/// The unitary charge shift `c_α : H_β → H_{β+α}` for `α = multiplier·α0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChargeShift {
    pub multiplier: i64,
}

impl ChargeShift {
    /// Fails unless `alpha / alpha0` is an integer (within `tol` in float mode).
    pub fn from_alpha<S: Scalar>(alpha: &S, alpha0: &S, tol: f64) -> Result<Self, VertexError> {
        if alpha0.is_zero() {
            return Err(VertexError::ZeroAlpha0);
        }
        let q = alpha.clone() / alpha0.clone();
        q.to_integer(tol).map(|multiplier| ChargeShift { multiplier }).ok_or_else(|| {
            VertexError::NotInLattice { alpha: alpha.render_re(), alpha0: alpha0.render_re() }
        })
    }

    pub fn target_sector(self, j: i64) -> i64 {
        j + self.multiplier
    }

    pub fn apply<S: Scalar>(self, v: &SectorState<S>) -> SectorState<S> {
        v.map_keys(|(j, p)| (j + self.multiplier, p.clone()))
    }
}

/// Level-graded coefficients of `E^±(α, z)`: the coefficient of `z^{∓k}` is
/// `Σ_{λ ⊢ k} c_λ J_{∓λ}` with `c_λ = (±α)^{ℓ(λ)}/z_λ`, where the sign is
/// `+` for `E⁻` and `-` for `E⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct EExpansion<S> {
    pub sign: ESign,
    pub multiplier: i64,
    levels: Vec<BTreeMap<Partition, S>>,
}

impl<S: Scalar> EExpansion<S> {
    fn build(sign: ESign, multiplier: i64, alpha: &S, max_level: u32) -> Self {
        let base = match sign {
            ESign::Minus => alpha.clone(),
            ESign::Plus => -alpha.clone(),
        };
        // powers of the signed α up to the longest partition
        let mut powers = vec![S::one()];
        for _ in 0..max_level {
            let next = powers.last().unwrap().clone() * &base;
            powers.push(next);
        }
        let levels = (0..=max_level)
            .map(|k| {
                partitions_of(k)
                    .into_iter()
                    .map(|lambda| {
                        let c = powers[lambda.len()].clone() / S::from_bigint(&lambda.gram());
                        (lambda, c)
                    })
                    .filter(|(_, c)| !c.is_zero())
                    .collect()
            })
            .collect();
        EExpansion { sign, multiplier, levels }
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    /// Terms of the level-`k` coefficient, empty above the table.
    pub fn level(&self, k: u32) -> impl Iterator<Item = (&Partition, &S)> {
        self.levels.get(k as usize).into_iter().flat_map(|m| m.iter())
    }

    pub fn coefficient(&self, lambda: &Partition) -> S {
        self.levels
            .get(lambda.level() as usize)
            .and_then(|m| m.get(lambda))
            .cloned()
            .unwrap_or_else(S::zero)
    }
}

type Column<S> = Arc<Vec<(Partition, S)>>;

/// Mode operators of the charged fields `Y_{kα0}` on a truncated space.
#[derive(Debug)]
pub struct VertexField<S> {
    space: FockSpace<S>,
    e_tables: Mutex<HashMap<(ESign, i64), Arc<EExpansion<S>>>>,
    columns: Mutex<HashMap<(i64, i64, Partition), Option<Column<S>>>>,
}

impl<S: Scalar> VertexField<S> {
    pub fn new(space: FockSpace<S>) -> Self {
        VertexField { space, e_tables: Mutex::new(HashMap::new()), columns: Mutex::new(HashMap::new()) }
    }

    pub fn space(&self) -> &FockSpace<S> {
        &self.space
    }

    pub fn alpha(&self, multiplier: i64) -> S {
        self.space.alpha0.clone() * S::from_i64(multiplier)
    }

    /// Conformal dimension `d = α²/2`.
    pub fn dimension(&self, multiplier: i64) -> S {
        let a = self.alpha(multiplier);
        a.clone() * &a / S::from_i64(2)
    }

    /// Real mode index `s = -αβ - d - δ` of the level-shift-`δ` mode on sector `j`.
    pub fn mode_index(&self, multiplier: i64, delta: i64, j: i64) -> S {
        -(self.alpha(multiplier) * &self.space.charge(j)) - self.dimension(multiplier) - S::from_i64(delta)
    }

    pub fn shift(&self, alpha: &S, tol: f64) -> Result<ChargeShift, VertexError> {
        ChargeShift::from_alpha(alpha, &self.space.alpha0, tol)
    }

    /// Memoized coefficient table of `E^±(kα0, z)` up to the level cutoff.
    pub fn expand_e(&self, sign: ESign, multiplier: i64) -> Arc<EExpansion<S>> {
        let key = (sign, multiplier);
        if let Some(t) = self.e_tables.lock().unwrap().get(&key) {
            return t.clone();
        }
        let table = Arc::new(EExpansion::build(sign, multiplier, &self.alpha(multiplier), self.space.cutoff()));
        self.e_tables.lock().unwrap().insert(key, table.clone());
        table
    }

    /// `Y_δ J_{-λ}Ω` (sector label omitted), or `None` if the image lies above
    /// the cutoff.
    pub fn column(&self, multiplier: i64, delta: i64, lambda: &Partition) -> Option<Column<S>> {
        let key = (multiplier, delta, lambda.clone());
        if let Some(c) = self.columns.lock().unwrap().get(&key) {
            return c.clone();
        }
        let col = self.compute_column(multiplier, delta, lambda);
        self.columns.lock().unwrap().insert(key, col.clone());
        col
    }

    fn compute_column(&self, multiplier: i64, delta: i64, lambda: &Partition) -> Option<Column<S>> {
        let level = lambda.level() as i64;
        let target = level + delta;
        if target > self.space.cutoff() as i64 {
            return None;
        }
        if target < 0 {
            return Some(Arc::new(Vec::new()));
        }
        let e_minus = self.expand_e(ESign::Minus, multiplier);
        let e_plus = self.expand_e(ESign::Plus, multiplier);
        let mut acc: BTreeMap<Partition, S> = BTreeMap::new();
        // E⁺ at level b hits J_{-λ}Ω only through monomials μ ⊆ λ.
        for (mu, _) in sub_multisets(lambda) {
            let b = mu.level() as i64;
            let a = delta + b;
            if a < 0 {
                continue;
            }
            let Some((count, rest)) = annihilate_monomial(&mu, lambda) else {
                continue;
            };
            let lowered = e_plus.coefficient(&mu) * &S::from_bigint(&count);
            if lowered.is_zero() {
                continue;
            }
            for (nu, c) in e_minus.level(a as u32) {
                let e = acc.entry(nu.union(&rest)).or_insert_with(S::zero);
                *e += lowered.clone() * c;
            }
        }
        Some(Arc::new(acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()))
    }

    /// Level-shift-`δ` mode of `Y_{kα0}` applied to `v`: every component moves
    /// from sector `j` to `j + k`. Components leaving the level cutoff or the
    /// charge window are dropped and flagged.
    pub fn apply_mode(&self, multiplier: i64, delta: i64, v: &SectorState<S>) -> SectorState<S> {
        let mut out = SectorState::zero();
        out.set_overflow(v.overflow());
        for ((j, lambda), coef) in v.iter() {
            let target = j + multiplier;
            match self.column(multiplier, delta, lambda) {
                None => out.mark_overflow(),
                Some(col) if !col.is_empty() && !self.space.trunc.in_window(target) => out.mark_overflow(),
                Some(col) => {
                    for (mu, c) in col.iter() {
                        out.add_term((target, mu.clone()), coef.clone() * c);
                    }
                }
            }
        }
        out
    }

    /// As [`apply_mode`](Self::apply_mode) with `α` given as a scalar that
    /// must lie in `α0·ℤ`.
    pub fn apply_y_mode(&self, alpha: &S, delta: i64, v: &SectorState<S>, tol: f64) -> Result<SectorState<S>, VertexError> {
        let shift = self.shift(alpha, tol)?;
        Ok(self.apply_mode(shift.multiplier, delta, v))
    }

    /// Independent route to the same mode: matrix elements obtained by peeling
    /// current modes off bra and ket with `[Ĵ_m, Y_δ] = α Y_{δ-m}`.
    pub fn apply_mode_recursive(&self, multiplier: i64, delta: i64, v: &SectorState<S>) -> SectorState<S> {
        let alpha = self.alpha(multiplier);
        let mut memo = HashMap::new();
        let mut out = SectorState::zero();
        out.set_overflow(v.overflow());
        for ((j, lambda), coef) in v.iter() {
            let target_level = lambda.level() as i64 + delta;
            if target_level < 0 {
                continue;
            }
            if target_level > self.space.cutoff() as i64 || !self.space.trunc.in_window(j + multiplier) {
                out.mark_overflow();
                continue;
            }
            for mu in partitions_of(target_level as u32) {
                let m = recursive_element(&alpha, &mu, delta, lambda, &mut memo);
                if m.is_zero() {
                    continue;
                }
                let c = m / S::from_bigint(&mu.gram());
                out.add_term((j + multiplier, mu), coef.clone() * &c);
            }
        }
        out
    }

    /// `⟨J_{-μ}Ω_{β+α}, Y_δ J_{-λ}Ω_β⟩` via the commutator recursion.
    pub fn matrix_element_recursive(&self, multiplier: i64, mu: &Partition, delta: i64, lambda: &Partition) -> S {
        let alpha = self.alpha(multiplier);
        recursive_element(&alpha, mu, delta, lambda, &mut HashMap::new())
    }

    /// Operator norm of the truncated level-shift-`δ` block (source sector 0,
    /// all source levels whose image stays below the cutoff), computed in
    /// floating point by power iteration on `AᵀA` in an orthonormal basis.
    pub fn truncated_mode_norm(&self, multiplier: i64, delta: i64) -> Result<f64, VertexError> {
        let cutoff = self.space.cutoff() as i64;
        let mut best = 0.0f64;
        for level in 0..=cutoff {
            let target = level + delta;
            if target < 0 || target > cutoff {
                continue;
            }
            let sources = partitions_of(level as u32);
            let targets = partitions_of(target as u32);
            let index: HashMap<&Partition, usize> = targets.iter().enumerate().map(|(i, p)| (p, i)).collect();
            let mut a = vec![vec![0.0f64; sources.len()]; targets.len()];
            for (col_idx, lambda) in sources.iter().enumerate() {
                let col = self.column(multiplier, delta, lambda).expect("target level within cutoff");
                let src_norm = gram_f64(lambda).sqrt();
                for (mu, c) in col.iter() {
                    a[index[mu]][col_idx] = c.re_f64() * gram_f64(mu).sqrt() / src_norm;
                }
            }
            best = best.max(spectral_norm(&a)?);
        }
        Ok(best)
    }

    /// Matrix entries of the level-shift-`δ` block on source sector 0, for export.
    pub fn mode_block(&self, multiplier: i64, delta: i64) -> Vec<ModeBlockEntry<S>> {
        let cutoff = self.space.cutoff() as i64;
        let mut out = Vec::new();
        for level in 0..=cutoff {
            let target = level + delta;
            if target < 0 || target > cutoff {
                continue;
            }
            for lambda in partitions_of(level as u32) {
                let col = self.column(multiplier, delta, &lambda).expect("target level within cutoff");
                for (mu, c) in col.iter() {
                    out.push(ModeBlockEntry {
                        source_level: level as u32,
                        source: lambda.clone(),
                        target: mu.clone(),
                        coefficient: c.clone(),
                    });
                }
            }
        }
        out
    }
}

/// One nonzero entry of an exported mode block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBlockEntry<S> {
    pub source_level: u32,
    pub source: Partition,
    pub target: Partition,
    pub coefficient: S,
}

fn gram_f64(p: &Partition) -> f64 {
    use num_traits::ToPrimitive;
    p.gram().to_f64().unwrap_or(f64::INFINITY)
}

fn recursive_element<S: Scalar>(
    alpha: &S,
    mu: &Partition,
    delta: i64,
    lambda: &Partition,
    memo: &mut HashMap<(Partition, i64, Partition), S>,
) -> S {
    if mu.level() as i64 != lambda.level() as i64 + delta {
        return S::zero();
    }
    if mu.is_empty() && lambda.is_empty() {
        return S::one();
    }
    let key = (mu.clone(), delta, lambda.clone());
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let value = if let Some(&p) = mu.parts().first() {
        // ⟨J_{-p}X, Y_δ w⟩ = ⟨X, (α Y_{δ-p} + Y_δ J_p) w⟩
        let rest = mu.without_part(p).unwrap();
        let mut v = alpha.clone() * &recursive_element(alpha, &rest, delta - p as i64, lambda, memo);
        let mult = lambda.multiplicity(p);
        if mult > 0 {
            let lowered = lambda.without_part(p).unwrap();
            let inner = recursive_element(alpha, &rest, delta, &lowered, memo);
            v += inner * &S::from_i64(p as i64 * mult as i64);
        }
        v
    } else {
        // ⟨Ω, Y_δ J_{-q} w⟩ = -α ⟨Ω, Y_{δ+q} w⟩
        let q = lambda.parts()[0];
        let lowered = lambda.without_part(q).unwrap();
        -(alpha.clone() * &recursive_element(alpha, mu, delta + q as i64, &lowered, memo))
    };
    memo.insert(key, value.clone());
    value
}

/// `‖Y_{α,-n-d}Ω‖² = Π_{k<n} (2d+k)/(k+1)`, i.e. the binomial `C(2d+n-1, n)`.
pub fn vacuum_mode_norm_sq<S: Scalar>(d: &S, n: u32) -> S {
    let two_d = d.clone() * &S::from_i64(2);
    let mut acc = S::one();
    for k in 0..n as i64 {
        acc = acc * &(two_d.clone() + S::from_i64(k)) / S::from_i64(k + 1);
    }
    acc
}

/// The whole table `n = 0..=n_max` in one pass.
pub fn vacuum_mode_norm_sq_table<S: Scalar>(d: &S, n_max: u32) -> Vec<S> {
    let two_d = d.clone() * &S::from_i64(2);
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut acc = S::one();
    out.push(acc.clone());
    for k in 0..n_max as i64 {
        acc = acc * &(two_d.clone() + S::from_i64(k)) / S::from_i64(k + 1);
        out.push(acc.clone());
    }
    out
}

const MAX_POWER_STEPS: usize = 200_000;

/// Largest singular value of a dense matrix by power iteration on `AᵀA`.
pub fn spectral_norm(a: &[Vec<f64>]) -> Result<f64, VertexError> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Ok(0.0);
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        let av: Vec<f64> = a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect();
        (0..cols).map(|c| (0..rows).map(|r| a[r][c] * av[r]).sum()).collect()
    };
    let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3).collect();
    normalize(&mut v);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_POWER_STEPS {
        let w = apply(&v);
        let theta: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        if theta <= f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        residual = w.iter().zip(&v).map(|(x, y)| (x - theta * y).powi(2)).sum::<f64>().sqrt();
        if residual <= 1e-12 * theta {
            return Ok(theta.sqrt());
        }
        v = w;
        normalize(&mut v);
    }
    Err(VertexError::NoConvergence { iterations: MAX_POWER_STEPS, residual })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
