//! Perturbed generators on the diagonal tensor space and their weak
//! commutation relations.
//!
//! A weak commutator `⟨A*Φ₁, BΦ₂⟩ - ⟨B*Φ₁, AΦ₂⟩` of two generators
//! `X = (Sugawara part) + c·Ψ^sym_m` splits into three pieces:
//!
//! * the Sugawara-Sugawara piece, a finite computation;
//! * the mixed piece, also finite: the Sugawara side only sees the levels of
//!   an interior vector, where the band-truncated Ψ image is exact;
//! * the Ψ-Ψ piece, an infinite sum over intermediate bands whose truncation
//!   error is bounded by the product of the dropped tail norms.
//!
//! The first two must reproduce the target relation exactly; the third must
//! fit inside its tail budget.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{loglog_slope, tail_budget, TailBudget};
use crate::fock::{partitions_of, FockSpace, Partition, TensorKey, TensorState};
use crate::heisenberg::Side;
use crate::scalar::Scalar;
use crate::twodim::{TailReport, TimeZeroField, TimeZeroMode, TwodimError};
use crate::virasoro::{Sugawara, SugawaraFault};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesitterError {
    #[error("test vector at level {level} is not interior (cutoff {cutoff}, buffer {buffer})")]
    NotInterior { level: u32, cutoff: u32, buffer: u32 },
    #[error("test vector in sector {j} is too close to the charge window edge")]
    SectorNotInterior { j: i64 },
    #[error("generator application left the truncation; increase the interior buffer")]
    Overflow,
    #[error("the {0} family needs complex arithmetic")]
    NeedsComplex(Family),
    #[error("lorentz generators exist only for m in {{-1, 0, 1}}, got {0}")]
    BadLorentzIndex(i64),
    #[error(transparent)]
    Twodim(#[from] TwodimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lorentz,
    VirasoroC0,
    DHalf,
    /// Bare symmetric time-zero modes, for the commutativity suite.
    Psi,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Lorentz => "lorentz",
            Family::VirasoroC0 => "virasoro_c0",
            Family::DHalf => "d_half",
            Family::Psi => "psi",
        };
        f.write_str(s)
    }
}

/// `Σ c·L̂_n (on one side) + c_Ψ·Ψ^sym_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorExpr<S> {
    pub l_terms: Vec<(Side, i64, S)>,
    pub psi: Option<(i64, S)>,
}

impl<S: Scalar> GeneratorExpr<S> {
    pub fn zero() -> Self {
        GeneratorExpr { l_terms: Vec::new(), psi: None }
    }

    pub fn psi_only(m: i64, coef: S) -> Self {
        GeneratorExpr { l_terms: Vec::new(), psi: Some((m, coef)) }
    }

    /// Formal adjoint from `L̂_n† = L̂_{-n}` and `(Ψ^sym_m)† = Ψ^sym_{-m}`.
    pub fn adjoint(&self) -> Self {
        GeneratorExpr {
            l_terms: self.l_terms.iter().map(|(s, n, c)| (*s, -n, c.conj())).collect(),
            psi: self.psi.as_ref().map(|(m, c)| (-m, c.conj())),
        }
    }

    pub fn scale(&self, k: &S) -> Self {
        GeneratorExpr {
            l_terms: self.l_terms.iter().map(|(s, n, c)| (*s, *n, c.clone() * k)).filter(|t| !t.2.is_zero()).collect(),
            psi: self.psi.as_ref().map(|(m, c)| (*m, c.clone() * k)).filter(|t| !t.1.is_zero()),
        }
    }

    /// Largest level shift of the Sugawara part.
    pub fn l_reach(&self) -> u32 {
        self.l_terms.iter().map(|t| t.1.unsigned_abs() as u32).max().unwrap_or(0)
    }
}

/// A member of one of the perturbed families.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGenerator<S> {
    pub family: Family,
    pub m: i64,
    pub lambda: S,
}

impl<S: Scalar> PerturbedGenerator<S> {
    pub fn new(family: Family, m: i64, lambda: S) -> Self {
        PerturbedGenerator { family, m, lambda }
    }

    pub fn expr(&self) -> Result<GeneratorExpr<S>, DesitterError> {
        let m = self.m;
        let one = S::one;
        let mut e = GeneratorExpr::zero();
        match self.family {
            Family::Lorentz => match m {
                0 => {
                    e.l_terms = vec![(Side::Left, 0, one()), (Side::Right, 0, -one())];
                }
                1 | -1 => {
                    e.l_terms = vec![(Side::Left, m, one()), (Side::Right, -m, one())];
                    e.psi = Some((m, self.lambda.clone()));
                }
                _ => return Err(DesitterError::BadLorentzIndex(m)),
            },
            Family::VirasoroC0 => {
                let i = S::imaginary_unit().ok_or(DesitterError::NeedsComplex(Family::VirasoroC0))?;
                e.l_terms = vec![(Side::Left, m, one()), (Side::Right, -m, -one())];
                e.psi = Some((m, i * &self.lambda * &S::from_i64(m)));
            }
            Family::DHalf => {
                e.l_terms = vec![(Side::Left, m, one()), (Side::Right, -m, -one())];
                e.psi = Some((m, self.lambda.clone()));
            }
            Family::Psi => e.psi = Some((m, one())),
        }
        e.psi = e.psi.filter(|(_, c)| !c.is_zero());
        Ok(e)
    }

    /// `(m - n) X_{m+n}` for `A = X_m`, `B = X_n`.
    pub fn bracket_target(family: Family, m: i64, n: i64, lambda: &S) -> Result<GeneratorExpr<S>, DesitterError> {
        if m == n || family == Family::Psi {
            return Ok(GeneratorExpr::zero());
        }
        let x = PerturbedGenerator::new(family, m + n, lambda.clone()).expr()?;
        Ok(x.scale(&S::from_i64(m - n)))
    }
}

/// Settings shared by every weak-commutator evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub alpha_mult: i64,
    pub interior_buffer: u32,
    pub tolerance: f64,
    pub fault: Option<SugawaraFault>,
}

/// Band-truncated `Ψ^sym_m Φ` with its tail estimate.
#[derive(Debug, Clone)]
pub struct PsiImage<S> {
    pub state: TensorState<S>,
    pub report: TailReport<S>,
    /// Estimate of the squared norm of the dropped part.
    pub tail_sq: TailBudget,
    pub fitted_slope: Option<f64>,
}

/// The three pieces of a weak commutator and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakCommutator<S> {
    pub ll: S,
    pub mixed: S,
    pub psipsi: S,
    pub target_l: S,
    pub target_psi: S,
    /// Bound on the truncation error of `psipsi`.
    pub budget: TailBudget,
}

impl<S: Scalar> WeakCommutator<S> {
    pub fn ll_residual(&self) -> S {
        self.ll.clone() - self.target_l.clone()
    }

    pub fn mixed_residual(&self) -> S {
        self.mixed.clone() - self.target_psi.clone()
    }

    pub fn total(&self) -> S {
        self.ll.clone() + self.mixed.clone() + self.psipsi.clone()
    }

    pub fn residual(&self) -> S {
        self.ll_residual() + self.mixed_residual() + self.psipsi.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    IdentityFailure,
    BudgetExceeded,
}

struct Applied<S> {
    l: TensorState<S>,
    psi: Option<(S, Arc<PsiImage<S>>)>,
}

/// Caches Ψ images of the two test vectors of one pair.
#[derive(Default)]
pub struct PairCache<S> {
    images: HashMap<(u8, i64), Arc<PsiImage<S>>>,
}

impl<S> PairCache<S> {
    pub fn new() -> Self {
        PairCache { images: HashMap::new() }
    }
}

/// Evaluates weak commutators on one truncation.
#[derive(Debug, Clone)]
pub struct Evaluator<S> {
    sugawara: Arc<Sugawara<S>>,
    psi: TimeZeroField<S>,
    pub config: CheckConfig,
}

impl<S: Scalar> Evaluator<S> {
    pub fn new(space: FockSpace<S>, config: CheckConfig) -> Self {
        let sugawara = match config.fault {
            Some(f) => Sugawara::with_fault(space.clone(), f),
            None => Sugawara::new(space.clone()),
        };
        Evaluator { sugawara: Arc::new(sugawara), psi: TimeZeroField::new(space), config }
    }

    pub fn space(&self) -> &FockSpace<S> {
        self.sugawara.space()
    }

    pub fn time_zero(&self) -> &TimeZeroField<S> {
        &self.psi
    }

    /// Rejects test vectors too close to the level cutoff or the window edge.
    pub fn check_interior(&self, phi: &TensorState<S>) -> Result<(), DesitterError> {
        let cutoff = self.space().cutoff();
        let buffer = self.config.interior_buffer;
        let level = phi.max_level();
        if level + buffer > cutoff {
            return Err(DesitterError::NotInterior { level, cutoff, buffer });
        }
        let k = self.config.alpha_mult;
        for j in phi.sectors() {
            if !self.space().trunc.in_window(j + k) || !self.space().trunc.in_window(j - k) {
                return Err(DesitterError::SectorNotInterior { j });
            }
        }
        Ok(())
    }

    pub fn psi_image(&self, m: i64, phi: &TensorState<S>) -> Result<PsiImage<S>, DesitterError> {
        let (state, report) = self.psi.apply(TimeZeroMode::symmetric(self.config.alpha_mult, m), phi)?;
        let (tail_sq, fitted_slope) = estimate_tail(&report);
        Ok(PsiImage { state, report, tail_sq, fitted_slope })
    }

    fn cached_image(
        &self,
        cache: &mut PairCache<S>,
        slot: u8,
        m: i64,
        phi: &TensorState<S>,
    ) -> Result<Arc<PsiImage<S>>, DesitterError> {
        if let Some(img) = cache.images.get(&(slot, m)) {
            return Ok(img.clone());
        }
        let img = Arc::new(self.psi_image(m, phi)?);
        cache.images.insert((slot, m), img.clone());
        Ok(img)
    }

    fn apply_l(&self, expr: &GeneratorExpr<S>, phi: &TensorState<S>) -> Result<TensorState<S>, DesitterError> {
        let mut out = TensorState::zero();
        for (side, n, c) in &expr.l_terms {
            out.add_scaled(&self.sugawara.apply_tensor(*side, *n, phi), c);
        }
        if out.overflow() {
            return Err(DesitterError::Overflow);
        }
        Ok(out)
    }

    fn apply(
        &self,
        expr: &GeneratorExpr<S>,
        slot: u8,
        phi: &TensorState<S>,
        cache: &mut PairCache<S>,
    ) -> Result<Applied<S>, DesitterError> {
        let l = self.apply_l(expr, phi)?;
        let psi = match &expr.psi {
            Some((m, c)) => Some((c.clone(), self.cached_image(cache, slot, *m, phi)?)),
            None => None,
        };
        Ok(Applied { l, psi })
    }

    /// `⟨A*Φ₁, BΦ₂⟩ - ⟨B*Φ₁, AΦ₂⟩` split into pieces, with the target
    /// `⟨Φ₁, TΦ₂⟩` split the same way.
    pub fn weak_commutator(
        &self,
        a: &GeneratorExpr<S>,
        b: &GeneratorExpr<S>,
        target: &GeneratorExpr<S>,
        phi1: &TensorState<S>,
        phi2: &TensorState<S>,
        cache: &mut PairCache<S>,
    ) -> Result<WeakCommutator<S>, DesitterError> {
        self.check_interior(phi1)?;
        self.check_interior(phi2)?;
        let a_star = self.apply(&a.adjoint(), 1, phi1, cache)?;
        let b_phi = self.apply(b, 2, phi2, cache)?;
        let b_star = self.apply(&b.adjoint(), 1, phi1, cache)?;
        let a_phi = self.apply(a, 2, phi2, cache)?;
        let first = pair_parts(&a_star, &b_phi);
        let second = pair_parts(&b_star, &a_phi);

        let t_phi = self.apply(target, 2, phi2, cache)?;
        let target_l = phi1.inner_product(&t_phi.l);
        let target_psi = match &t_phi.psi {
            Some((c, img)) => c.clone() * &phi1.inner_product(&img.state),
            None => S::zero(),
        };
        let budget = match (first.3, second.3) {
            (TailBudget::Finite(x), TailBudget::Finite(y)) => TailBudget::Finite(2.0 * (x + y)),
            _ => TailBudget::Infinite,
        };
        Ok(WeakCommutator {
            ll: first.0 - second.0,
            mixed: first.1 - second.1,
            psipsi: first.2 - second.2,
            target_l,
            target_psi,
            budget,
        })
    }

    /// Pass/fail for one evaluation: exact pieces must vanish, the Ψ-Ψ piece
    /// must fit in the budget.
    pub fn verdict(&self, w: &WeakCommutator<S>) -> Verdict {
        let tol = self.config.tolerance;
        if !w.ll_residual().is_negligible(tol) || !w.mixed_residual().is_negligible(tol) {
            return Verdict::IdentityFailure;
        }
        if w.psipsi.abs_f64() <= w.budget.value() + tol {
            Verdict::Pass
        } else {
            Verdict::BudgetExceeded
        }
    }
}

/// `(ll, mixed, psipsi, bound)` contributions of `⟨x, y⟩`.
fn pair_parts<S: Scalar>(x: &Applied<S>, y: &Applied<S>) -> (S, S, S, TailBudget) {
    let ll = x.l.inner_product(&y.l);
    let mut mixed = S::zero();
    if let Some((c, img)) = &y.psi {
        mixed += c.clone() * &x.l.inner_product(&img.state);
    }
    if let Some((c, img)) = &x.psi {
        mixed += c.conj() * &img.state.inner_product(&y.l);
    }
    let (psipsi, bound) = match (&x.psi, &y.psi) {
        (Some((cx, ix)), Some((cy, iy))) => {
            let v = cx.conj() * cy * &ix.state.inner_product(&iy.state);
            let bound = match (ix.tail_sq, iy.tail_sq) {
                (TailBudget::Finite(tx), TailBudget::Finite(ty)) => {
                    TailBudget::Finite(cx.abs_f64() * cy.abs_f64() * (tx * ty).sqrt())
                }
                _ => TailBudget::Infinite,
            };
            (v, bound)
        }
        _ => (S::zero(), TailBudget::Finite(0.0)),
    };
    (ll, mixed, psipsi, bound)
}

/// Squared-norm estimate of the dropped bands from a power-law fit over the
/// upper half of the complete bands.
pub fn estimate_tail<S: Scalar>(report: &TailReport<S>) -> (TailBudget, Option<f64>) {
    let series: Vec<(f64, f64)> = report.full_band_series().into_iter().filter(|(_, v)| *v > 0.0).collect();
    let Some(&(last_n, last_v)) = series.last() else {
        return (TailBudget::Infinite, None);
    };
    let lo = (last_n / 2.0).floor().max(1.0);
    match loglog_slope(&series, (lo, last_n)) {
        Ok(slope) => (tail_budget(Some((last_n, last_v)), slope), Some(slope)),
        Err(_) => (TailBudget::Infinite, None),
    }
}

/// One line of a relation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    pub m: i64,
    pub n: i64,
    pub lambda: String,
    pub alpha: String,
    #[serde(rename = "L")]
    pub level_cutoff: u32,
    pub buffer: u32,
    pub residual_re: String,
    pub residual_im: String,
    /// `None` when the fitted decay gives no finite bound.
    pub tail_budget: Option<f64>,
    pub verdict: Verdict,
    pub phi1: String,
    pub phi2: String,
    pub ll_residual: String,
    pub mixed_residual: String,
    pub psipsi_re: String,
    pub psipsi_im: String,
    pub exact_zero: bool,
}

/// Relation rows plus the symbolic coefficient checks that go with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub rows: Vec<ReportRow>,
    pub coefficient_checks: Vec<CoefficientCheck>,
}

impl RelationReport {
    pub fn identity_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == Verdict::IdentityFailure).count()
            + self.coefficient_checks.iter().filter(|c| !c.holds).count()
    }

    pub fn budget_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == Verdict::BudgetExceeded).count()
    }
}

/// A symbolic identity between mode coefficients, evaluated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub name: String,
    pub d: String,
    pub m: i64,
    pub n: i64,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

fn label(phi: &TensorKey) -> String {
    format!("j={} {}x{}", phi.j, phi.left, phi.right)
}

/// Test-vector pairs: the vacuum pair first, then `count` random basis pairs
/// with both levels at most `max_level` in sectors `[-reach, reach]`. The
/// sectors mostly agree and otherwise differ by `±2k`, the only offsets at
/// which the two time-zero images can overlap. Half of the same-sector pairs
/// repeat one vector; the rest keep the level differences within two of each
/// other.
pub fn sample_pairs(seed: u64, count: usize, max_level: u32, reach: i64, k: i64) -> Vec<(TensorKey, TensorKey)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vac = TensorKey::new(0, Partition::empty(), Partition::empty());
    let mut out = vec![(vac.clone(), vac)];
    let pick = |rng: &mut ChaCha8Rng, level: u32| {
        let parts = partitions_of(level);
        parts[rng.gen_range(0..parts.len())].clone()
    };
    let max = max_level as i64;
    for _ in 0..count {
        let j2 = rng.gen_range(-reach..=reach);
        let shifts: Vec<i64> = [-2 * k, 2 * k].into_iter().filter(|s| (j2 + s).abs() <= reach).collect();
        let j1 = if shifts.is_empty() || rng.gen_bool(0.75) { j2 } else { j2 + shifts[rng.gen_range(0..shifts.len())] };
        let (l2, r2) = (rng.gen_range(0..=max_level), rng.gen_range(0..=max_level));
        let b = TensorKey::new(j2, pick(&mut rng, l2), pick(&mut rng, r2));
        if j1 == j2 && rng.gen_bool(0.5) {
            out.push((b.clone(), b));
            continue;
        }
        let diff = r2 as i64 - l2 as i64 + rng.gen_range(-2..=2);
        let lefts: Vec<i64> = (0..=max).filter(|l| (0..=max).contains(&(l + diff))).collect();
        let (l1, r1) = if lefts.is_empty() {
            (rng.gen_range(0..=max_level), rng.gen_range(0..=max_level))
        } else {
            let l = lefts[rng.gen_range(0..lefts.len())];
            (l as u32, (l + diff) as u32)
        };
        let a = TensorKey::new(j1, pick(&mut rng, l1), pick(&mut rng, r1));
        out.push((a, b));
    }
    out
}

/// Runs the bracket `[X_m, X_n]` of one family over all cells and pairs.
pub fn family_sweep<S: Scalar>(
    eval: &Evaluator<S>,
    family: Family,
    lambda: &S,
    cells: &[(i64, i64)],
    pairs: &[(TensorKey, TensorKey)],
) -> Result<Vec<ReportRow>, DesitterError> {
    let alpha = eval.space().alpha0.clone() * &S::from_i64(eval.config.alpha_mult);
    let per_pair: Vec<Result<Vec<ReportRow>, DesitterError>> = pairs
        .par_iter()
        .map(|(k1, k2)| {
            let phi1 = TensorState::basis(k1.clone());
            let phi2 = TensorState::basis(k2.clone());
            let mut cache = PairCache::new();
            let mut rows = Vec::new();
            for &(m, n) in cells {
                let a = PerturbedGenerator::new(family, m, lambda.clone()).expr()?;
                let b = PerturbedGenerator::new(family, n, lambda.clone()).expr()?;
                let t = PerturbedGenerator::bracket_target(family, m, n, lambda)?;
                let w = eval.weak_commutator(&a, &b, &t, &phi1, &phi2, &mut cache)?;
                rows.push(row(eval, family, m, n, lambda, &alpha, &w, k1, k2));
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_pair {
        out.extend(r?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn row<S: Scalar>(
    eval: &Evaluator<S>,
    family: Family,
    m: i64,
    n: i64,
    lambda: &S,
    alpha: &S,
    w: &WeakCommutator<S>,
    k1: &TensorKey,
    k2: &TensorKey,
) -> ReportRow {
    let r = w.residual();
    ReportRow {
        family,
        m,
        n,
        lambda: lambda.render_re(),
        alpha: alpha.render_re(),
        level_cutoff: eval.space().cutoff(),
        buffer: eval.config.interior_buffer,
        residual_re: r.render_re(),
        residual_im: r.render_im(),
        tail_budget: w.budget.is_finite().then(|| w.budget.value()),
        verdict: eval.verdict(w),
        phi1: label(k1),
        phi2: label(k2),
        ll_residual: w.ll_residual().render_re(),
        mixed_residual: w.mixed_residual().render_re(),
        psipsi_re: w.psipsi.render_re(),
        psipsi_im: w.psipsi.render_im(),
        exact_zero: r.is_zero(),
    }
}

/// Lorentz cells `(m, n) ∈ {-1, 0, 1}²`.
pub fn lorentz_cells() -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for m in -1..=1 {
        for n in -1..=1 {
            v.push((m, n));
        }
    }
    v
}

/// Cells with `|m|, |n|, |m+n| ≤ range`.
pub fn virasoro_cells(range: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for m in -range..=range {
        for n in -range..=range {
            if (m + n).abs() <= range {
                v.push((m, n));
            }
        }
    }
    v
}

pub fn verify_lorentz<S: Scalar>(
    eval: &Evaluator<S>,
    lambda: &S,
    pairs: &[(TensorKey, TensorKey)],
) -> Result<RelationReport, DesitterError> {
    let rows = family_sweep(eval, Family::Lorentz, lambda, &lorentz_cells(), pairs)?;
    Ok(RelationReport { rows, coefficient_checks: lorentz_coefficient_checks::<S>(&eval.dimension()) })
}

pub fn verify_virasoro_c0<S: Scalar>(
    eval: &Evaluator<S>,
    lambda: &S,
    m_range: i64,
    pairs: &[(TensorKey, TensorKey)],
) -> Result<RelationReport, DesitterError> {
    let rows = family_sweep(eval, Family::VirasoroC0, lambda, &virasoro_cells(m_range), pairs)?;
    let d = eval.dimension();
    let mut checks = Vec::new();
    for (m, n) in virasoro_cells(m_range) {
        let lhs = virasoro_closure(&d, m, n);
        let rhs = S::from_i64((m - n) * (m + n));
        checks.push(check("virasoro_closure", &d, m, n, &lhs, &rhs));
    }
    Ok(RelationReport { rows, coefficient_checks: checks })
}

/// Weak commutators of bare symmetric modes `[Ψ^sym_m, Ψ^sym_n]`, target 0.
pub fn verify_commutativity<S: Scalar>(
    eval: &Evaluator<S>,
    m_range: i64,
    pairs: &[(TensorKey, TensorKey)],
) -> Result<Vec<ReportRow>, DesitterError> {
    let mut cells = Vec::new();
    for m in -m_range..=m_range {
        for n in -m_range..=m_range {
            if m < n {
                cells.push((m, n));
            }
        }
    }
    family_sweep(eval, Family::Psi, &S::one(), &cells, pairs)
}

impl<S: Scalar> Evaluator<S> {
    /// `d = α²/2` of the perturbing field.
    pub fn dimension(&self) -> S {
        self.psi.vertex().dimension(self.config.alpha_mult)
    }
}

/// `(2d-1)m - n`: coefficient of `Ψ_{m+n}` in `[L̂_m⊗1 - 1⊗L̂_{-m}, Ψ_n]`.
pub fn chiral_difference_coefficient<S: Scalar>(d: &S, m: i64, n: i64) -> S {
    (d.clone() * &S::from_i64(2) - S::one()) * &S::from_i64(m) - S::from_i64(n)
}

/// `n·c(m,n) - m·c(n,m)`, the Ψ coefficient of `[V_m, V_n]` over `iλ`.
pub fn virasoro_closure<S: Scalar>(d: &S, m: i64, n: i64) -> S {
    S::from_i64(n) * &chiral_difference_coefficient(d, m, n) - S::from_i64(m) * &chiral_difference_coefficient(d, n, m)
}

/// `c(m,n) - c(n,m)`, the Ψ coefficient of `[W_m, W_n]` over `λ`; equals `2d(m-n)`.
pub fn d_half_mixed<S: Scalar>(d: &S, m: i64, n: i64) -> S {
    chiral_difference_coefficient(d, m, n) - chiral_difference_coefficient(d, n, m)
}

/// `m + n - 2s`: coefficient of `Y_s ⊗ Y_{s-m-n}` in `[L̂_m⊗1 + 1⊗L̂_{-m}, Ψ_n]`.
pub fn lorentz_mixed_coefficient<S: Scalar>(m: i64, n: i64, s: &S) -> S {
    S::from_i64(m + n) - s.clone() * &S::from_i64(2)
}

fn check<S: Scalar>(name: &str, d: &S, m: i64, n: i64, lhs: &S, rhs: &S) -> CoefficientCheck {
    CoefficientCheck {
        name: name.to_string(),
        d: d.render_re(),
        m,
        n,
        lhs: lhs.render_re(),
        rhs: rhs.render_re(),
        holds: (lhs.clone() - rhs.clone()).is_negligible(1e-12),
    }
}

/// The Lorentz mixed terms telescope: `[𝔩_1, Ψ_{-1}] + [Ψ_1, 𝔩_{-1}]` has
/// coefficient `(0 - 2s) - (0 - 2s) = 0` at every `s`, and `[𝔨_0, Ψ_m] = -mΨ_m`.
fn lorentz_coefficient_checks<S: Scalar>(d: &S) -> Vec<CoefficientCheck> {
    let mut out = Vec::new();
    for k in -3i64..=3 {
        let s = S::from_i64(k) - d.clone();
        let lhs = lorentz_mixed_coefficient(1, -1, &s) - lorentz_mixed_coefficient(-1, 1, &s);
        out.push(check("lorentz_mixed_cancellation", d, 1, -1, &lhs, &S::zero()));
    }
    out
}

/// One row of the `d = 1/2` closure table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureRow {
    pub d: String,
    pub m: i64,
    pub n: i64,
    /// `((2d-1)m - n) - ((2d-1)n - m)`
    pub mixed_coefficient: String,
    /// `2d(m - n)`
    pub predicted: String,
    /// `m - n`, what closure of the family would need
    pub closure_target: String,
    pub matches_prediction: bool,
    pub closes: bool,
}

pub fn closure_table<S: Scalar>(d: &S, range: i64) -> Vec<ClosureRow> {
    let mut out = Vec::new();
    for m in -range..=range {
        for n in -range..=range {
            let mixed = d_half_mixed(d, m, n);
            let predicted = d.clone() * &S::from_i64(2 * (m - n));
            let target = S::from_i64(m - n);
            out.push(ClosureRow {
                d: d.render_re(),
                m,
                n,
                mixed_coefficient: mixed.render_re(),
                predicted: predicted.render_re(),
                closure_target: target.render_re(),
                matches_prediction: (mixed.clone() - predicted).is_negligible(1e-12),
                closes: (mixed - target).is_negligible(1e-12),
            });
        }
    }
    out
}

/// Output of the `d = 1/2` exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DHalfReport {
    pub d: String,
    pub closure: Vec<ClosureRow>,
    /// Does the computed mixed piece equal `2dλ(m-n)⟨Φ₁, Ψ^sym_{m+n}Φ₂⟩` on every row?
    pub mixed_matches_prediction: bool,
    pub rows: Vec<ReportRow>,
    /// Fitted slope of the vacuum band norms of `Ψ_{α,0}`; summable only below -1.
    pub vacuum_band_slope: Option<f64>,
}

pub fn explore_d_half<S: Scalar>(
    eval: &Evaluator<S>,
    lambda: &S,
    range: i64,
    pairs: &[(TensorKey, TensorKey)],
) -> Result<DHalfReport, DesitterError> {
    let d = eval.dimension();
    let cells = virasoro_cells(range);
    let rows = family_sweep(eval, Family::DHalf, lambda, &cells, pairs)?;
    // Mixed piece against the family's own prediction 2dλ(m-n)Ψ_{m+n}.
    let mut matches = true;
    for (k1, k2) in pairs {
        let phi1 = TensorState::basis(k1.clone());
        let phi2 = TensorState::basis(k2.clone());
        let mut cache = PairCache::new();
        for &(m, n) in &cells {
            let a = PerturbedGenerator::new(Family::DHalf, m, lambda.clone()).expr()?;
            let b = PerturbedGenerator::new(Family::DHalf, n, lambda.clone()).expr()?;
            let mut t = GeneratorExpr::psi_only(m + n, d.clone() * &S::from_i64(2 * (m - n)) * lambda);
            t.psi = t.psi.filter(|(_, c)| !c.is_zero());
            let w = eval.weak_commutator(&a, &b, &t, &phi1, &phi2, &mut cache)?;
            if !w.mixed_residual().is_negligible(eval.config.tolerance) {
                matches = false;
            }
        }
    }
    let vac = TensorState::vacuum(0);
    let img = eval.psi_image(0, &vac)?;
    Ok(DHalfReport {
        d: d.render_re(),
        closure: closure_table(&d, range),
        mixed_matches_prediction: matches,
        rows,
        vacuum_band_slope: img.fitted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Truncation;
    use crate::{GaussRational, Rational};

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.iter().copied()).unwrap()
    }

    fn eval_q(l: u32, buffer: u32) -> Evaluator<Rational> {
        let space = FockSpace::new(Truncation::new(l, -2, 2).unwrap(), Rational::ratio(1, 2));
        Evaluator::new(space, CheckConfig { alpha_mult: 1, interior_buffer: buffer, tolerance: 0.0, fault: None })
    }

    fn eval_g(l: u32, buffer: u32) -> Evaluator<GaussRational> {
        let half = GaussRational::new(Rational::ratio(1, 2), Rational::ratio(0, 1));
        let space = FockSpace::new(Truncation::new(l, -2, 2).unwrap(), half);
        Evaluator::new(space, CheckConfig { alpha_mult: 1, interior_buffer: buffer, tolerance: 0.0, fault: None })
    }

    #[test]
    fn generator_adjoints_are_the_opposite_modes() {
        for family in [Family::Lorentz, Family::DHalf, Family::Psi] {
            for m in -1i64..=1 {
                let x = PerturbedGenerator::new(family, m, Rational::ratio(1, 3)).expr().unwrap();
                let y = PerturbedGenerator::new(family, -m, Rational::ratio(1, 3)).expr().unwrap();
                let mut xa = x.adjoint().l_terms;
                let mut yl = y.l_terms.clone();
                xa.sort_by_key(|t| (t.0, t.1));
                yl.sort_by_key(|t| (t.0, t.1));
                assert_eq!(xa, yl);
                assert_eq!(x.adjoint().psi, y.psi);
            }
        }
        let i = GaussRational::new(Rational::ratio(0, 1), Rational::ratio(1, 1));
        let v = PerturbedGenerator::new(Family::VirasoroC0, 2, GaussRational::new(Rational::ratio(1, 2), Rational::ratio(0, 1)));
        let e = v.expr().unwrap();
        assert_eq!(e.psi, Some((2, i.clone())));
        assert_eq!(e.adjoint().psi, Some((-2, -i)));
        assert!(PerturbedGenerator::new(Family::VirasoroC0, 1, Rational::ratio(1, 1)).expr().is_err());
    }

    #[test]
    fn unperturbed_lorentz_on_vacuum_is_exact_zero() {
        let eval = eval_q(8, 2);
        let pairs = sample_pairs(1, 2, 2, 1, 1);
        let report = verify_lorentz(&eval, &Rational::ratio(0, 1), &pairs).unwrap();
        for r in &report.rows {
            assert!(r.exact_zero, "{r:?}");
            assert_eq!(r.verdict, Verdict::Pass);
        }
        assert!(report.coefficient_checks.iter().all(|c| c.holds));
    }

    #[test]
    fn lorentz_mixed_part_exact_with_coupling() {
        let eval = eval_q(8, 4);
        let pairs = vec![
            (TensorKey::new(1, Partition::empty(), p(&[1])), TensorKey::new(0, Partition::empty(), Partition::empty())),
            (TensorKey::new(0, p(&[2]), p(&[1])), TensorKey::new(1, p(&[1]), Partition::empty())),
        ];
        let rows = family_sweep(&eval, Family::Lorentz, &Rational::ratio(1, 4), &lorentz_cells(), &pairs).unwrap();
        for r in &rows {
            assert_eq!(r.mixed_residual, "0/1", "{r:?}");
            assert_eq!(r.ll_residual, "0/1", "{r:?}");
        }
        // the mixed piece is not trivially zero on these pairs
        let mut cache = PairCache::new();
        let a = PerturbedGenerator::new(Family::Lorentz, 0, Rational::ratio(1, 4)).expr().unwrap();
        let b = PerturbedGenerator::new(Family::Lorentz, 1, Rational::ratio(1, 4)).expr().unwrap();
        let t = PerturbedGenerator::bracket_target(Family::Lorentz, 0, 1, &Rational::ratio(1, 4)).unwrap();
        let phi1 = TensorState::basis(pairs[0].0.clone());
        let phi2 = TensorState::basis(pairs[0].1.clone());
        let w = eval.weak_commutator(&a, &b, &t, &phi1, &phi2, &mut cache).unwrap();
        assert_ne!(w.mixed, Rational::ratio(0, 1));
    }

    #[test]
    fn antisymmetry_of_weak_commutator() {
        let eval = eval_g(8, 3);
        let lambda = GaussRational::new(Rational::ratio(1, 2), Rational::ratio(0, 1));
        let k1 = TensorKey::new(1, p(&[1]), Partition::empty());
        let k2 = TensorKey::new(0, p(&[2]), p(&[1]));
        let phi1 = TensorState::basis(k1);
        let phi2 = TensorState::basis(k2);
        for (m, n) in [(1i64, -1i64), (2, -1), (1, 0)] {
            let a = PerturbedGenerator::new(Family::VirasoroC0, m, lambda.clone()).expr().unwrap();
            let b = PerturbedGenerator::new(Family::VirasoroC0, n, lambda.clone()).expr().unwrap();
            let z = GeneratorExpr::zero();
            let w12 = eval.weak_commutator(&a, &b, &z, &phi1, &phi2, &mut PairCache::new()).unwrap();
            let w21 = eval.weak_commutator(&b, &a, &z, &phi2, &phi1, &mut PairCache::new()).unwrap();
            assert_eq!(w12.total(), -w21.total().conj());
        }
    }

    #[test]
    fn psipsi_scales_quadratically() {
        let eval = eval_q(8, 4);
        let k1 = TensorKey::new(0, p(&[1]), Partition::empty());
        let k2 = TensorKey::new(0, Partition::empty(), p(&[1]));
        let phi1 = TensorState::basis(k1);
        let phi2 = TensorState::basis(k2);
        let at = |lambda: Rational| {
            let a = PerturbedGenerator::new(Family::Lorentz, 1, lambda.clone()).expr().unwrap();
            let b = PerturbedGenerator::new(Family::Lorentz, -1, lambda.clone()).expr().unwrap();
            let t = PerturbedGenerator::bracket_target(Family::Lorentz, 1, -1, &lambda).unwrap();
            eval.weak_commutator(&a, &b, &t, &phi1, &phi2, &mut PairCache::new()).unwrap()
        };
        let half = at(Rational::ratio(1, 2));
        let one = at(Rational::ratio(1, 1));
        assert_eq!(one.psipsi, half.psipsi.clone() * Rational::from_i64(4));
        assert_eq!(half.residual(), half.psipsi);
    }

    #[test]
    fn non_interior_vectors_are_rejected() {
        let eval = eval_q(6, 4);
        let phi = TensorState::basis(TensorKey::new(0, p(&[3]), Partition::empty()));
        let x = PerturbedGenerator::new(Family::Lorentz, 1, Rational::ratio(1, 1)).expr().unwrap();
        let err = eval.weak_commutator(&x, &x, &GeneratorExpr::zero(), &phi, &phi, &mut PairCache::new());
        assert!(matches!(err, Err(DesitterError::NotInterior { .. })));
        let edge = TensorState::vacuum(2);
        let err = eval.weak_commutator(&x, &x, &GeneratorExpr::zero(), &edge, &edge, &mut PairCache::new());
        assert!(matches!(err, Err(DesitterError::SectorNotInterior { .. })));
    }

    #[test]
    fn coefficient_identities() {
        let d = Rational::ratio(1, 8);
        assert_eq!(virasoro_closure(&d, 2, -1), Rational::from_i64(3));
        for m in -3..=3 {
            for n in -3..=3 {
                assert_eq!(virasoro_closure(&d, m, n), Rational::from_i64((m - n) * (m + n)));
                assert_eq!(d_half_mixed(&d, m, n), d.clone() * Rational::from_i64(2 * (m - n)));
            }
        }
        let half = Rational::ratio(1, 2);
        assert_eq!(d_half_mixed(&half, 1, -1), Rational::from_i64(2));
        assert_eq!(d_half_mixed(&d, 1, -1), Rational::ratio(1, 2));
        assert!(closure_table(&half, 3).iter().all(|r| r.closes));
        assert!(closure_table(&d, 3).iter().all(|r| r.closes == (r.m == r.n)));
    }

    #[test]
    fn d_half_mixed_piece_follows_prediction() {
        let space = FockSpace::new(Truncation::new(6, -4, 4).unwrap(), Rational::ratio(1, 2));
        let eval = Evaluator::new(space, CheckConfig { alpha_mult: 2, interior_buffer: 2, tolerance: 0.0, fault: None });
        let pairs = vec![
            (TensorKey::new(2, p(&[1]), Partition::empty()), TensorKey::new(0, Partition::empty(), Partition::empty())),
            (TensorKey::new(0, p(&[1]), p(&[1])), TensorKey::new(2, Partition::empty(), p(&[2]))),
        ];
        let report = explore_d_half(&eval, &Rational::ratio(1, 1), 1, &pairs).unwrap();
        assert_eq!(report.d, "1/2");
        assert!(report.mixed_matches_prediction);
        assert!(report.rows.iter().all(|r| r.mixed_residual == "0/1"));
    }

    #[test]
    fn d_eighth_mixed_piece_misses_the_closure_target() {
        let eval = eval_q(6, 2);
        let pairs = vec![(TensorKey::new(1, p(&[1]), Partition::empty()), TensorKey::new(0, Partition::empty(), Partition::empty()))];
        let report = explore_d_half(&eval, &Rational::ratio(1, 1), 1, &pairs).unwrap();
        assert!(report.mixed_matches_prediction);
        assert!(report.rows.iter().any(|r| r.verdict == Verdict::IdentityFailure));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_pairs(7, 5, 3, 1, 1);
        let b = sample_pairs(7, 5, 3, 1, 1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|(x, y)| x.j.abs() <= 1 && y.j.abs() <= 1 && (x.j - y.j) % 2 == 0));
        assert!(a.iter().all(|(x, y)| x.left.level() <= 3 && y.right.level() <= 3));
    }
}
