//! Exact identity suites for the current modes, the Sugawara modes and the
//! charged fields, run over every interior basis vector of a truncated space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{basis_up_to, partitions_of, FockSpace, SectorKey, SectorState};
use crate::heisenberg::apply_current;
use crate::scalar::Scalar;
use crate::vertex::VertexField;
use crate::virasoro::Sugawara;

/// The first place where an identity fails: the two mode indices, the basis
/// vector it was applied to, and the basis component of the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub suite: String,
    pub m: i64,
    pub n: i64,
    pub ket: String,
    pub bra: String,
    pub residual_re: String,
    pub residual_im: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: String,
    /// `(m, n, vector)` triples evaluated.
    pub checked: usize,
    /// Triples left out because an intermediate state would leave the truncation.
    pub skipped: usize,
    pub violations: usize,
    pub first_violation: Option<Violation>,
    pub warnings: Vec<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn label(key: &SectorKey) -> String {
    format!("j={} {}", key.0, key.1)
}

/// Basis vectors of every sector in the window up to the cutoff.
fn sector_basis<S: Scalar>(space: &FockSpace<S>, sectors: &[i64]) -> Vec<SectorKey> {
    let all = basis_up_to(space.cutoff());
    sectors.iter().flat_map(|&j| all.iter().map(move |p| (j, p.clone()))).collect()
}

/// Highest level reached by a product `A_m A_n` (or `A_n A_m`) of
/// level-lowering-by-index modes applied at `level`.
fn peak_level(level: u32, m: i64, n: i64) -> i64 {
    let l = level as i64;
    (l - n).max(l - m).max(l - m - n).max(l)
}

fn run_suite<S, I, R>(
    name: &str,
    vectors: &[SectorKey],
    cells: &[(i64, i64)],
    tol: f64,
    interior: I,
    residual: R,
) -> SuiteOutcome
where
    S: Scalar,
    I: Fn(&SectorKey, i64, i64) -> bool + Sync,
    R: Fn(&SectorState<S>, &SectorKey, i64, i64) -> SectorState<S> + Sync,
{
    let per_vector: Vec<(usize, usize, usize, Option<Violation>)> = vectors
        .par_iter()
        .map(|key| {
            let v = SectorState::basis(key.clone());
            let (mut checked, mut skipped, mut bad) = (0, 0, 0);
            let mut first = None;
            for &(m, n) in cells {
                if !interior(key, m, n) {
                    skipped += 1;
                    continue;
                }
                checked += 1;
                let r = residual(&v, key, m, n);
                let worst = r.iter().find(|(_, c)| !c.is_negligible(tol));
                if worst.is_none() && !r.overflow() {
                    continue;
                }
                bad += 1;
                if first.is_none() {
                    let (bra, re, im) = match worst {
                        Some((k, c)) => (label(k), c.render_re(), c.render_im()),
                        None => ("overflow".to_string(), String::new(), String::new()),
                    };
                    first = Some(Violation {
                        suite: name.to_string(),
                        m,
                        n,
                        ket: label(key),
                        bra,
                        residual_re: re,
                        residual_im: im,
                    });
                }
            }
            (checked, skipped, bad, first)
        })
        .collect();
    let mut out = SuiteOutcome {
        suite: name.to_string(),
        checked: 0,
        skipped: 0,
        violations: 0,
        first_violation: None,
        warnings: Vec::new(),
    };
    for (c, s, b, f) in per_vector {
        out.checked += c;
        out.skipped += s;
        out.violations += b;
        if out.first_violation.is_none() {
            out.first_violation = f;
        }
    }
    if out.checked == 0 {
        out.warnings.push(format!("{name}: vacuous interior, no vector admits the identity at this cutoff"));
    } else if vectors.iter().all(|k| k.1.is_empty()) {
        out.warnings.push(format!("{name}: vacuous interior, only vacuum vectors fit below the cutoff"));
    }
    out
}

fn square_cells(range: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for m in -range..=range {
        for n in -range..=range {
            v.push((m, n));
        }
    }
    v
}

/// `[J_m, J_n] = m δ_{m+n,0}` for `|m|, |n| ≤ range`.
pub fn current_suite<S: Scalar>(space: &FockSpace<S>, range: i64, tol: f64) -> SuiteOutcome {
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let cutoff = space.cutoff() as i64;
    run_suite(
        "current_relations",
        &sector_basis(space, &sectors),
        &square_cells(range),
        tol,
        |key, m, n| peak_level(key.1.level(), m, n) <= cutoff,
        |v, _, m, n| {
            let mut r = apply_current(space, m, &apply_current(space, n, v))
                .minus(&apply_current(space, n, &apply_current(space, m, v)));
            if m + n == 0 {
                r.add_scaled(v, &S::from_i64(-m));
            }
            r
        },
    )
}

/// `[L_m, L_n] = (m-n)L_{m+n} + (m³-m)/12 δ_{m+n,0}` for `|m|, |n| ≤ range`.
pub fn virasoro_suite<S: Scalar>(sug: &Sugawara<S>, range: i64, tol: f64) -> SuiteOutcome {
    let space = sug.space();
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let cutoff = space.cutoff() as i64;
    run_suite(
        "virasoro_c1",
        &sector_basis(space, &sectors),
        &square_cells(range),
        tol,
        |key, m, n| peak_level(key.1.level(), m, n) <= cutoff,
        |v, _, m, n| {
            let mut r = sug.apply(m, &sug.apply(n, v)).minus(&sug.apply(n, &sug.apply(m, v)));
            r.add_scaled(&sug.apply(m + n, v), &S::from_i64(n - m));
            if m + n == 0 {
                r.add_scaled(v, &(S::from_i64(-(m * m * m - m)) / S::from_i64(12)));
            }
            r
        },
    )
}

/// `[L_m, J_n] = -n J_{m+n}` for `|m|, |n| ≤ range`.
pub fn sugawara_current_suite<S: Scalar>(sug: &Sugawara<S>, range: i64, tol: f64) -> SuiteOutcome {
    let space = sug.space();
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let cutoff = space.cutoff() as i64;
    run_suite(
        "sugawara_current_covariance",
        &sector_basis(space, &sectors),
        &square_cells(range),
        tol,
        |key, m, n| peak_level(key.1.level(), m, n) <= cutoff,
        |v, _, m, n| {
            let mut r = sug.apply(m, &apply_current(space, n, v)).minus(&apply_current(space, n, &sug.apply(m, v)));
            r.add_scaled(&apply_current(space, m + n, v), &S::from_i64(n));
            r
        },
    )
}

/// Interior test for `[A_m, Y_δ]` on a vector of sector `j`: every
/// intermediate level stays below the cutoff and the target sector is inside
/// the window.
fn field_interior<S: Scalar>(field: &VertexField<S>, mult: i64, key: &SectorKey, m: i64, delta: i64) -> bool {
    let l = key.1.level() as i64;
    let cutoff = field.space().cutoff() as i64;
    field.space().trunc.in_window(key.0 + mult) && (l + delta).max(l - m).max(l + delta - m).max(l) <= cutoff
}

/// `[L_m, Y_δ] = ((d-1)m - s) Y_{δ-m}` with `s` the mode index of `Y_δ` on
/// the source sector. Cells are `(m, δ)`.
pub fn primary_suite<S: Scalar>(
    field: &VertexField<S>,
    sug: &Sugawara<S>,
    mult: i64,
    m_range: i64,
    delta_range: i64,
    tol: f64,
) -> SuiteOutcome {
    let space = field.space();
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let d = field.dimension(mult);
    let mut cells = Vec::new();
    for m in -m_range..=m_range {
        for delta in -delta_range..=delta_range {
            cells.push((m, delta));
        }
    }
    run_suite(
        "primary_covariance",
        &sector_basis(space, &sectors),
        &cells,
        tol,
        |key, m, delta| field_interior(field, mult, key, m, delta),
        |v, key, m, delta| {
            let mut r = sug
                .apply(m, &field.apply_mode(mult, delta, v))
                .minus(&field.apply_mode(mult, delta, &sug.apply(m, v)));
            let s = field.mode_index(mult, delta, key.0);
            let coef = (d.clone() - S::one()) * &S::from_i64(m) - s;
            r.add_scaled(&field.apply_mode(mult, delta - m, v), &(-coef));
            r
        },
    )
}

/// `[J_m, Y_δ] = α Y_{δ-m}`. Cells are `(m, δ)`.
pub fn current_field_suite<S: Scalar>(
    field: &VertexField<S>,
    mult: i64,
    m_range: i64,
    delta_range: i64,
    tol: f64,
) -> SuiteOutcome {
    let space = field.space();
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let alpha = field.alpha(mult);
    let mut cells = Vec::new();
    for m in -m_range..=m_range {
        for delta in -delta_range..=delta_range {
            cells.push((m, delta));
        }
    }
    run_suite(
        "current_field_covariance",
        &sector_basis(space, &sectors),
        &cells,
        tol,
        |key, m, delta| field_interior(field, mult, key, m, delta),
        |v, _, m, delta| {
            let mut r = apply_current(space, m, &field.apply_mode(mult, delta, v))
                .minus(&field.apply_mode(mult, delta, &apply_current(space, m, v)));
            r.add_scaled(&field.apply_mode(mult, delta - m, v), &(-alpha.clone()));
            r
        },
    )
}

/// Series-expansion columns against the commutator recursion, on sectors
/// `sectors` for both `±mult`. Cells are `(±mult, δ)` with every `δ` that
/// keeps the image below the cutoff.
pub fn oracle_suite<S: Scalar>(field: &VertexField<S>, mult: i64, sectors: &[i64], tol: f64) -> SuiteOutcome {
    let space = field.space();
    let cutoff = space.cutoff() as i64;
    let present: Vec<i64> = sectors.iter().copied().filter(|j| space.trunc.in_window(*j)).collect();
    let mut cells = Vec::new();
    for k in [mult, -mult] {
        for delta in -cutoff..=cutoff {
            cells.push((k, delta));
        }
    }
    run_suite(
        "oracle_equivalence",
        &sector_basis(space, &present),
        &cells,
        tol,
        |key, k, delta| {
            let target = key.1.level() as i64 + delta;
            (0..=cutoff).contains(&target) && space.trunc.in_window(key.0 + k)
        },
        |v, _, k, delta| field.apply_mode(k, delta, v).minus(&field.apply_mode_recursive(k, delta, v)),
    )
}

/// `⟨w, Y_{α,δ} v⟩ = ⟨Y_{-α,-δ} w, v⟩` for every basis vector `w` of the
/// target level. The residual is reported componentwise in `w`.
pub fn adjoint_suite<S: Scalar>(field: &VertexField<S>, mult: i64, delta_range: i64, tol: f64) -> SuiteOutcome {
    let space = field.space();
    let sectors: Vec<i64> = space.trunc.sectors().collect();
    let cutoff = space.cutoff() as i64;
    let cells: Vec<(i64, i64)> = (-delta_range..=delta_range).map(|delta| (mult, delta)).collect();
    run_suite(
        "field_adjoint",
        &sector_basis(space, &sectors),
        &cells,
        tol,
        |key, k, delta| {
            let target = key.1.level() as i64 + delta;
            target <= cutoff && space.trunc.in_window(key.0 + k)
        },
        |v, key, k, delta| {
            let yv = field.apply_mode(k, delta, v);
            let mut r = SectorState::zero();
            let target = key.1.level() as i64 + delta;
            if target < 0 {
                return r;
            }
            for mu in partitions_of(target as u32) {
                let w = SectorState::basis((key.0 + k, mu.clone()));
                let lhs = w.inner_product(&yv);
                let rhs = field.apply_mode(-k, -delta, &w).inner_product(v);
                r.add_term((key.0 + k, mu), lhs - rhs);
            }
            r
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Truncation;
    use crate::virasoro::SugawaraFault;
    use crate::{Complex64, Rational};

    fn space(l: u32) -> FockSpace<Rational> {
        FockSpace::new(Truncation::new(l, -2, 2).unwrap(), Rational::ratio(1, 2))
    }

    #[test]
    fn current_relations_hold_and_skip_the_boundary() {
        let out = current_suite(&space(6), 6, 0.0);
        assert!(out.passed(), "{:?}", out.first_violation);
        assert!(out.checked > 0 && out.skipped > 0);
    }

    #[test]
    fn virasoro_and_sugawara_suites_pass() {
        let sug = Sugawara::new(space(6));
        assert!(virasoro_suite(&sug, 3, 0.0).passed());
        assert!(sugawara_current_suite(&sug, 3, 0.0).passed());
    }

    #[test]
    fn fault_is_pinpointed_in_a_charged_sector() {
        let sug = Sugawara::with_fault(space(6), SugawaraFault::ChargedCrossTerm);
        let out = virasoro_suite(&sug, 3, 0.0);
        assert!(!out.passed());
        let v = out.first_violation.unwrap();
        assert!(!v.ket.starts_with("j=0 "), "{v:?}");
    }

    #[test]
    fn covariance_suites_pass_for_both_lattice_points() {
        for mult in [1i64, 2] {
            let f = VertexField::new(space(6));
            let sug = Sugawara::new(space(6));
            assert!(primary_suite(&f, &sug, mult, 3, 3, 0.0).passed(), "mult={mult}");
            assert!(current_field_suite(&f, mult, 3, 3, 0.0).passed(), "mult={mult}");
            assert!(adjoint_suite(&f, mult, 3, 0.0).passed(), "mult={mult}");
        }
    }

    #[test]
    fn oracle_suite_passes() {
        let f = VertexField::new(space(6));
        assert!(oracle_suite(&f, 1, &[0, 1], 0.0).passed());
    }

    #[test]
    fn zero_cutoff_is_vacuous_but_not_failing() {
        let out = current_suite(&space(0), 2, 0.0);
        assert!(out.passed());
        assert!(out.warnings.iter().any(|w| w.contains("vacuous interior")));
        let f = VertexField::new(space(0));
        let sug = Sugawara::new(space(0));
        let p = primary_suite(&f, &sug, 1, 0, 0, 0.0);
        assert!(p.passed());
    }

    #[test]
    fn float_suites_pass_within_tolerance() {
        let s = FockSpace::new(Truncation::new(5, -2, 2).unwrap(), Complex64::new(0.5, 0.0));
        let sug = Sugawara::new(s.clone());
        assert!(virasoro_suite(&sug, 3, 1e-10).passed());
        let f = VertexField::new(s);
        assert!(primary_suite(&f, &sug, 1, 2, 2, 1e-10).passed());
    }
}
