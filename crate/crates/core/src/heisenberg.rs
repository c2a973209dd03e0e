//! Current modes `Ĵ_m` acting on the charged sectors.

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::fock::{FockSpace, Partition, SectorState, TensorKey, TensorState};
use crate::scalar::Scalar;

/// Chiral factor of the diagonal tensor space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// `J_m J_{-λ}Ω_j` for `m != 0`, as a single monomial with an integer
/// coefficient. Creation (`m < 0`) inserts a part; annihilation contracts
/// against the equal parts with coefficient `m · multiplicity`.
pub fn current_on_monomial(m: i64, lambda: &Partition) -> Option<(BigInt, Partition)> {
    match m {
        0 => None,
        m if m < 0 => Some((BigInt::one(), lambda.with_part((-m) as u32))),
        m => {
            let mult = lambda.multiplicity(m as u32);
            if mult == 0 {
                return None;
            }
            let rest = lambda.without_part(m as u32)?;
            Some((BigInt::from(m) * BigInt::from(mult), rest))
        }
    }
}

/// `J_{μ_1} ... J_{μ_k} J_{-λ}Ω` for a product of annihilators: nonzero iff
/// `μ ⊆ λ` as multisets, with coefficient `Π_p p^{k_p} m_p!/(m_p-k_p)!`.
pub fn annihilate_monomial(mu: &Partition, lambda: &Partition) -> Option<(BigInt, Partition)> {
    let mut coef = BigInt::one();
    let mut rest = lambda.clone();
    for (part, k) in mu.multiplicities() {
        let m = lambda.multiplicity(part);
        if k > m {
            return None;
        }
        for i in 0..k {
            coef *= BigInt::from(part) * BigInt::from(m - i);
            rest = rest.without_part(part)?;
        }
    }
    Some((coef, rest))
}

/// `Ĵ_m` on a single basis vector of sector `j`.
pub fn current_on_basis<S: Scalar>(
    space: &FockSpace<S>,
    m: i64,
    j: i64,
    lambda: &Partition,
) -> Option<(S, Partition)> {
    if m == 0 {
        let beta = space.charge(j);
        if beta.is_zero() {
            return None;
        }
        return Some((beta, lambda.clone()));
    }
    current_on_monomial(m, lambda).map(|(c, p)| (S::from_bigint(&c), p))
}

/// `Ĵ_m v`. Components landing above the level cutoff are dropped and
/// flagged on the result.
pub fn apply_current<S: Scalar>(space: &FockSpace<S>, m: i64, v: &SectorState<S>) -> SectorState<S> {
    let mut out = SectorState::zero();
    out.set_overflow(v.overflow());
    for ((j, lambda), coef) in v.iter() {
        if let Some((c, mu)) = current_on_basis(space, m, *j, lambda) {
            if mu.level() > space.cutoff() {
                out.mark_overflow();
                continue;
            }
            out.add_term((*j, mu), coef.clone() * &c);
        }
    }
    out
}

/// `Ĵ_m ⊗ 1` or `1 ⊗ Ĵ_m`.
pub fn apply_current_tensor<S: Scalar>(
    space: &FockSpace<S>,
    side: Side,
    m: i64,
    v: &TensorState<S>,
) -> TensorState<S> {
    let mut out = TensorState::zero();
    out.set_overflow(v.overflow());
    for (key, coef) in v.iter() {
        let target = match side {
            Side::Left => &key.left,
            Side::Right => &key.right,
        };
        if let Some((c, mu)) = current_on_basis(space, m, key.j, target) {
            if mu.level() > space.cutoff() {
                out.mark_overflow();
                continue;
            }
            let new_key = match side {
                Side::Left => TensorKey::new(key.j, mu, key.right.clone()),
                Side::Right => TensorKey::new(key.j, key.left.clone(), mu),
            };
            out.add_term(new_key, coef.clone() * &c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{basis_up_to, Truncation};
    use crate::Rational;

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.iter().copied()).unwrap()
    }

    fn space(l: u32) -> FockSpace<Rational> {
        FockSpace::new(Truncation::new(l, -2, 2).unwrap(), Rational::ratio(1, 2))
    }

    #[test]
    fn annihilation_after_creation_on_vacuum() {
        let s = space(6);
        let v = SectorState::basis((0, p(&[1])));
        let w = apply_current(&s, 1, &v);
        assert_eq!(w, SectorState::vacuum(0));
    }

    #[test]
    fn zero_mode_is_the_charge() {
        let s = space(6);
        let w = apply_current(&s, 0, &SectorState::vacuum(1));
        assert_eq!(w, SectorState::vacuum(1).scale(&Rational::ratio(1, 2)));
        assert!(apply_current(&s, 0, &SectorState::vacuum(0)).is_empty());
    }

    #[test]
    fn creation_on_vacuum() {
        let s = space(6);
        let w = apply_current(&s, -2, &SectorState::vacuum(0));
        assert_eq!(w, SectorState::basis((0, p(&[2]))));
    }

    #[test]
    fn annihilation_counts_multiplicity() {
        let s = space(6);
        let w = apply_current(&s, 2, &SectorState::basis((0, p(&[2, 2, 1]))));
        assert_eq!(w, SectorState::basis((0, p(&[2, 1]))).scale(&Rational::from_i64(4)));
    }

    #[test]
    fn tensor_examples() {
        let s = space(6);
        let v = TensorState::product(0, p(&[1]), Partition::empty());
        assert_eq!(apply_current_tensor(&s, Side::Left, 1, &v), TensorState::vacuum(0));
        let w = apply_current_tensor(&s, Side::Right, 0, &TensorState::vacuum(1));
        assert_eq!(w, TensorState::vacuum(1).scale(&Rational::ratio(1, 2)));
        let s0 = space(0);
        let o = apply_current_tensor(&s0, Side::Left, -1, &TensorState::vacuum(0));
        assert!(o.is_empty());
        assert!(o.overflow());
    }

    #[test]
    fn annihilate_monomial_matches_repeated_single_modes() {
        let s = space(10);
        for lambda in basis_up_to(7) {
            for mu in basis_up_to(4) {
                // Apply annihilators one at a time.
                let mut v = SectorState::basis((0, lambda.clone()));
                for &part in mu.parts() {
                    v = apply_current(&s, part as i64, &v);
                }
                let expected = match annihilate_monomial(&mu, &lambda) {
                    Some((c, rest)) => SectorState::basis((0, rest)).scale(&Rational::from_bigint(&c)),
                    None => SectorState::zero(),
                };
                assert_eq!(v, expected, "mu={mu:?} lambda={lambda:?}");
            }
        }
    }

    #[test]
    fn commutator_identity_on_interior() {
        let l = 10;
        let s = space(l);
        for j in -2..=2 {
            for lambda in basis_up_to(l - 6) {
                let v = SectorState::basis((j, lambda.clone()));
                for m in -6i64..=6 {
                    for n in -6i64..=6 {
                        let raised = lambda.level() as i64 + (-m).max(0) + (-n).max(0);
                        if raised > l as i64 {
                            continue;
                        }
                        let mn = apply_current(&s, m, &apply_current(&s, n, &v));
                        let nm = apply_current(&s, n, &apply_current(&s, m, &v));
                        let lhs = mn.minus(&nm);
                        let expected = if m == -n { v.scale(&Rational::from_i64(m)) } else { SectorState::zero() };
                        assert!(!lhs.overflow());
                        assert_eq!(lhs, expected, "m={m} n={n} j={j} lambda={lambda:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn adjointness_of_modes() {
        let s = space(8);
        let basis = basis_up_to(6);
        for m in 1i64..=4 {
            for a in &basis {
                for b in &basis {
                    let v = SectorState::basis((1, a.clone()));
                    let w = SectorState::basis((1, b.clone()));
                    let lhs = apply_current(&s, -m, &v).inner_product(&w);
                    let rhs = v.inner_product(&apply_current(&s, m, &w));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn left_and_right_actions_commute() {
        let s = space(8);
        let basis = basis_up_to(3);
        for a in &basis {
            for b in &basis {
                let v = TensorState::product(1, a.clone(), b.clone());
                for m in -3i64..=3 {
                    for n in -3i64..=3 {
                        let lr = apply_current_tensor(&s, Side::Left, m, &apply_current_tensor(&s, Side::Right, n, &v));
                        let rl = apply_current_tensor(&s, Side::Right, n, &apply_current_tensor(&s, Side::Left, m, &v));
                        assert_eq!(lr, rl);
                    }
                }
            }
        }
    }
}
