//! File formats: JSON-lines state dumps, mode-block CSV and convergence CSV.

use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, Partition, TensorKey, TensorState};
use crate::scalar::{parse_rational, render_f64, Scalar, ScalarError};
use crate::vertex::ModeBlockEntry;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateLine {
    j: i64,
    left: Vec<u32>,
    right: Vec<u32>,
    re: String,
    im: String,
}

/// One JSON object per nonzero component, in basis order.
pub fn write_state_jsonl<S: Scalar, W: Write>(state: &TensorState<S>, mut w: W) -> Result<(), IoError> {
    for (k, c) in state.iter() {
        let line = StateLine {
            j: k.j,
            left: k.left.parts().to_vec(),
            right: k.right.parts().to_vec(),
            re: c.render_re(),
            im: c.render_im(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_state_jsonl<S: Scalar, R: BufRead>(r: R) -> Result<TensorState<S>, IoError> {
    let mut out = TensorState::zero();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: StateLine = serde_json::from_str(&line)?;
        let key = TensorKey::new(l.j, Partition::new(l.left)?, Partition::new(l.right)?);
        out.add_term(key, S::from_parts(&l.re, &l.im)?);
    }
    Ok(out)
}

fn render_partition(p: &Partition) -> String {
    p.parts().iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

/// Columns `source_level, source_partition, target_partition, re, im`;
/// partitions are space-separated parts.
pub fn write_mode_block_csv<S: Scalar, W: Write>(entries: &[ModeBlockEntry<S>], w: W) -> Result<(), IoError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["source_level", "source_partition", "target_partition", "re", "im"])?;
    for e in entries {
        csv.write_record([
            e.source_level.to_string(),
            render_partition(&e.source),
            render_partition(&e.target),
            e.coefficient.render_re(),
            e.coefficient.render_im(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// One line of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<S> {
    pub band: u32,
    pub band_norm_sq: S,
    pub partial_sum: S,
}

/// Columns `band, band_norm_sq, partial_sum`; exact values as 30-digit decimals.
pub fn write_convergence_csv<S: Scalar, W: Write>(rows: &[ConvergenceRow<S>], w: W) -> Result<(), IoError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["band", "band_norm_sq", "partial_sum"])?;
    for r in rows {
        csv.write_record([r.band.to_string(), decimal_string(&r.band_norm_sq, 30), decimal_string(&r.partial_sum, 30)])?;
    }
    csv.flush()?;
    Ok(())
}

/// Real part as a decimal: `sig` significant digits for exact values, the
/// shortest round-trip form for floats.
pub fn decimal_string<S: Scalar>(x: &S, sig: usize) -> String {
    if S::is_exact() {
        match parse_rational(&x.render_re()) {
            Ok(q) => rational_to_decimal(&q, sig),
            Err(_) => x.render_re(),
        }
    } else {
        render_f64(x.re_f64())
    }
}

/// Rounds half away from zero to `sig` significant digits.
pub fn rational_to_decimal(q: &BigRational, sig: usize) -> String {
    let sig = sig.max(1);
    if q.is_zero() {
        return "0".to_string();
    }
    let neg = q.is_negative();
    let num = q.numer().abs();
    let den = q.denom().clone();
    // decimal exponent e with 10^e ≤ |q| < 10^(e+1)
    let mut e = num.to_string().len() as i64 - den.to_string().len() as i64;
    let ten = BigInt::from(10);
    let at_least = |e: i64| -> bool {
        if e >= 0 {
            num >= &den * ten.pow(e as u32)
        } else {
            &num * ten.pow((-e) as u32) >= den
        }
    };
    while !at_least(e) {
        e -= 1;
    }
    while at_least(e + 1) {
        e += 1;
    }
    let shift = sig as i64 - 1 - e;
    let (n2, d2) = if shift >= 0 {
        (&num * ten.pow(shift as u32), den.clone())
    } else {
        (num.clone(), &den * ten.pow((-shift) as u32))
    };
    let (mut digits, rem) = n2.div_rem(&d2);
    if rem * 2 >= d2 {
        digits += 1;
    }
    if digits.to_string().len() > sig {
        digits /= 10;
        e += 1;
    }
    let ds = digits.to_string();
    let body = if (-6..sig as i64).contains(&e) {
        if e >= 0 {
            let (int, frac) = ds.split_at(e as usize + 1);
            if frac.is_empty() {
                int.to_string()
            } else {
                format!("{int}.{frac}")
            }
        } else {
            format!("0.{}{}", "0".repeat((-e - 1) as usize), ds)
        }
    } else {
        format!("{}.{}e{}", &ds[..1], &ds[1..], e)
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockSpace, Truncation};
    use crate::vertex::VertexField;
    use crate::{Complex64, GaussRational, Rational};

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.iter().copied()).unwrap()
    }

    #[test]
    fn state_round_trip_exact() {
        let mut v: TensorState<GaussRational> = TensorState::zero();
        v.add_term(TensorKey::new(1, p(&[2, 1]), Partition::empty()), GaussRational::new(Rational::ratio(1, 3), Rational::ratio(-2, 5)));
        v.add_term(TensorKey::new(-1, Partition::empty(), p(&[1])), GaussRational::new(Rational::ratio(7, 1), Rational::ratio(0, 1)));
        let mut buf = Vec::new();
        write_state_jsonl(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"re\":\"7/1\""));
        let back: TensorState<GaussRational> = read_state_jsonl(&buf[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn state_round_trip_float() {
        let mut v: TensorState<Complex64> = TensorState::zero();
        v.add_term(TensorKey::new(0, p(&[1]), p(&[1])), Complex64::new(0.1, -1e-300));
        let mut buf = Vec::new();
        write_state_jsonl(&v, &mut buf).unwrap();
        let back: TensorState<Complex64> = read_state_jsonl(&buf[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn mode_block_csv_layout() {
        let f = VertexField::new(FockSpace::new(Truncation::new(2, -2, 2).unwrap(), Rational::ratio(1, 2)));
        let mut buf = Vec::new();
        write_mode_block_csv(&f.mode_block(1, 1), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("source_level,source_partition,target_partition,re,im"));
        assert_eq!(lines.next(), Some("0,,1,1/2,0/1"));
    }

    #[test]
    fn decimals_to_thirty_digits() {
        let q = |n: i64, d: i64| Rational::new(n.into(), d.into());
        assert_eq!(rational_to_decimal(&q(1, 3), 30), "0.333333333333333333333333333333");
        assert_eq!(rational_to_decimal(&q(2, 3), 5), "0.66667");
        assert_eq!(rational_to_decimal(&q(-5, 32), 30), "-0.156250000000000000000000000000");
        assert_eq!(rational_to_decimal(&q(1, 1), 3), "1.00");
        assert_eq!(rational_to_decimal(&q(999_999, 1), 3), "1.00e6");
        assert_eq!(rational_to_decimal(&q(1, 10_000_000), 2), "1.0e-7");
        assert_eq!(rational_to_decimal(&q(0, 1), 30), "0");
        assert_eq!(rational_to_decimal(&q(1234, 10), 4), "123.4");
        assert_eq!(rational_to_decimal(&q(995, 1000), 2), "1.0");
    }

    #[test]
    fn convergence_csv_uses_decimals() {
        let rows = vec![ConvergenceRow { band: 1, band_norm_sq: Rational::ratio(1, 16), partial_sum: Rational::ratio(17, 16) }];
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("1,0.0625000000000000000000000000000,1.06250000000000000000000000000"));
    }
}
