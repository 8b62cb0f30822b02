use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;

use super::{BipartiteQuiver, DimVector, Weight};
use crate::error::{Error, Result};

/// Positive rational exponents `p_1..p_m`, one per sink, kept in lowest
/// terms, together with their least common denominator `ω`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentTuple {
    values: Vec<Ratio<i64>>,
    omega: i64,
}

impl ExponentTuple {
    pub fn new(pairs: &[(i64, i64)]) -> Result<Self> {
        let mut values = Vec::with_capacity(pairs.len());
        for &(num, den) in pairs {
            if den == 0 {
                return Err(Error::Exponents(format!("zero denominator in {num}/{den}")));
            }
            let r = Ratio::new(num, den);
            if r <= Ratio::from_integer(0) {
                return Err(Error::Exponents(format!("exponent {r} is not positive")));
            }
            values.push(r);
        }
        if values.is_empty() {
            return Err(Error::Exponents("empty exponent tuple".into()));
        }
        let omega = values.iter().fold(1i64, |acc, r| acc.lcm(r.denom()));
        Ok(Self { values, omega })
    }

    /// Parse strings of the form `"num/den"` or `"num"`.
    pub fn parse(items: &[&str]) -> Result<Self> {
        let pairs = items
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&pairs)
    }

    pub fn values(&self) -> &[Ratio<i64>] {
        &self.values
    }

    pub fn omega(&self) -> i64 {
        self.omega
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .collect()
    }

    /// Exponents rendered as `"num/den"`.
    pub fn to_strings(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|r| format!("{}/{}", r.numer(), r.denom()))
            .collect()
    }
}

impl fmt::Display for ExponentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(", "))
    }
}

pub(crate) fn parse_rational(s: &str) -> Result<(i64, i64)> {
    let s = s.trim();
    let bad = || Error::Exponents(format!("cannot parse rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => Ok((
            n.trim().parse().map_err(|_| bad())?,
            d.trim().parse().map_err(|_| bad())?,
        )),
        None => Ok((s.parse().map_err(|_| bad())?, 1)),
    }
}

/// `σ_p(v_i) = ω`, `σ_p(w_j) = −ω·p_j`, after checking
/// `Σ d(v_i) = Σ p_j d(w_j)` exactly.
pub fn weight_from_exponents(p: &ExponentTuple, quiver: &BipartiteQuiver, dims: &DimVector) -> Result<Weight> {
    if p.len() != quiver.sinks.len() {
        return Err(Error::Exponents(format!(
            "{} exponents given for {} sinks",
            p.len(),
            quiver.sinks.len()
        )));
    }
    let lhs: i64 = quiver.sources.iter().map(|v| dims.get(v) as i64).sum();
    let rhs: Ratio<i64> = quiver
        .sinks
        .iter()
        .zip(p.values())
        .map(|(w, r)| r * dims.get(w) as i64)
        .sum();
    if Ratio::from_integer(lhs) != rhs {
        return Err(Error::Orthogonality {
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        });
    }
    let omega = p.omega();
    let mut weight = Weight::default();
    for v in &quiver.sources {
        weight.0.insert(v.clone(), omega);
    }
    for (w, r) in quiver.sinks.iter().zip(p.values()) {
        let scaled = r * omega;
        debug_assert!(scaled.is_integer());
        weight.0.insert(w.clone(), -scaled.to_integer());
    }
    Ok(weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subspace_quiver(m: usize) -> BipartiteQuiver {
        let sinks: Vec<String> = (1..=m).map(|j| format!("w{j}")).collect();
        BipartiteQuiver {
            sources: vec!["v".into()],
            sinks: sinks.clone(),
            arrows: sinks
                .iter()
                .enumerate()
                .map(|(k, w)| super::super::Arrow::new(&format!("a{}", k + 1), "v", w))
                .collect(),
        }
    }

    fn dims(q: &BipartiteQuiver, dv: usize) -> DimVector {
        let mut d = DimVector::default();
        d.0.insert("v".into(), dv);
        for w in &q.sinks {
            d.0.insert(w.clone(), 1);
        }
        d
    }

    #[test]
    fn two_thirds_triple() {
        let q = subspace_quiver(3);
        let p = ExponentTuple::parse(&["2/3", "2/3", "4/6"]).unwrap();
        assert_eq!(p.omega(), 3);
        let w = weight_from_exponents(&p, &q, &dims(&q, 2)).unwrap();
        assert_eq!(w, Weight::from_pairs(&[("v", 3), ("w1", -2), ("w2", -2), ("w3", -2)]));
        assert_eq!(w.dot(&dims(&q, 2)), 0);
    }

    #[test]
    fn unit_pair() {
        let q = subspace_quiver(2);
        let p = ExponentTuple::new(&[(1, 1), (1, 1)]).unwrap();
        let w = weight_from_exponents(&p, &q, &dims(&q, 2)).unwrap();
        assert_eq!(w, Weight::from_pairs(&[("v", 1), ("w1", -1), ("w2", -1)]));
    }

    #[test]
    fn orthogonality_failure() {
        let q = subspace_quiver(1);
        let p = ExponentTuple::parse(&["1/2"]).unwrap();
        match weight_from_exponents(&p, &q, &dims(&q, 1)) {
            Err(Error::Orthogonality { lhs, rhs }) => {
                assert_eq!(lhs, "1");
                assert_eq!(rhs, "1/2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_and_garbage() {
        assert!(ExponentTuple::new(&[(0, 1)]).is_err());
        assert!(ExponentTuple::new(&[(1, 0)]).is_err());
        assert!(ExponentTuple::parse(&["x/2"]).is_err());
        assert_eq!(ExponentTuple::parse(&["3"]).unwrap().omega(), 1);
    }
}
