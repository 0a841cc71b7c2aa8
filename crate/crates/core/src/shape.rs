//! Combinatorial invariants of Segre products `P^{a_1} x ... x P^{a_q}`.
//!
//! Everything here is exact. Threshold decisions (`k < k_c`, `k <= bound`)
//! go through [`RationalBound`], never through floating point.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension vector of a Segre product, kept in ascending order.
///
/// The order the caller supplied is retained in `original` for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegreShape {
    dims: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original: Option<Vec<u32>>,
}

impl SegreShape {
    /// Sorts `dims` ascending. Fails on an empty sequence, a nonpositive
    /// entry, or a shape whose ambient size does not fit in 64 bits.
    pub fn canonicalize(dims: &[i64]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("empty dimension sequence".into()));
        }
        let mut parsed = Vec::with_capacity(dims.len());
        for &d in dims {
            if d < 1 {
                return Err(Error::InvalidInput(format!(
                    "factor dimension {d} must be at least 1"
                )));
            }
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidInput(format!("factor dimension {d} too large")))?;
            parsed.push(d);
        }
        Self::from_dims(parsed)
    }

    pub fn from_dims(dims: Vec<u32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("empty dimension sequence".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidInput(
                "factor dimensions must be at least 1".into(),
            ));
        }
        let mut size: u64 = 1;
        for &d in &dims {
            size = size
                .checked_mul(u64::from(d) + 1)
                .ok_or_else(|| Error::InvalidInput("ambient size exceeds 2^64".into()))?;
        }
        let mut sorted = dims.clone();
        sorted.sort_unstable();
        let original = (sorted != dims).then_some(dims);
        Ok(Self {
            dims: sorted,
            original,
        })
    }

    /// `count` copies of `P^dim`.
    pub fn power(dim: u32, count: usize) -> Result<Self> {
        Self::from_dims(vec![dim; count])
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    /// Dimensions in the order the caller supplied them.
    pub fn original_dims(&self) -> &[u32] {
        self.original.as_deref().unwrap_or(&self.dims)
    }

    /// Number of factors `q`.
    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    /// `prod (a_i + 1)`, the number of tensor entries.
    pub fn size(&self) -> u64 {
        self.dims.iter().map(|&d| u64::from(d) + 1).product()
    }

    /// Projective dimension `N` of the ambient space.
    pub fn ambient_dim(&self) -> u64 {
        self.size() - 1
    }

    /// Dimension `n = sum a_i` of the Segre variety.
    pub fn variety_dim(&self) -> u64 {
        self.dims.iter().map(|&d| u64::from(d)).sum()
    }

    pub fn largest(&self) -> u32 {
        *self.dims.last().expect("shape is nonempty")
    }

    /// The shape with one more factor `P^dim`, re-sorted.
    pub fn with_factor(&self, dim: u32) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.push(dim);
        Self::from_dims(dims)
    }

    /// The shape made of all factors but the last (largest) one.
    pub fn head(&self) -> Option<Self> {
        (self.dims.len() > 1).then(|| Self {
            dims: self.dims[..self.dims.len() - 1].to_vec(),
            original: None,
        })
    }

    /// Canonical form without the caller-order metadata.
    pub fn canonical(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            original: None,
        }
    }

    /// `prod (a_i+1) / (1 + sum a_i)`.
    pub fn critical_rank(&self) -> RationalBound {
        RationalBound::new(
            BigInt::from(self.size()),
            BigInt::from(self.variety_dim() + 1),
        )
    }

    /// `min(k (n+1), N+1) - 1`.
    pub fn expected_secant_dim(&self, k: u64) -> u64 {
        let per_point = u128::from(self.variety_dim() + 1);
        let filled = u128::from(k) * per_point;
        let size = u128::from(self.size());
        (filled.min(size) - 1) as u64
    }

    /// Multinomial degree `(sum a_i)! / prod a_i!` of the Segre variety.
    pub fn segre_degree(&self) -> BigUint {
        let mut degree = BigUint::one();
        let mut running: u64 = 0;
        // Built as a product of binomials C(a_1 + ... + a_j, a_j).
        for &a in &self.dims {
            running += u64::from(a);
            degree *= binomial(running, u64::from(a));
        }
        degree
    }
}

impl fmt::Display for SegreShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// An exact rational threshold, always stored in lowest terms with a
/// positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalBound(BigRational);

impl RationalBound {
    pub fn new(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Self(BigRational::new(numer, denom))
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        Self(BigRational::from_integer(value.into()))
    }

    pub fn from_ratio(ratio: BigRational) -> Self {
        Self(ratio)
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> BigInt {
        self.0.numer().div_floor(self.0.denom())
    }

    pub fn ceil(&self) -> BigInt {
        self.0.numer().div_ceil(self.0.denom())
    }

    /// Largest integer strictly below the bound: `ceil - 1` in both the
    /// integral and the non-integral case.
    pub fn max_strictly_below(&self) -> BigInt {
        self.ceil() - 1
    }

    /// Exact comparison of an integer against the bound.
    pub fn cmp_integer(&self, k: u64) -> Ordering {
        BigRational::from_integer(BigInt::from(k)).cmp(&self.0)
    }

    pub fn exceeded_by(&self, k: u64) -> bool {
        self.cmp_integer(k) == Ordering::Greater
    }

    pub fn strictly_above(&self, k: u64) -> bool {
        self.cmp_integer(k) == Ordering::Less
    }

    /// Floating-point view, for display only.
    pub fn to_f64(&self) -> f64 {
        let n = self.0.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.0.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    }

    /// Floor clamped at zero, as a machine integer where possible.
    pub fn floor_nonnegative(&self) -> BigInt {
        let f = self.floor();
        if f.is_negative() {
            BigInt::zero()
        } else {
            f
        }
    }
}

impl fmt::Display for RationalBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for RationalBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RationalBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let parse = |s: &str| s.trim().parse::<BigInt>().map_err(serde::de::Error::custom);
        match text.split_once('/') {
            Some((n, m)) => {
                let denom = parse(m)?;
                if denom.is_zero() {
                    return Err(serde::de::Error::custom("zero denominator"));
                }
                Ok(Self::new(parse(n)?, denom))
            }
            None => Ok(Self::from_integer(parse(&text)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[i64]) -> SegreShape {
        SegreShape::canonicalize(d).unwrap()
    }

    #[test]
    fn canonicalize_sorts_and_keeps_caller_order() {
        let s = shape(&[3, 1, 2]);
        assert_eq!(s.dims(), &[1, 2, 3]);
        assert_eq!(s.original_dims(), &[3, 1, 2]);
    }

    #[test]
    fn derived_dimensions() {
        let s = shape(&[1, 1, 1, 1, 1]);
        assert_eq!((s.ambient_dim(), s.variety_dim()), (31, 5));
        let s = shape(&[2, 3, 3]);
        assert_eq!((s.ambient_dim(), s.variety_dim()), (47, 8));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(matches!(
            SegreShape::canonicalize(&[]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            SegreShape::canonicalize(&[2, 0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            SegreShape::canonicalize(&[-1, 3]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn critical_rank_values() {
        assert_eq!(shape(&[1, 1, 1, 1, 1]).critical_rank().to_string(), "16/3");
        assert_eq!(
            shape(&[1, 1, 1]).critical_rank(),
            RationalBound::from_integer(2)
        );
        let p12 = SegreShape::power(1, 12).unwrap();
        assert_eq!(p12.critical_rank().to_string(), "4096/13");
    }

    #[test]
    fn strict_threshold_integral_and_not() {
        let kc = shape(&[1, 1, 1]).critical_rank();
        assert_eq!(kc.max_strictly_below(), BigInt::from(1));
        let kc = shape(&[3, 3, 3]).critical_rank();
        assert_eq!(kc.max_strictly_below(), BigInt::from(6));
        assert!(kc.strictly_above(6));
        assert!(kc.exceeded_by(7));
    }

    #[test]
    fn expected_secant_dims() {
        assert_eq!(shape(&[1, 1, 1, 1]).expected_secant_dim(3), 14);
        assert_eq!(shape(&[1, 1, 1]).expected_secant_dim(1), 3);
        assert_eq!(shape(&[2, 3, 3]).expected_secant_dim(5), 44);
    }

    #[test]
    fn degrees() {
        assert_eq!(shape(&[2, 2]).segre_degree(), BigUint::from(6u32));
        assert_eq!(shape(&[1, 1]).segre_degree(), BigUint::from(2u32));
        assert_eq!(shape(&[7]).segre_degree(), BigUint::one());
    }

    #[test]
    fn rational_bound_json_roundtrip() {
        let b = shape(&[1, 1, 1, 1, 1]).critical_rank();
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(text, "\"16/3\"");
        assert_eq!(serde_json::from_str::<RationalBound>(&text).unwrap(), b);
    }
}
