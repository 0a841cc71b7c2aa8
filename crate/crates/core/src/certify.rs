//! Closed-form classification of `k`-identifiability and the inductive
//! certificate engine.
//!
//! [`classify`] runs a fixed rule cascade (first match wins):
//!
//! 1. the exceptions table (shapes with a known non-unique decomposition);
//! 2. `k > k_c`, beyond the critical rank;
//! 3. shapes with fewer than three factors are out of scope;
//! 4. boundary and unbalanced shapes, decided by the flattening corollary;
//! 5. the perfect case `(1,b,b)` at `k = b+1`, and so at every `k <= b+1`;
//! 6. any closed-form or engine-derived bound;
//! 7. otherwise unknown, to be escalated to the numeric check.
//!
//! Certificates record statements of the form "a general linear space of
//! dimension `r` tangent to `X` at `k` general points is tangent nowhere
//! else". They are built from bases (numeric reports, or the three-factor
//! construction for `P^a x P^b x P^c` with `a > 2`) by two rules: `weaken`
//! lowers `r` or `k`, and `extend` appends a factor `P^m`, sending
//! `(r, k)` to `(m r + m + r, (m+1) k)`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{binomial, RationalBound, SegreShape};
use crate::tangency::TangencyReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Identifiable,
    NotIdentifiable,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Identifiable => "Identifiable",
            Status::NotIdentifiable => "NotIdentifiable",
            Status::Unknown => "Unknown",
        })
    }
}

/// Every rule a verdict or bound can cite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    ExceptionsTable,
    BeyondCriticalRank,
    UnbalancedCorollary,
    PerfectCase,
    Manyp1,
    Manyp2,
    Manyp3,
    Cub,
    Trex,
    Theorgen,
    Engine,
    NumericCertificate,
    NumericInconclusive,
    UnsupportedShape,
    NoRule,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::ExceptionsTable => "exceptions-table",
            Rule::BeyondCriticalRank => "beyond-critical-rank",
            Rule::UnbalancedCorollary => "unbalanced-corollary",
            Rule::PerfectCase => "perfect-case",
            Rule::Manyp1 => "manyp1",
            Rule::Manyp2 => "manyp2",
            Rule::Manyp3 => "manyp3",
            Rule::Cub => "cub",
            Rule::Trex => "trex",
            Rule::Theorgen => "theorgen",
            Rule::Engine => "engine",
            Rule::NumericCertificate => "numeric-certificate",
            Rule::NumericInconclusive => "numeric-inconclusive",
            Rule::UnsupportedShape => "unsupported-shape",
            Rule::NoRule => "no-rule",
        }
    }

    /// Statement the rule applies, for human-readable output.
    pub fn citation(self) -> &'static str {
        match self {
            Rule::ExceptionsTable => {
                "listed exceptional balanced case (the list is complete for prod(a_i+1) <= 100)"
            }
            Rule::BeyondCriticalRank => {
                "k > k_c = prod(a_i+1)/(1+sum a_i): the decomposition is never unique"
            }
            Rule::UnbalancedCorollary => "a_q >= P - S: identifiable iff k <= P - S - 1",
            Rule::PerfectCase => {
                "(1,b,b) with k_c = b+1 integral: unique decomposition up to k = k_c"
            }
            Rule::Manyp1 => "(P^1)^n, n >= 12, k <= (2^n - 2^(n-12))/(n+1)",
            Rule::Manyp2 => "(P^2)^n, n >= 6, k <= (3^n - 3^(n-6))/(2n+1)",
            Rule::Manyp3 => "(P^3)^n, n >= 5, k <= (4^n - 4^(n-3))/(3n+1)",
            Rule::Cub => "(P^a)^n, a >= 4, n >= 3, k <= ((a+1)^n - (3a+1)(a+1)^(n-2))/(an+1)",
            Rule::Trex => {
                "P^a x P^b x P^c, 2 < a <= b <= c, k <= (a+1)(b+1)(c+1)/(a+b+c+1) - c - 1"
            }
            Rule::Theorgen => {
                "q >= 3: k <= (prod(a_i+1) - (a_1+a_2+a_3+1) prod_{i>=3}(a_i+1))/(1+sum a_i)"
            }
            Rule::Engine => "inductive certificate: weaken + extend from a base",
            Rule::NumericCertificate => {
                "numeric tangency certificate (contact locus reduced at p_1)"
            }
            Rule::NumericInconclusive => {
                "numeric tangency check inconclusive; further analysis required"
            }
            Rule::UnsupportedShape => "fewer than three factors",
            Rule::NoRule => "no closed-form rule applies",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Number of decompositions of the general tensor, as recorded for
/// non-identifiable cases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DecompositionWitness {
    /// A family of decompositions of the given dimension.
    Infinite {
        fiber_dim: u64,
    },
    Exactly {
        count: BigUint,
    },
    /// Finitely many, count only known from below.
    Finite {
        at_least: u64,
        at_most: Option<u64>,
    },
}

impl fmt::Display for DecompositionWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecompositionWitness::Infinite { fiber_dim } => write!(f, "inf^{fiber_dim}"),
            DecompositionWitness::Exactly { count } => write!(f, "{count}"),
            DecompositionWitness::Finite {
                at_least,
                at_most: None,
            } => {
                write!(f, "finite, >= {at_least}")
            }
            DecompositionWitness::Finite {
                at_least,
                at_most: Some(hi),
            } => {
                write!(f, "finite, in [{at_least}, {hi}]")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Witness {
    Decompositions {
        decompositions: DecompositionWitness,
    },
    Bound {
        bound: BigInt,
    },
    Certificate {
        certificate: Box<Certificate>,
    },
    Numeric(Box<TangencyReport>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub rule: Rule,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

impl Verdict {
    fn with(status: Status, rule: Rule, witness: Option<Witness>) -> Self {
        Self {
            status,
            rule,
            reason: rule.citation().to_string(),
            witness,
            caveat: None,
        }
    }

    pub fn identifiable(rule: Rule, witness: Option<Witness>) -> Self {
        Self::with(Status::Identifiable, rule, witness)
    }

    pub fn not_identifiable(rule: Rule, witness: Option<Witness>) -> Self {
        debug_assert!(matches!(
            rule,
            Rule::UnbalancedCorollary | Rule::ExceptionsTable | Rule::BeyondCriticalRank
        ));
        Self::with(Status::NotIdentifiable, rule, witness)
    }

    pub fn unknown(rule: Rule, witness: Option<Witness>) -> Self {
        Self::with(Status::Unknown, rule, witness)
    }
}

// ---------------------------------------------------------------------------
// Exceptions table
// ---------------------------------------------------------------------------

/// One matched row of the exceptions table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMatch {
    pub row: String,
    pub k: u64,
    pub decompositions: DecompositionWitness,
}

/// The exceptional rank of `shape` in the table, if it has a row.
pub fn exceptional_rank(shape: &SegreShape) -> Option<TableMatch> {
    let d = shape.dims();
    let hit = |row: &str, k: u64, decompositions| {
        Some(TableMatch {
            row: row.to_string(),
            k,
            decompositions,
        })
    };
    let inf = |fiber_dim| DecompositionWitness::Infinite { fiber_dim };
    match d {
        [2, 3, 3] => hit("(2,3,3)", 5, inf(1)),
        [2, b, c] if b == c && b % 2 == 0 => {
            let b = u64::from(*b);
            hit("(2,b,b), b even", (3 * b + 2) / 2, inf(b / 2 + 1))
        }
        [1, 1, n, m] if n == m => hit("(1,1,n,n)", 2 * u64::from(*n) + 1, inf(1)),
        [3, 3, 3] => hit(
            "(3,3,3)",
            6,
            DecompositionWitness::Exactly {
                count: BigUint::from(2u32),
            },
        ),
        [2, 5, 5] => hit(
            "(2,5,5)",
            8,
            DecompositionWitness::Finite {
                at_least: 6,
                at_most: None,
            },
        ),
        [1, 1, 1, 1, 1] => hit(
            "(1,1,1,1,1)",
            5,
            DecompositionWitness::Exactly {
                count: BigUint::from(2u32),
            },
        ),
        _ => None,
    }
}

pub fn exceptions_table_match(shape: &SegreShape, k: u64) -> Option<TableMatch> {
    exceptional_rank(shape).filter(|m| m.k == k)
}

// ---------------------------------------------------------------------------
// Unbalanced trichotomy
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Balanced,
    Boundary,
    Unbalanced,
}

/// Position of the largest factor relative to the rest. With
/// `P = prod_{i<q}(a_i+1)` and `S = sum_{i<q} a_i`: balanced when
/// `a_q <= P - S - 1`, boundary when `a_q = P - S`, unbalanced beyond.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnbalancedProfile {
    pub shape: Vec<u32>,
    pub tail: u32,
    pub head_product: u64,
    pub head_sum: u64,
    pub regime: Regime,
    pub generic_rank: Option<u64>,
    pub decomposition_count_at_boundary: Option<BigUint>,
}

impl UnbalancedProfile {
    /// `P - S`, the first rank at which a boundary or unbalanced shape stops
    /// being identifiable.
    pub fn threshold(&self) -> u64 {
        self.head_product - self.head_sum
    }

    /// Largest identifiable rank for boundary and unbalanced shapes.
    pub fn identifiable_up_to(&self) -> u64 {
        self.threshold() - 1
    }
}

pub fn unbalanced_profile(shape: &SegreShape) -> Result<UnbalancedProfile> {
    if shape.factors() < 3 {
        return Err(Error::UnsupportedShape(format!(
            "{shape} has fewer than three factors"
        )));
    }
    let head = shape.head().expect("q >= 3");
    let tail = shape.largest();
    let head_product = head.size();
    let head_sum = head.variety_dim();
    // P >= 1 + S + a_1 a_2 > S for at least two head factors.
    let threshold = head_product - head_sum;
    let a_q = u64::from(tail);
    let regime = if a_q < threshold {
        Regime::Balanced
    } else if a_q == threshold {
        Regime::Boundary
    } else {
        Regime::Unbalanced
    };
    let (generic_rank, count) = match regime {
        Regime::Balanced => (None, None),
        Regime::Boundary => (Some(a_q + 1), Some(boundary_count(&head, threshold))),
        Regime::Unbalanced => (
            Some((a_q + 1).min(head_product)),
            Some(boundary_count(&head, threshold)),
        ),
    };
    Ok(UnbalancedProfile {
        shape: shape.dims().to_vec(),
        tail,
        head_product,
        head_sum,
        regime,
        generic_rank,
        decomposition_count_at_boundary: count,
    })
}

/// `C(D, P - S)` with `D` the degree of the head factors.
fn boundary_count(head: &SegreShape, threshold: u64) -> BigUint {
    let degree = head.segre_degree();
    match degree.to_u64() {
        Some(d) => binomial(d, threshold),
        // The degree of any shape this crate can store fits comfortably; a
        // larger one would make the count astronomically large anyway.
        None => BigUint::zero(),
    }
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// How a certificate was obtained. Serialized as a tree with one rule name
/// and its parameters per node; [`Certificate::verify`] replays it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Derivation {
    NumericBase {
        report: Box<TangencyReport>,
    },
    /// A base case taken as given (for example a computation reported
    /// elsewhere and too long to repeat).
    AssumedBase {
        source: String,
    },
    StrassenBase,
    Extend {
        m: u32,
        from: Box<Certificate>,
    },
    Weaken {
        from: Box<Certificate>,
    },
}

/// "A general linear space of dimension `r` tangent to the Segre variety
/// of `shape` at `k` general points is tangent nowhere else."
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub shape: SegreShape,
    pub r: u64,
    pub k: u64,
    pub derivation: Derivation,
}

fn check_tangency_statement(shape: &SegreShape, r: u64, k: u64) -> Result<()> {
    let per_point = shape.variety_dim() + 1;
    if k == 0 {
        return Err(Error::RuleInapplicable("k must be at least 1".into()));
    }
    if r + 1 < k * per_point {
        return Err(Error::RuleInapplicable(format!(
            "r = {r} < k (n+1) - 1 = {}",
            k * per_point - 1
        )));
    }
    if r >= shape.ambient_dim() {
        return Err(Error::RuleInapplicable(format!(
            "r = {r} is not below N = {}",
            shape.ambient_dim()
        )));
    }
    Ok(())
}

impl Certificate {
    /// Base certificate from a certified tangency report.
    pub fn numeric_base(report: TangencyReport) -> Result<Self> {
        if !report.certified() {
            return Err(Error::RuleInapplicable(
                "tangency report is not certified".into(),
            ));
        }
        let shape = report.shape()?;
        let (r, k) = (report.r, report.k);
        check_tangency_statement(&shape, r, k)?;
        Ok(Self {
            shape,
            r,
            k,
            derivation: Derivation::NumericBase {
                report: Box::new(report),
            },
        })
    }

    pub fn assumed_base(
        shape: SegreShape,
        r: u64,
        k: u64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let shape = shape.canonical();
        check_tangency_statement(&shape, r, k)?;
        Ok(Self {
            shape,
            r,
            k,
            derivation: Derivation::AssumedBase {
                source: source.into(),
            },
        })
    }

    /// The rank up to which this certificate proves identifiability.
    pub fn identifiable_up_to(&self) -> u64 {
        self.k
    }

    /// Number of rule applications on the longest path to a base.
    pub fn depth(&self) -> usize {
        match &self.derivation {
            Derivation::Extend { from, .. } | Derivation::Weaken { from } => 1 + from.depth(),
            _ => 0,
        }
    }

    /// Re-checks every node against its rule.
    pub fn verify(&self) -> Result<()> {
        check_tangency_statement(&self.shape, self.r, self.k)?;
        match &self.derivation {
            Derivation::NumericBase { report } => {
                if !report.certified()
                    || report.shape()?.canonical() != self.shape.canonical()
                    || report.r != self.r
                    || report.k != self.k
                {
                    return Err(Error::RuleInapplicable(
                        "numeric base does not match its report".into(),
                    ));
                }
                Ok(())
            }
            Derivation::AssumedBase { .. } => Ok(()),
            Derivation::StrassenBase => {
                let rebuilt = strassen_base(&self.shape)?;
                if (rebuilt.r, rebuilt.k) != (self.r, self.k) {
                    return Err(Error::RuleInapplicable(format!(
                        "three-factor base gives (r, k) = ({}, {}), not ({}, {})",
                        rebuilt.r, rebuilt.k, self.r, self.k
                    )));
                }
                Ok(())
            }
            Derivation::Extend { m, from } => {
                from.verify()?;
                let rebuilt = extend_certificate(from, *m)?;
                if rebuilt.shape.canonical() != self.shape.canonical()
                    || (rebuilt.r, rebuilt.k) != (self.r, self.k)
                {
                    return Err(Error::RuleInapplicable(
                        "extend node does not match its parent".into(),
                    ));
                }
                Ok(())
            }
            Derivation::Weaken { from } => {
                from.verify()?;
                weaken_certificate(from, self.r, self.k)?;
                if from.shape.canonical() != self.shape.canonical() {
                    return Err(Error::RuleInapplicable(
                        "weaken node changes the shape".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// The three-factor base: for `P^a x P^b x P^c` with `2 < a <= b <= c`, a
/// general space of codimension `a+b+2` tangent at
/// `k = floor((a+1)(b+1)(c+1)/(a+b+c+1) - c - 1)` general points is
/// tangent nowhere else.
pub fn strassen_base(shape: &SegreShape) -> Result<Certificate> {
    let [a, b, c] = match shape.dims() {
        &[a, b, c] => [u64::from(a), u64::from(b), u64::from(c)],
        _ => {
            return Err(Error::RuleInapplicable(format!(
                "{shape} does not have exactly three factors"
            )))
        }
    };
    if a <= 2 {
        return Err(Error::RuleInapplicable(format!(
            "smallest factor a = {a} must exceed 2"
        )));
    }
    let bound = trex_value(a, b, c).floor();
    let k = bound.to_u64().filter(|&k| k >= 1).ok_or_else(|| {
        Error::BoundVacuous(format!("three-factor bound {bound} for {shape} is below 1"))
    })?;
    let r = shape.ambient_dim() - (a + b + 2);
    let shape = shape.canonical();
    check_tangency_statement(&shape, r, k)?;
    Ok(Certificate {
        shape,
        r,
        k,
        derivation: Derivation::StrassenBase,
    })
}

fn trex_value(a: u64, b: u64, c: u64) -> RationalBound {
    let numer = BigInt::from((a + 1) * (b + 1) * (c + 1)) - BigInt::from((c + 1) * (a + b + c + 1));
    RationalBound::new(numer, BigInt::from(a + b + c + 1))
}

/// Appends a factor `P^m`. Requires `(n+1) k < N+1`, `r < N` and
/// `r + 1 >= (n+m+1) k` for the certificate's shape.
pub fn extend_certificate(cert: &Certificate, m: u32) -> Result<Certificate> {
    if m == 0 {
        return Err(Error::RuleInapplicable(
            "appended factor must have m >= 1".into(),
        ));
    }
    let shape = &cert.shape;
    let n = shape.variety_dim();
    let size = shape.size();
    let (r, k) = (cert.r, cert.k);
    let m64 = u64::from(m);
    if (n + 1) * k >= size {
        return Err(Error::RuleInapplicable(format!(
            "(n+1) k = {} is not below N+1 = {size}",
            (n + 1) * k
        )));
    }
    if r >= shape.ambient_dim() {
        return Err(Error::RuleInapplicable(format!(
            "r = {r} is not below N = {}",
            shape.ambient_dim()
        )));
    }
    let needed = (n + m64 + 1) * k;
    if r + 1 < needed {
        return Err(Error::RuleInapplicable(format!(
            "r + 1 = {} < (n+m+1) k = {needed}",
            r + 1
        )));
    }
    let new_r = m64
        .checked_mul(r)
        .and_then(|x| x.checked_add(m64 + r))
        .ok_or_else(|| Error::RuleInapplicable("extended dimension overflows".into()))?;
    Ok(Certificate {
        shape: shape.with_factor(m)?,
        r: new_r,
        k: (m64 + 1) * k,
        derivation: Derivation::Extend {
            m,
            from: Box::new(cert.clone()),
        },
    })
}

/// Passes to a smaller space and/or fewer tangency points.
pub fn weaken_certificate(cert: &Certificate, r: u64, k: u64) -> Result<Certificate> {
    if r > cert.r {
        return Err(Error::RuleInapplicable(format!(
            "r' = {r} exceeds r = {}",
            cert.r
        )));
    }
    if k > cert.k {
        return Err(Error::RuleInapplicable(format!(
            "k' = {k} exceeds k = {}",
            cert.k
        )));
    }
    check_tangency_statement(&cert.shape, r, k)?;
    Ok(Certificate {
        shape: cert.shape.clone(),
        r,
        k,
        derivation: Derivation::Weaken {
            from: Box::new(cert.clone()),
        },
    })
}

/// Largest `k` for which `cert` can be extended by `P^m` after weakening
/// only `k` (keeping `r`), and the extension itself.
pub fn extend_greedy(cert: &Certificate, m: u32) -> Option<Certificate> {
    let shape = &cert.shape;
    let n = shape.variety_dim();
    let per_point = n + 1;
    if cert.r >= shape.ambient_dim() {
        return None;
    }
    let by_span = (cert.r + 1) / (n + u64::from(m) + 1);
    let by_ambient = shape.ambient_dim() / per_point;
    let k = cert.k.min(by_span).min(by_ambient);
    if k == 0 {
        return None;
    }
    let start = if k < cert.k {
        weaken_certificate(cert, cert.r, k).ok()?
    } else {
        cert.clone()
    };
    extend_certificate(&start, m).ok()
}

/// Search over certificate derivations: bases on sub-products, then one
/// weaken + extend per appended factor. Memoized per sub-shape as the
/// Pareto front of `(r, k)`.
pub struct CertificateEngine {
    bases: Vec<Certificate>,
    memo: HashMap<Vec<u32>, Vec<Certificate>>,
}

impl Default for CertificateEngine {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl CertificateEngine {
    /// Engine with the three-factor bases plus the given extra bases.
    pub fn new(bases: Vec<Certificate>) -> Self {
        Self {
            bases,
            memo: HashMap::new(),
        }
    }

    pub fn add_base(&mut self, base: Certificate) {
        self.bases.push(base);
        self.memo.clear();
    }

    /// Certificate with the largest `k` for `shape`, if any derivation
    /// reaches it. Ties prefer the larger `r`.
    pub fn best(&mut self, shape: &SegreShape) -> Option<Certificate> {
        self.front(shape.dims())
            .into_iter()
            .max_by_key(|c| (c.k, c.r))
    }

    fn front(&mut self, dims: &[u32]) -> Vec<Certificate> {
        if let Some(hit) = self.memo.get(dims) {
            return hit.clone();
        }
        let mut candidates: Vec<Certificate> = self
            .bases
            .iter()
            .filter(|b| b.shape.dims() == dims)
            .cloned()
            .collect();
        if dims.len() == 3 {
            if let Ok(shape) = SegreShape::from_dims(dims.to_vec()) {
                if let Ok(base) = strassen_base(&shape) {
                    candidates.push(base);
                }
            }
        }
        if dims.len() >= 2 {
            let mut seen = Vec::new();
            for (i, &m) in dims.iter().enumerate() {
                if seen.contains(&m) {
                    continue;
                }
                seen.push(m);
                let mut sub = dims.to_vec();
                sub.remove(i);
                for cert in self.front(&sub) {
                    if let Some(next) = extend_greedy(&cert, m) {
                        candidates.push(next);
                    }
                }
            }
        }
        let front = pareto(candidates);
        self.memo.insert(dims.to_vec(), front.clone());
        front
    }
}

fn pareto(mut certs: Vec<Certificate>) -> Vec<Certificate> {
    // Largest r first, then largest k, then shallowest derivation.
    certs.sort_by(|a, b| {
        b.r.cmp(&a.r)
            .then(b.k.cmp(&a.k))
            .then(a.depth().cmp(&b.depth()))
    });
    let mut out: Vec<Certificate> = Vec::new();
    for c in certs {
        if out.last().is_none_or(|best| c.k > best.k) {
            out.push(c);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Closed-form bounds
// ---------------------------------------------------------------------------

/// One evaluated bound: `bound` is `value` floored, clamped to zero when
/// vacuous.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBound {
    pub rule: Rule,
    pub value: RationalBound,
    pub bound: BigInt,
}

impl RuleBound {
    fn at_most(rule: Rule, value: RationalBound) -> Self {
        let bound = value.floor_nonnegative();
        Self { rule, value, bound }
    }

    pub fn covers(&self, k: u64) -> bool {
        BigInt::from(k) <= self.bound
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub shape: Vec<u32>,
    pub critical_rank: RationalBound,
    pub rules: Vec<RuleBound>,
    pub engine: Option<Certificate>,
    pub engine_bound: u64,
    pub max: BigInt,
    pub max_rule: Option<Rule>,
}

impl BoundReport {
    pub fn rule(&self, rule: Rule) -> Option<&RuleBound> {
        self.rules.iter().find(|b| b.rule == rule)
    }
}

fn pow_big(base: u64, exp: u64) -> BigInt {
    num_traits::pow(BigInt::from(base), exp as usize)
}

fn ratio(numer: BigInt, denom: u64) -> RationalBound {
    RationalBound::new(numer, BigInt::from(denom))
}

/// Every closed-form bound that applies to `shape`.
pub fn closed_form_bounds(shape: &SegreShape) -> Vec<RuleBound> {
    let dims = shape.dims();
    let q = dims.len() as u64;
    let n = shape.variety_dim();
    let uniform = dims
        .iter()
        .all(|&d| d == dims[0])
        .then_some(u64::from(dims[0]));
    let mut out = Vec::new();

    match uniform {
        Some(1) if q >= 12 => {
            let v = pow_big(2, q) - pow_big(2, q - 12);
            out.push(RuleBound::at_most(Rule::Manyp1, ratio(v, q + 1)));
        }
        Some(2) if q >= 6 => {
            let v = pow_big(3, q) - pow_big(3, q - 6);
            out.push(RuleBound::at_most(Rule::Manyp2, ratio(v, 2 * q + 1)));
        }
        Some(3) if q >= 5 => {
            let v = pow_big(4, q) - pow_big(4, q - 3);
            out.push(RuleBound::at_most(Rule::Manyp3, ratio(v, 3 * q + 1)));
        }
        Some(a) if a >= 4 && q >= 3 => {
            let v = pow_big(a + 1, q) - BigInt::from(3 * a + 1) * pow_big(a + 1, q - 2);
            out.push(RuleBound::at_most(Rule::Cub, ratio(v, a * q + 1)));
        }
        _ => {}
    }

    if let &[a, b, c] = dims {
        if a > 2 {
            let (a, b, c) = (u64::from(a), u64::from(b), u64::from(c));
            out.push(RuleBound::at_most(Rule::Trex, trex_value(a, b, c)));
        }
    }

    if q >= 3 {
        out.push(RuleBound::at_most(Rule::Theorgen, theorgen_value(dims, n)));
    }
    out
}

/// Best value of the general-shape bound over every choice of the two
/// distinguished factors and the third one.
fn theorgen_value(dims: &[u32], n: u64) -> RationalBound {
    let sizes: Vec<u64> = dims.iter().map(|&d| u64::from(d) + 1).collect();
    let total: BigInt = sizes.iter().map(|&s| BigInt::from(s)).product();
    let mut best: Option<BigInt> = None;
    for i in 0..dims.len() {
        for j in i + 1..dims.len() {
            let rest: BigInt = sizes
                .iter()
                .enumerate()
                .filter(|&(h, _)| h != i && h != j)
                .map(|(_, &s)| BigInt::from(s))
                .product();
            for l in (0..dims.len()).filter(|&l| l != i && l != j) {
                let factor = u64::from(dims[i]) + u64::from(dims[j]) + u64::from(dims[l]) + 1;
                let v = &total - BigInt::from(factor) * &rest;
                if best.as_ref().is_none_or(|b| &v > b) {
                    best = Some(v);
                }
            }
        }
    }
    ratio(best.unwrap_or_default(), n + 1)
}

/// All closed-form bounds plus the engine bound from the three-factor
/// bases and `extra_bases`.
pub fn best_bound(shape: &SegreShape, extra_bases: &[Certificate]) -> BoundReport {
    let mut engine = CertificateEngine::new(extra_bases.to_vec());
    best_bound_with(shape, &mut engine)
}

pub fn best_bound_with(shape: &SegreShape, engine: &mut CertificateEngine) -> BoundReport {
    let rules = closed_form_bounds(shape);
    let cert = engine.best(shape);
    let engine_bound = cert.as_ref().map_or(0, |c| c.k);
    let mut max = BigInt::zero();
    let mut max_rule = None;
    for b in &rules {
        if b.bound > max {
            max = b.bound.clone();
            max_rule = Some(b.rule);
        }
    }
    if BigInt::from(engine_bound) > max {
        max = BigInt::from(engine_bound);
        max_rule = Some(Rule::Engine);
    }
    BoundReport {
        shape: shape.dims().to_vec(),
        critical_rank: shape.critical_rank(),
        rules,
        engine: cert,
        engine_bound,
        max,
        max_rule,
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

pub fn classify(shape: &SegreShape, k: u64) -> Verdict {
    classify_with(shape, k, &mut CertificateEngine::default())
}

pub fn classify_with(shape: &SegreShape, k: u64, engine: &mut CertificateEngine) -> Verdict {
    let shape = shape.canonical();
    if k == 0 {
        return Verdict::unknown(Rule::NoRule, None);
    }
    if let Some(hit) = exceptions_table_match(&shape, k) {
        return Verdict::not_identifiable(
            Rule::ExceptionsTable,
            Some(Witness::Decompositions {
                decompositions: hit.decompositions,
            }),
        );
    }
    let kc = shape.critical_rank();
    if kc.exceeded_by(k) {
        return Verdict::not_identifiable(Rule::BeyondCriticalRank, None);
    }
    let profile = match unbalanced_profile(&shape) {
        Ok(p) => p,
        Err(_) => return Verdict::unknown(Rule::UnsupportedShape, None),
    };
    if profile.regime != Regime::Balanced {
        let count = profile
            .decomposition_count_at_boundary
            .clone()
            .expect("set for non-balanced shapes");
        let caveat = (count <= BigUint::one()).then(|| {
            format!(
                "boundary decomposition count C(D, P-S) = {count} is not above 1 for this shape; \
                 the corollary is applied as stated"
            )
        });
        let mut verdict = if k <= profile.identifiable_up_to() {
            Verdict::identifiable(Rule::UnbalancedCorollary, None)
        } else {
            Verdict::not_identifiable(
                Rule::UnbalancedCorollary,
                Some(Witness::Decompositions {
                    decompositions: DecompositionWitness::Exactly { count },
                }),
            )
        };
        verdict.caveat = caveat;
        return verdict;
    }
    if let &[1, b, c] = shape.dims() {
        // Unique at k_c = b+1, hence at every smaller rank.
        if b == c && k <= u64::from(b) + 1 {
            return Verdict::identifiable(Rule::PerfectCase, None);
        }
    }
    let report = best_bound_with(&shape, engine);
    if let Some(rule) = report.max_rule {
        if BigInt::from(k) <= report.max {
            let witness = if rule == Rule::Engine {
                report.engine.map(|c| Witness::Certificate {
                    certificate: Box::new(c),
                })
            } else {
                Some(Witness::Bound {
                    bound: report.max.clone(),
                })
            };
            return Verdict::identifiable(rule, witness);
        }
    }
    Verdict::unknown(Rule::NoRule, None)
}
