//! Randomized certification that a linear space tangent to the Segre
//! variety at `k` general points is tangent nowhere else.
//!
//! One trial:
//!
//! 1. sample `k` chart points over a fresh random prime, the first at the
//!    chart origin;
//! 2. stack their tangent frames, optionally padded with random ambient rows
//!    up to a target dimension `r`, and take the linear forms vanishing on
//!    the span (the nullspace of the stack);
//! 3. the contact locus is cut out by `L(X(t)) = 0` and `L(dX(t)) = 0` for
//!    every such form `L`. At the origin all first-order terms vanish, so its
//!    jacobian there is the stack of the mixed second-derivative
//!    contractions of the forms;
//! 4. the origin is an isolated reduced point of the contact locus iff that
//!    jacobian has rank `n = dim X`.
//!
//! Reduction mod `p` and specialization of points can only lower ranks, so a
//! full-rank outcome certifies the statement over the complex numbers. A
//! deficient outcome is only evidence and is never turned into a negative
//! verdict.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{Rule, Verdict, Witness};
use crate::error::{Error, Result};
use crate::linalg::{random_prime, PrimeFieldMatrix};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::segre::{mixed_second_contraction, sample_points, terracini_matrix, AffinePoint};
use crate::shape::SegreShape;

pub const DEFAULT_TRIALS: u32 = 3;
pub const DEFAULT_PRIME_BITS: u32 = 31;

/// Randomness and retry settings shared by every numeric check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub prime_bits: u32,
    pub seed: u64,
    pub trials: u32,
}

impl CheckConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            prime_bits: DEFAULT_PRIME_BITS,
            seed,
            trials: DEFAULT_TRIALS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(31..=62).contains(&self.prime_bits) {
            return Err(Error::InvalidInput(format!(
                "prime width {} outside 31..=62 bits",
                self.prime_bits
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("at least one trial is required".into()));
        }
        Ok(())
    }
}

/// Dimension of the linear space required to be tangent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "r")]
pub enum SpanTarget {
    /// The span of the `k` tangent spaces itself.
    TangentSpan,
    /// A general space of projective dimension `r` containing that span.
    Dimension(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangencyQuery {
    pub shape: SegreShape,
    pub k: u64,
    pub target: SpanTarget,
    pub config: CheckConfig,
}

impl TangencyQuery {
    pub fn tangent_span(shape: SegreShape, k: u64, config: CheckConfig) -> Self {
        Self {
            shape,
            k,
            target: SpanTarget::TangentSpan,
            config,
        }
    }

    pub fn padded(shape: SegreShape, k: u64, r: u64, config: CheckConfig) -> Self {
        Self {
            shape,
            k,
            target: SpanTarget::Dimension(r),
            config,
        }
    }

    /// Projective dimension the tangent frames alone would span.
    fn frame_span_dim(&self) -> u64 {
        self.k * (self.shape.variety_dim() + 1) - 1
    }

    pub fn target_dim(&self) -> u64 {
        match self.target {
            SpanTarget::TangentSpan => self.frame_span_dim(),
            SpanTarget::Dimension(r) => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let per_point = self.shape.variety_dim() + 1;
        let size = self.shape.size();
        let rows = self
            .k
            .checked_mul(per_point)
            .ok_or_else(|| Error::InvalidInput("k (n+1) overflows".into()))?;
        if rows >= size {
            return Err(Error::PreconditionViolation(format!(
                "k (n+1) = {rows} is not below N+1 = {size}; the tangent spaces span the ambient space"
            )));
        }
        if let SpanTarget::Dimension(r) = self.target {
            let n_amb = self.shape.ambient_dim();
            if r < rows - 1 || r >= n_amb {
                return Err(Error::InvalidInput(format!(
                    "target dimension r = {r} must satisfy k (n+1) - 1 = {} <= r < N = {n_amb}",
                    rows - 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TangencyVerdict {
    Certified,
    Inconclusive,
}

/// Outcome of one trial with its own prime and points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub attempt: u32,
    pub seed: u64,
    pub prime: u64,
    pub terracini_rank: u64,
    pub span_dim: u64,
    pub num_equations: u64,
    pub jacobian_rank: u64,
    pub verdict: TangencyVerdict,
    pub elapsed_ms: u64,
}

/// Full record of a check. Top-level numbers are those of the last trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TangencyReport {
    pub shape: Vec<u32>,
    pub k: u64,
    pub r: u64,
    pub target: SpanTarget,
    pub variety_dim: u64,
    pub prime_bits: u32,
    pub prime: u64,
    pub seed: u64,
    pub terracini_rank: u64,
    pub span_dim: u64,
    pub num_equations: u64,
    pub jacobian_rank: u64,
    pub verdict: TangencyVerdict,
    pub trials: u32,
    pub max_trials: u32,
    pub attempts: Vec<TrialRecord>,
    pub elapsed_ms: u64,
}

impl TangencyReport {
    pub fn certified(&self) -> bool {
        self.verdict == TangencyVerdict::Certified
    }

    pub fn shape(&self) -> Result<SegreShape> {
        SegreShape::from_dims(self.shape.clone())
    }
}

/// Runs up to `trials` independent trials and stops at the first
/// certification.
pub fn tangency_check(query: &TangencyQuery) -> Result<TangencyReport> {
    query.validate()?;
    let started = Instant::now();
    let cfg = query.config;
    let mut attempts = Vec::new();
    for attempt in 0..cfg.trials {
        let record = run_trial(query, attempt)?;
        let done = record.verdict == TangencyVerdict::Certified;
        attempts.push(record);
        if done {
            break;
        }
    }
    let last = attempts.last().expect("at least one trial").clone();
    Ok(TangencyReport {
        shape: query.shape.dims().to_vec(),
        k: query.k,
        r: query.target_dim(),
        target: query.target,
        variety_dim: query.shape.variety_dim(),
        prime_bits: cfg.prime_bits,
        prime: last.prime,
        seed: cfg.seed,
        terracini_rank: last.terracini_rank,
        span_dim: last.span_dim,
        num_equations: last.num_equations,
        jacobian_rank: last.jacobian_rank,
        verdict: last.verdict,
        trials: attempts.len() as u32,
        max_trials: cfg.trials,
        attempts,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

fn run_trial(query: &TangencyQuery, attempt: u32) -> Result<TrialRecord> {
    let started = Instant::now();
    let shape = &query.shape;
    let n = shape.variety_dim();
    let seed = derive_seed(query.config.seed, &[u64::from(attempt)]);
    let mut rng = rng_from_seed(seed);
    let field = random_prime(query.config.prime_bits, &mut rng)?;
    let points = sample_points(shape, field, query.k as usize, &mut rng);
    let frames = terracini_matrix(&points)?;
    let frame_rows = frames.rows() as u64;

    let target = query.target_dim();
    let padding = target + 1 - frame_rows;
    let (terracini_rank, echelon) = if padding == 0 {
        let echelon = frames.into_echelon();
        (echelon.rank() as u64, echelon)
    } else {
        let terracini_rank = frames.rank() as u64;
        let mut stacked = frames;
        let cols = stacked.cols();
        let mut row = vec![0u64; cols];
        for _ in 0..padding {
            row.iter_mut()
                .for_each(|x| *x = field.random_element(&mut rng));
            stacked.push_row(&row);
        }
        (terracini_rank, stacked.into_echelon())
    };
    let span_rank = echelon.rank() as u64;
    let equations = echelon.nullspace();
    drop(echelon);
    let num_equations = equations.rows() as u64;
    if num_equations == 0 {
        return Err(Error::PreconditionViolation(
            "the span fills the ambient space; there are no equations".into(),
        ));
    }

    let jacobian = contact_jacobian(&points[0], &equations)?;
    let jacobian_rank = jacobian.rank() as u64;
    let certified = jacobian_rank == n && terracini_rank == frame_rows && span_rank == target + 1;
    Ok(TrialRecord {
        attempt,
        seed,
        prime: field.modulus(),
        terracini_rank,
        span_dim: span_rank - 1,
        num_equations,
        jacobian_rank,
        verdict: if certified {
            TangencyVerdict::Certified
        } else {
            TangencyVerdict::Inconclusive
        },
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

/// Jacobian of the contact locus at `point`: one `n x n` block of mixed
/// second derivatives per equation, stacked to `(#equations * n) x n`.
pub fn contact_jacobian(
    point: &AffinePoint,
    equations: &PrimeFieldMatrix,
) -> Result<PrimeFieldMatrix> {
    let n = point.shape().variety_dim() as usize;
    let mut stack = PrimeFieldMatrix::with_row_capacity(point.field(), n, equations.rows() * n);
    for e in 0..equations.rows() {
        let block = mixed_second_contraction(point, equations.row(e))?;
        stack.append_rows(&block)?;
    }
    Ok(stack)
}

/// Expected versus measured dimension of the `k`-th secant variety.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecantDimension {
    pub shape: Vec<u32>,
    pub k: u64,
    pub expected: u64,
    pub actual: u64,
    pub defect: u64,
    pub prime: u64,
    pub seed: u64,
}

/// Projective dimension of the span of `k` general tangent spaces, which by
/// Terracini's lemma is the dimension of the secant variety. The measured
/// value is the largest over the configured trials.
pub fn secant_dimension(
    shape: &SegreShape,
    k: u64,
    config: &CheckConfig,
) -> Result<SecantDimension> {
    config.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let expected = shape.expected_secant_dim(k);
    let mut best: Option<(u64, u64)> = None;
    for attempt in 0..config.trials {
        let seed = derive_seed(config.seed, &[u64::from(attempt)]);
        let mut rng = rng_from_seed(seed);
        let field = random_prime(config.prime_bits, &mut rng)?;
        let points = sample_points(shape, field, k as usize, &mut rng);
        let rank = terracini_matrix(&points)?.into_echelon().rank() as u64;
        if best.is_none_or(|(r, _)| rank > r) {
            best = Some((rank, field.modulus()));
        }
        if rank == expected + 1 {
            break;
        }
    }
    let (rank, prime) = best.expect("at least one trial");
    let actual = rank - 1;
    Ok(SecantDimension {
        shape: shape.dims().to_vec(),
        k,
        expected,
        actual,
        defect: expected - actual,
        prime,
        seed: config.seed,
    })
}

/// Maps a tangent-span check onto an identifiability verdict. The method is
/// one-sided: failure yields `Unknown`, never `NotIdentifiable`.
pub fn identifiability_numeric(
    shape: &SegreShape,
    k: u64,
    config: &CheckConfig,
) -> Result<Verdict> {
    let report = tangency_check(&TangencyQuery::tangent_span(shape.canonical(), k, *config))?;
    Ok(if report.certified() {
        Verdict::identifiable(
            Rule::NumericCertificate,
            Some(Witness::Numeric(Box::new(report))),
        )
    } else {
        Verdict::unknown(
            Rule::NumericInconclusive,
            Some(Witness::Numeric(Box::new(report))),
        )
    })
}

/// A fresh master seed from the operating system, for runs without one.
pub fn fresh_seed() -> u64 {
    rand::thread_rng().gen()
}
