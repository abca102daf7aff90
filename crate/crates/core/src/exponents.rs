//! Exact classification of `(p, q)` and the exponent bookkeeping behind the
//! singularity estimates.
//!
//! Everything here is rational arithmetic except [`k_threshold`] and
//! [`tangency_admissible`], whose inputs (the barrier constant) are
//! empirical reals.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, format_rational, int, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("N must be at least 3 (got {0})")]
    DimensionTooSmall(u32),
    #[error("alpha must lie in (0, N) (got alpha = {alpha}, N = {n})")]
    AlphaOutOfRange { alpha: String, n: u32 },
    #[error("p must be positive (got {0})")]
    NonPositiveP(String),
    #[error("q must be at least 1 (got {0})")]
    QBelowOne(String),
    #[error("exponents are supercritical ({0}); no singular solution with k > 0 exists")]
    Supercritical(String),
    #[error("p + q must exceed 1 (got {0})")]
    SumNotAboveOne(f64),
    #[error("barrier constant must be positive (got {0})")]
    NonPositiveConstant(f64),
    #[error("tau must lie in (0, {limit}) (got {tau})")]
    TauOutOfRange { tau: String, limit: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("t_1 is undefined for this case ({0:?})")]
    UndefinedT1(BootstrapCase),
    #[error("s_1 = {s1} is not admissible: {violated}")]
    InadmissibleS1 { s1: String, violated: String },
    #[error("recursion did not terminate within {0} steps")]
    NoTermination(usize),
}

/// The tuple `(N, alpha, p, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemExponents {
    #[serde(rename = "N")]
    n: u32,
    #[serde(with = "rational")]
    alpha: Rational,
    #[serde(with = "rational")]
    p: Rational,
    #[serde(with = "rational")]
    q: Rational,
}

impl ProblemExponents {
    pub fn new(n: u32, alpha: Rational, p: Rational, q: Rational) -> Result<Self, ExponentError> {
        if n < 3 {
            return Err(ExponentError::DimensionTooSmall(n));
        }
        if !alpha.is_positive() || alpha >= int(n as i64) {
            return Err(ExponentError::AlphaOutOfRange {
                alpha: format_rational(&alpha),
                n,
            });
        }
        if !p.is_positive() {
            return Err(ExponentError::NonPositiveP(format_rational(&p)));
        }
        if q < Rational::one() {
            return Err(ExponentError::QBelowOne(format_rational(&q)));
        }
        Ok(Self { n, alpha, p, q })
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }
    pub fn p(&self) -> &Rational {
        &self.p
    }
    pub fn q(&self) -> &Rational {
        &self.q
    }
    pub fn n_rat(&self) -> Rational {
        int(self.n as i64)
    }
    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }
    pub fn alpha_f64(&self) -> f64 {
        to_f64(&self.alpha)
    }
    pub fn p_f64(&self) -> f64 {
        to_f64(&self.p)
    }
    pub fn q_f64(&self) -> f64 {
        to_f64(&self.q)
    }
}

impl fmt::Display for ProblemExponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={}, alpha={}, p={}, q={}",
            self.n, self.alpha, self.p, self.q
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalityClass {
    Subcritical,
    Supercritical,
}

/// Which non-strict threshold inequality fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    /// `p + q >= (N + alpha)/(N - 2)`
    Sum,
    /// `p >= N/(N - 2)`
    P,
    /// `q >= N/(N - 2)`
    Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(with = "rational")]
    pub sum: Rational,
    #[serde(with = "rational")]
    pub p: Rational,
    #[serde(with = "rational")]
    pub q: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub class: CriticalityClass,
    pub triggers: Vec<Trigger>,
    pub thresholds: Thresholds,
}

impl CriticalityReport {
    pub fn is_subcritical(&self) -> bool {
        self.class == CriticalityClass::Subcritical
    }

    pub fn trigger_summary(&self) -> String {
        let t = &self.thresholds;
        self.triggers
            .iter()
            .map(|tr| match tr {
                Trigger::Sum => format!("p + q >= (N+alpha)/(N-2) = {}", t.sum),
                Trigger::P => format!("p >= N/(N-2) = {}", t.p),
                Trigger::Q => format!("q >= N/(N-2) = {}", t.q),
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn classify(e: &ProblemExponents) -> CriticalityReport {
    let n = e.n_rat();
    let nm2 = &n - int(2);
    let thresholds = Thresholds {
        sum: (&n + &e.alpha) / &nm2,
        p: &n / &nm2,
        q: &n / &nm2,
    };
    let mut triggers = Vec::new();
    if &e.p + &e.q >= thresholds.sum {
        triggers.push(Trigger::Sum);
    }
    if e.p >= thresholds.p {
        triggers.push(Trigger::P);
    }
    if e.q >= thresholds.q {
        triggers.push(Trigger::Q);
    }
    let class = if triggers.is_empty() {
        CriticalityClass::Subcritical
    } else {
        CriticalityClass::Supercritical
    };
    CriticalityReport {
        class,
        triggers,
        thresholds,
    }
}

fn require_subcritical(e: &ProblemExponents) -> Result<(), ExponentError> {
    let report = classify(e);
    if report.is_subcritical() {
        Ok(())
    } else {
        Err(ExponentError::Supercritical(report.trigger_summary()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KThreshold {
    pub k_q: f64,
    pub t_q: f64,
}

/// Largest `k` for which the barrier fixed-point inequality has a solution,
/// together with the tangency abscissa `t_q`.
pub fn k_threshold(c: f64, p: f64, q: f64) -> Result<KThreshold, ExponentError> {
    if !(c > 0.0) {
        return Err(ExponentError::NonPositiveConstant(c));
    }
    let s = p + q;
    if !(s > 1.0) {
        return Err(ExponentError::SumNotAboveOne(s));
    }
    let k_q = (1.0 / (c * s)).powf(1.0 / (s - 1.0)) * (s - 1.0) / s;
    let t_q = (s / (s - 1.0)).powf(s);
    Ok(KThreshold { k_q, t_q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub admissible: bool,
    /// `t_q`, returned only when admissible.
    pub witness: Option<f64>,
}

/// Whether `(c t k^{p+q-1} + 1)^{p+q} <= t` has a solution. Equality at
/// `k = k_q` counts as admissible (relative slack `1e-12`).
pub fn tangency_admissible(c: f64, k: f64, p: f64, q: f64) -> Result<Tangency, ExponentError> {
    if !(c > 0.0) {
        return Err(ExponentError::NonPositiveConstant(c));
    }
    let s = p + q;
    if !(s > 1.0) {
        return Err(ExponentError::SumNotAboveOne(s));
    }
    let lhs = c * k.powf(s - 1.0);
    let rhs = (1.0 / s) * ((s - 1.0) / s).powf(s - 1.0);
    let admissible = lhs <= rhs * (1.0 + 1e-12);
    Ok(Tangency {
        admissible,
        witness: admissible.then(|| (s / (s - 1.0)).powf(s)),
    })
}

/// Upper bound on a singularity at the origin.
///
/// Ordered `Bounded < LogBound < PowerBound(e)`, with power bounds ordered
/// by exponent. Build power bounds with [`SingularityRate::power`], which
/// folds non-positive exponents into `Bounded`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RateRepr", try_from = "RateRepr")]
pub enum SingularityRate {
    Bounded,
    LogBound,
    PowerBound(Rational),
}

#[derive(Serialize, Deserialize)]
struct RateRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<String>,
}

impl From<SingularityRate> for RateRepr {
    fn from(r: SingularityRate) -> Self {
        match r {
            SingularityRate::Bounded => RateRepr { kind: "bounded".into(), exponent: None },
            SingularityRate::LogBound => RateRepr { kind: "log_bound".into(), exponent: None },
            SingularityRate::PowerBound(e) => RateRepr {
                kind: "power_bound".into(),
                exponent: Some(rational::format_rational(&e)),
            },
        }
    }
}

impl TryFrom<RateRepr> for SingularityRate {
    type Error = String;

    fn try_from(r: RateRepr) -> Result<Self, String> {
        match (r.kind.as_str(), r.exponent) {
            ("bounded", _) => Ok(SingularityRate::Bounded),
            ("log_bound", _) => Ok(SingularityRate::LogBound),
            ("power_bound", Some(e)) => rational::parse_rational(&e)
                .map(SingularityRate::PowerBound)
                .map_err(|e| e.to_string()),
            (kind, _) => Err(format!("unknown rate `{kind}`")),
        }
    }
}

impl SingularityRate {
    pub fn power(e: Rational) -> Self {
        if e.is_positive() {
            SingularityRate::PowerBound(e)
        } else {
            SingularityRate::Bounded
        }
    }

    fn rank(&self) -> u8 {
        match self {
            SingularityRate::Bounded => 0,
            SingularityRate::LogBound => 1,
            SingularityRate::PowerBound(_) => 2,
        }
    }

    /// Power exponent, `0` for the bounded and log cases.
    pub fn exponent(&self) -> Rational {
        match self {
            SingularityRate::PowerBound(e) => e.clone(),
            _ => Rational::zero(),
        }
    }
}

impl PartialOrd for SingularityRate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SingularityRate {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (SingularityRate::PowerBound(a), SingularityRate::PowerBound(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for SingularityRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularityRate::Bounded => write!(f, "bounded"),
            SingularityRate::LogBound => write!(f, "-log|x|"),
            SingularityRate::PowerBound(e) => write!(f, "|x|^-({e})"),
        }
    }
}

/// Rate transfer through an operator that gains `order` powers of `|x|`.
fn transfer(rate: &SingularityRate, order: &Rational, n: u32) -> Result<SingularityRate, ExponentError> {
    let tau = match rate {
        SingularityRate::PowerBound(tau) => tau,
        _ => return Ok(SingularityRate::Bounded),
    };
    if tau >= &int(n as i64) {
        return Err(ExponentError::TauOutOfRange {
            tau: format_rational(tau),
            limit: n.to_string(),
        });
    }
    Ok(match tau.cmp(order) {
        Ordering::Greater => SingularityRate::power(tau - order),
        Ordering::Equal => SingularityRate::LogBound,
        Ordering::Less => SingularityRate::Bounded,
    })
}

/// Singularity of `G[V]` for `V <= c|x|^{-tau}` near the origin.
pub fn green_rate(rate: &SingularityRate, n: u32) -> Result<SingularityRate, ExponentError> {
    transfer(rate, &int(2), n)
}

/// Singularity of `I_alpha[V]` for `V <= c|x|^{-tau}` near the origin.
pub fn riesz_rate(rate: &SingularityRate, alpha: &Rational, n: u32) -> Result<SingularityRate, ExponentError> {
    transfer(rate, alpha, n)
}

/// Floating-point mirror of the rate transfer, returning the new origin
/// exponent (`0` for bounded and log branches). Used to annotate numerical
/// profiles whose exponents are not necessarily rational.
pub fn transfer_exponent_f64(tau: f64, order: f64) -> f64 {
    if tau > order + 1e-12 {
        tau - order
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRates {
    /// Bound for `G[(I_alpha[V^p])^t]`.
    pub riesz_power_rate: Result<SingularityRate, ExponentError>,
    /// Bound for `G[(V^q)^t]`.
    pub power_rate: Result<SingularityRate, ExponentError>,
}

/// Rates for the two composite quantities used in the singularity
/// bootstrap, for `V <= c|x|^{-tau}`.
///
/// The shared hypotheses (`p < N/(N-2)`, `1 < q < N/(N-2)`,
/// `0 < tau <= N-2`) fail the whole call; the per-quantity integrability
/// conditions fail only the affected component.
pub fn composite_rates(
    e: &ProblemExponents,
    tau: &Rational,
    t: &Rational,
) -> Result<CompositeRates, ExponentError> {
    let n = e.n_rat();
    let nm2 = &n - int(2);
    let crit = &n / &nm2;
    if e.p >= crit {
        return Err(ExponentError::Precondition(format!(
            "p < N/(N-2) = {crit} fails (p = {})",
            e.p
        )));
    }
    if e.q <= Rational::one() || e.q >= crit {
        return Err(ExponentError::Precondition(format!(
            "q in (1, N/(N-2)) = (1, {crit}) fails (q = {})",
            e.q
        )));
    }
    if !tau.is_positive() || tau > &nm2 {
        return Err(ExponentError::Precondition(format!(
            "tau in (0, N-2] = (0, {nm2}] fails (tau = {tau})"
        )));
    }
    if !t.is_positive() {
        return Err(ExponentError::Precondition(format!("t > 0 fails (t = {t})")));
    }

    let excess = &e.p * tau - &e.alpha;
    let riesz_power_rate = if &excess * t >= n {
        Err(ExponentError::Precondition(format!(
            "(p tau - alpha) t < N fails ({} >= {n})",
            &excess * t
        )))
    } else {
        let threshold = (&e.alpha + int(2) / t) / &e.p;
        Ok(match tau.cmp(&threshold) {
            Ordering::Greater => SingularityRate::power(t * &excess - int(2)),
            Ordering::Equal => SingularityRate::LogBound,
            Ordering::Less => SingularityRate::Bounded,
        })
    };

    let qt = &e.q * t;
    let power_rate = if tau * &qt >= n {
        Err(ExponentError::Precondition(format!(
            "tau q t < N fails ({} >= {n})",
            tau * &qt
        )))
    } else {
        let threshold = int(2) / &qt;
        Ok(match tau.cmp(&threshold) {
            Ordering::Greater => SingularityRate::power(tau * &qt - int(2)),
            Ordering::Equal => SingularityRate::LogBound,
            Ordering::Less => SingularityRate::Bounded,
        })
    };

    Ok(CompositeRates {
        riesz_power_rate,
        power_rate,
    })
}

/// Position of `p` relative to `alpha/(N-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapCase {
    PBelowAlphaCritical,
    PAtAlphaCritical,
    PAboveAlphaCritical,
}

/// Returns `t_1 = ((p+q)(N-2) - alpha)/(p(N-2) - alpha)` when `p(N-2) > alpha`.
pub fn bootstrap_t1(e: &ProblemExponents) -> Result<(Option<Rational>, BootstrapCase), ExponentError> {
    require_subcritical(e)?;
    let nm2 = e.n_rat() - int(2);
    let pn = &e.p * &nm2 - &e.alpha;
    Ok(match pn.cmp(&Rational::zero()) {
        Ordering::Less => (None, BootstrapCase::PBelowAlphaCritical),
        Ordering::Equal => (None, BootstrapCase::PAtAlphaCritical),
        Ordering::Greater => {
            let t1 = ((&e.p + &e.q) * &nm2 - &e.alpha) / pn;
            (Some(t1), BootstrapCase::PAboveAlphaCritical)
        }
    })
}

fn require_t1(e: &ProblemExponents) -> Result<Rational, ExponentError> {
    match bootstrap_t1(e)? {
        (Some(t1), _) => Ok(t1),
        (None, case) => Err(ExponentError::UndefinedT1(case)),
    }
}

/// Admissible window `(1, upper)` for `s_1` together with the default
/// choice, the midpoint of `(1, min(upper, (p+q)N/(2(p+q)+alpha)))`.
pub fn s1_window(e: &ProblemExponents) -> Result<(Rational, Rational), ExponentError> {
    require_t1(e)?;
    let n = e.n_rat();
    let sum = &e.p + &e.q;
    let upper = &n / (&sum * (&n - int(2)) - &e.alpha);
    let cap = &sum * &n / (int(2) * &sum + &e.alpha);
    let default = (Rational::one() + upper.clone().min(cap)) / int(2);
    Ok((upper, default))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum STermination {
    /// Some `s_n > N/2`.
    ExceededHalfDimension,
    /// `p(N - 2 s) - alpha s <= 0`, the Riesz factor is already bounded.
    BoundedBranch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SSequence {
    pub values: Vec<Rational>,
    /// 1-based index `n` of the first `s_n > N/2`.
    pub n1: Option<usize>,
    pub termination: STermination,
}

const MAX_RECURSION: usize = 10_000;

/// Integrability ladder `s_n = N s_{n-1} / ((p+q)(N - 2 s_{n-1}) - alpha s_{n-1})`.
pub fn s_sequence(e: &ProblemExponents, s1: Option<&Rational>) -> Result<SSequence, ExponentError> {
    let (upper, default) = s1_window(e)?;
    let s1 = s1.cloned().unwrap_or(default);
    let n = e.n_rat();
    let sum = &e.p + &e.q;
    let denom = |s: &Rational| &sum * (&n - int(2) * s) - &e.alpha * s;

    if s1 <= Rational::one() {
        return Err(ExponentError::InadmissibleS1 {
            s1: format_rational(&s1),
            violated: "s_1 > 1".into(),
        });
    }
    if s1 >= upper {
        return Err(ExponentError::InadmissibleS1 {
            s1: format_rational(&s1),
            violated: format!("s_1 < N/((p+q)(N-2)-alpha) = {upper}"),
        });
    }
    let d1 = denom(&s1);
    if !d1.is_positive() {
        return Err(ExponentError::InadmissibleS1 {
            s1: format_rational(&s1),
            violated: format!("(p+q)(N-2 s_1) - alpha s_1 > 0 (got {d1})"),
        });
    }

    let half = &n / int(2);
    let mut values = vec![s1];
    for _ in 0..MAX_RECURSION {
        let prev = values.last().unwrap().clone();
        if prev > half {
            return Ok(SSequence {
                n1: Some(values.len()),
                values,
                termination: STermination::ExceededHalfDimension,
            });
        }
        // The sign of p(N - 2s) - alpha s only matters once a further step
        // is needed; the first step from s_1 is always taken.
        let branch = &e.p * (&n - int(2) * &prev) - &e.alpha * &prev;
        let d = denom(&prev);
        if values.len() > 1 && (!branch.is_positive() || !d.is_positive()) {
            return Ok(SSequence {
                values,
                n1: None,
                termination: STermination::BoundedBranch,
            });
        }
        let mut next = &n * &prev / d;
        if next == half {
            // Step back inside the open range and repeat the recursion.
            next = &next - (&next - &prev) / int(100);
        }
        values.push(next);
    }
    Err(ExponentError::NoTermination(MAX_RECURSION))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TSequence {
    pub values: Vec<Rational>,
    /// 0-based index of the first positive term.
    pub n0: usize,
    /// `q t_1/(t_1 - 1)`.
    pub ratio: Rational,
}

/// Singularity offsets `T_0 = 2 - N`, `T_n = 2 + q t_1/(t_1 - 1) T_{n-1}`.
pub fn t_sequence(e: &ProblemExponents) -> Result<TSequence, ExponentError> {
    let t1 = require_t1(e)?;
    let n = e.n_rat();
    let ratio = &e.q * &t1 / (&t1 - Rational::one());
    let t0 = int(2) - &n;
    let first = int(2) + &e.alpha - (&e.p + &e.q) * (&n - int(2));
    debug_assert_eq!(first, int(2) + &ratio * &t0);
    let mut values = vec![t0, first];
    for _ in 0..MAX_RECURSION {
        let last = values.last().unwrap();
        if last.is_positive() {
            let n0 = values.len() - 1;
            return Ok(TSequence { values, n0, ratio });
        }
        let next = int(2) + &ratio * last;
        values.push(next);
    }
    Err(ExponentError::NoTermination(MAX_RECURSION))
}

/// Exact record of the regularity bootstrap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapLedger {
    #[serde(with = "opt_rational")]
    pub t1: Option<Rational>,
    pub case: BootstrapCase,
    #[serde(with = "rational::vec")]
    pub s_seq: Vec<Rational>,
    #[serde(rename = "T_seq", with = "rational::vec")]
    pub t_seq: Vec<Rational>,
    pub n0: Option<usize>,
    pub n1: Option<usize>,
}

mod opt_rational {
    use super::Rational;
    use crate::rational::{format_rational, parse_rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub fn bootstrap_ledger(e: &ProblemExponents, s1: Option<&Rational>) -> Result<BootstrapLedger, ExponentError> {
    let (t1, case) = bootstrap_t1(e)?;
    if case != BootstrapCase::PAboveAlphaCritical {
        return Ok(BootstrapLedger {
            t1,
            case,
            s_seq: Vec::new(),
            t_seq: Vec::new(),
            n0: None,
            n1: None,
        });
    }
    let s = s_sequence(e, s1)?;
    let t = t_sequence(e)?;
    Ok(BootstrapLedger {
        t1,
        case,
        s_seq: s.values,
        t_seq: t.values,
        n0: Some(t.n0),
        n1: s.n1,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityExponent {
    #[serde(with = "rational")]
    pub exponent: Rational,
    pub locally_integrable: bool,
}

/// Exponent `(2-N)(p+q) + alpha` of the lower bound on `I_alpha[u^p]u^q`
/// near the origin; locally integrable iff it exceeds `-N`.
pub fn supercritical_density_exponent(e: &ProblemExponents) -> DensityExponent {
    let n = e.n_rat();
    let exponent = (int(2) - &n) * (&e.p + &e.q) + &e.alpha;
    let locally_integrable = exponent > -n;
    DensityExponent {
        exponent,
        locally_integrable,
    }
}
