//! Closed-form constants of the Lyapunov decay certificate.

use serde::Serialize;

use crate::model::{Gains, PhysicalParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub eps2_bound: f64,
    pub eps1_bound: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub delta: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    #[serde(rename = "T3")]
    pub t3: f64,
    #[serde(rename = "T4")]
    pub t4: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub ratio: f64,
    pub feasible: bool,
    /// First violated condition when not feasible.
    pub reason: Option<String>,
}

/// `C = max_j √(ρ_j/α_j)`.
pub fn constant_c(p: &PhysicalParams) -> f64 {
    (p.rho1 / p.alpha1).sqrt().max((p.rho2 / p.alpha2).sqrt())
}

/// `C1 = 3·max_j (l_j − l_{j−1})·√(ρ_j/α_j)`.
pub fn constant_c1(p: &PhysicalParams) -> f64 {
    3.0 * ((p.l1 - p.l0) * (p.rho1 / p.alpha1).sqrt())
        .max((p.l2 - p.l1) * (p.rho2 / p.alpha2).sqrt())
}

struct Bound {
    name: &'static str,
    value: f64,
}

fn eps2_bounds(p: &PhysicalParams, g: &Gains, c: f64) -> [Bound; 3] {
    [
        Bound { name: "1/(2C)", value: 1.0 / (2.0 * c) },
        Bound { name: "sqrt(alpha2/rho2)", value: (p.alpha2 / p.rho2).sqrt() },
        Bound {
            name: "alpha2*d1/(d1^2+alpha2*rho2)",
            value: p.alpha2 * g.d1 / (g.d1 * g.d1 + p.alpha2 * p.rho2),
        },
    ]
}

fn eps1_bounds(p: &PhysicalParams, g: &Gains, c: f64, eps2: f64) -> [Bound; 4] {
    let mu = p.m + g.b0 * g.b1;
    [
        Bound { name: "1/(2C)", value: 1.0 / (2.0 * c) },
        Bound { name: "sqrt(alpha1/rho1)", value: (p.alpha1 / p.rho1).sqrt() },
        Bound {
            name: "eps2*b0*alpha1/(b0*alpha2+eps2*(m+b0*b1))",
            value: eps2 * g.b0 * p.alpha1 / (g.b0 * p.alpha2 + eps2 * mu),
        },
        Bound { name: "m*b1/(rho1*(m+b0*b1))", value: p.m * g.b1 / (p.rho1 * mu) },
    ]
}

fn tightest(bounds: &[Bound]) -> &Bound {
    bounds
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("bound list is never empty")
}

fn delta_interval(p: &PhysicalParams, g: &Gains, eps1: f64, eps2: f64) -> (f64, f64) {
    let mu = p.m + g.b0 * g.b1;
    let lo = g.b0 * p.alpha1 / (g.b0 * p.alpha2 + mu * eps2);
    let hi = (g.b0 * p.alpha1 - mu * eps1) / (g.b0 * p.alpha2);
    (lo, hi)
}

/// Numerators and denominators of `T1..T4`.
fn horizon_terms(p: &PhysicalParams, g: &Gains, eps1: f64, eps2: f64, delta: f64) -> [(f64, f64); 4] {
    let mu = p.m + g.b0 * g.b1;
    let (a1, a2) = (p.alpha1, p.alpha2);
    let (l1, len2) = (p.l1 - p.l0, p.l2 - p.l1);
    [
        (
            1.5 * a1 * l1 * mu + 2.0 * g.b0 * g.b0 * a1 * a1,
            g.b0 * a1 * a1 - a1 * eps1 * mu - delta * g.b0 * a1 * a2,
        ),
        (
            1.5 * a2 * len2 * mu + 2.0 * g.b0 * g.b0 * a2 * a2,
            g.b0 * a2 * a2 + a2 * eps2 * mu - g.b0 * a1 * a2 / delta,
        ),
        (1.5 * p.rho1 * l1 * mu + p.m * p.m, p.m * g.b1 - eps1 * p.rho1 * mu),
        (
            1.5 * len2 * p.rho2 * a2,
            a2 * g.d1 - eps2 * (g.d1 * g.d1 + a2 * p.rho2),
        ),
    ]
}

fn finish(
    p: &PhysicalParams,
    g: &Gains,
    eps1_bound: f64,
    eps2_bound: f64,
    eps1: f64,
    eps2: f64,
    delta: f64,
    mut reason: Option<String>,
) -> Certificate {
    let c = constant_c(p);
    let c1 = constant_c1(p);
    let eps = eps1.max(eps2);
    let c2 = c1 / (1.0 - 2.0 * eps * c);
    let ratio = (1.0 + 2.0 * eps * c) / (1.0 - 2.0 * eps * c);
    let (delta_lo, delta_hi) = delta_interval(p, g, eps1, eps2);
    let terms = horizon_terms(p, g, eps1, eps2, delta);
    let mut ts = [f64::NAN; 4];
    for (k, (num, den)) in terms.iter().enumerate() {
        ts[k] = num / den;
        if reason.is_none() && !(*den > 0.0) {
            reason = Some(format!("denominator of T{} is not positive ({den})", k + 1));
        }
    }
    let t = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Certificate {
        c,
        c1,
        c2,
        eps2_bound,
        eps1_bound,
        eps1,
        eps2,
        delta_lo,
        delta_hi,
        delta,
        t1: ts[0],
        t2: ts[1],
        t3: ts[2],
        t4: ts[3],
        t,
        ratio,
        feasible: reason.is_none(),
        reason,
    }
}

fn gain_reason(g: &Gains) -> Option<String> {
    for (name, v) in [("b0", g.b0), ("b1", g.b1), ("d1", g.d1)] {
        if !(v > 0.0) {
            return Some(format!("{name} = {v}"));
        }
    }
    None
}

/// Certificate with the default selection: each ε at half its bound
/// (ε2 first, then ε1 using the chosen ε2) and δ at the interval midpoint.
pub fn certificate_constants(p: &PhysicalParams, g: &Gains) -> Certificate {
    let c = constant_c(p);
    let b2 = eps2_bounds(p, g, c);
    let t2 = tightest(&b2);
    let eps2_bound = t2.value;
    let eps2 = 0.5 * eps2_bound;
    let b1 = eps1_bounds(p, g, c, eps2);
    let t1 = tightest(&b1);
    let eps1_bound = t1.value;
    let eps1 = 0.5 * eps1_bound;
    let (lo, hi) = delta_interval(p, g, eps1, eps2);
    let delta = 0.5 * (lo + hi);

    let mut reason = None;
    if !(eps2_bound > 0.0) {
        reason = Some(format!("eps2 bound {} = {}", t2.name, t2.value));
    } else if !(eps1_bound > 0.0) {
        reason = Some(format!("eps1 bound {} = {}", t1.name, t1.value));
    } else if !(lo < hi) {
        reason = Some(format!("delta interval ({lo}, {hi}) is empty"));
    }
    if let (Some(r), Some(gr)) = (reason.as_mut(), gain_reason(g)) {
        r.push_str(&format!(" (gain {gr}; the certificate needs b0, b1, d1 > 0)"));
    }
    finish(p, g, eps1_bound, eps2_bound, eps1, eps2, delta, reason)
}

/// Certificate for user-chosen `(ε1, ε2, δ)`; feasibility is checked against
/// the full condition set, not chosen.
pub fn certificate_with(p: &PhysicalParams, g: &Gains, eps1: f64, eps2: f64, delta: f64) -> Certificate {
    let c = constant_c(p);
    let eps2_bound = tightest(&eps2_bounds(p, g, c)).value;
    let eps1_bound = tightest(&eps1_bounds(p, g, c, eps2)).value;
    let report = check_conditions(p, g, eps1, eps2, delta);
    let reason = gain_reason(g)
        .map(|r| format!("gain {r}; the certificate needs b0, b1, d1 > 0"))
        .or_else(|| {
            report
                .conditions
                .iter()
                .find(|c| !c.passed)
                .map(|c| format!("violated: {}", c.name))
        });
    finish(p, g, eps1_bound, eps2_bound, eps1, eps2, delta, reason)
}

/// `E(t) ≤ (1+2εC)/(1−2εC) · (T+C2)/(t−C2) · E(0)`, asserted for `t > T`.
pub fn decay_bound(cert: &Certificate, e0: f64, t: f64) -> Result<f64> {
    if !cert.feasible {
        return Err(Error::BoundDomain { t, horizon: f64::NAN });
    }
    if !(t > cert.t) {
        return Err(Error::BoundDomain { t, horizon: cert.t });
    }
    Ok(cert.ratio * (cert.t + cert.c2) / (t - cert.c2) * e0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionSet {
    /// Sufficient for `dL/dt ≤ 0`.
    Lemma,
    /// The widened set that also yields `dV/dt ≤ 0` for large `t`.
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub set: ConditionSet,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    /// Every condition of the theorem set holds (this includes the lemma set).
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn lemma_passed(&self) -> bool {
        self.conditions
            .iter()
            .filter(|c| c.set == ConditionSet::Lemma)
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

pub fn check_conditions(p: &PhysicalParams, g: &Gains, eps1: f64, eps2: f64, delta: f64) -> ConditionReport {
    let c = constant_c(p);
    let mut conditions = Vec::new();
    let mut push = |name: String, set: ConditionSet, lhs: f64, rhs: f64, strict: bool| {
        let passed = if strict { lhs < rhs } else { lhs <= rhs };
        conditions.push(Condition { name, set, lhs, rhs, strict, passed });
    };

    for (name, v) in [("b0", g.b0), ("b1", g.b1), ("d1", g.d1), ("eps1", eps1), ("eps2", eps2), ("delta", delta)] {
        push(format!("0 < {name}"), ConditionSet::Lemma, 0.0, v, true);
    }
    for b in eps2_bounds(p, g, c) {
        let set = if b.name.starts_with("sqrt") { ConditionSet::Theorem } else { ConditionSet::Lemma };
        push(format!("eps2 <= {}", b.name), set, eps2, b.value, false);
    }
    for b in eps1_bounds(p, g, c, eps2) {
        let set = if b.name.starts_with("sqrt") { ConditionSet::Theorem } else { ConditionSet::Lemma };
        push(format!("eps1 <= {}", b.name), set, eps1, b.value, false);
    }
    let (lo, hi) = delta_interval(p, g, eps1, eps2);
    push(
        "b0*alpha1/(b0*alpha2+(m+b0*b1)*eps2) < delta".into(),
        ConditionSet::Lemma,
        lo,
        delta,
        true,
    );
    push(
        "delta < (b0*alpha1-(m+b0*b1)*eps1)/(b0*alpha2)".into(),
        ConditionSet::Lemma,
        delta,
        hi,
        true,
    );
    for (k, (_, den)) in horizon_terms(p, g, eps1, eps2, delta).iter().enumerate() {
        push(format!("0 < denominator of T{}", k + 1), ConditionSet::Theorem, 0.0, *den, true);
    }
    ConditionReport { conditions }
}
