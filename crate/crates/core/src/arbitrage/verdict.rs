use serde::{Deserialize, Serialize};

use super::{
    ArbitrageError, Certificate, CertificateCheck, CertificateKind, MeasureLabel, Thresholds, TradeoffSummary,
};
use crate::measure::Decomposition;
use crate::numerics::compensated::NeumaierSum;
use crate::par;
use crate::paths::{ito_integral_masked, GainsProcess, PathBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Nip,
    Nsa,
    Na1,
    Na,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Nip => "nip",
            Condition::Nsa => "nsa",
            Condition::Na1 => "na1",
            Condition::Na => "na",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nip" => Some(Condition::Nip),
            "nsa" => Some(Condition::Nsa),
            "na1" => Some(Condition::Na1),
            "na" => Some(Condition::Na),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictState {
    HoldsNumerically,
    FailsWithCertificate,
    Inconclusive,
}

/// Size of the singular drift part `nu`, pathwise `sum |nu| dB` against the
/// drift mass `sum |a| dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuEvidence {
    pub checked_paths: usize,
    pub max_nu_mass: f64,
    pub max_drift_mass: f64,
    /// Largest per-path ratio of `nu` mass to drift mass.
    pub max_relative_nu_mass: f64,
    /// Paths on which the relative `nu` mass exceeds `tol_nu`.
    pub paths_with_nu: usize,
}

impl NuEvidence {
    pub fn empty() -> Self {
        Self {
            checked_paths: 0,
            max_nu_mass: 0.0,
            max_drift_mass: 0.0,
            max_relative_nu_mass: 0.0,
            paths_with_nu: 0,
        }
    }

    pub fn from_decomposition(dec: &Decomposition, tol_nu: f64) -> Self {
        let n = dec.steps();
        let per_path = par::map_indexed(dec.n_paths(), |p| {
            if !dec.mask[p] {
                return None;
            }
            let (mut nu_mass, mut drift_mass) = (NeumaierSum::new(), NeumaierSum::new());
            for i in 0..n {
                let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                nu_mass.add(norm(dec.nu.get(p, i)) * dec.db[i]);
                drift_mass.add(norm(dec.drift.get(p, i)) * dec.db[i]);
            }
            Some((nu_mass.value(), drift_mass.value()))
        });
        let mut ev = Self::empty();
        for (nu, drift) in per_path.into_iter().flatten() {
            let rel = if nu == 0.0 { 0.0 } else { nu / drift.max(f64::MIN_POSITIVE) };
            ev.checked_paths += 1;
            ev.max_nu_mass = ev.max_nu_mass.max(nu);
            ev.max_drift_mass = ev.max_drift_mass.max(drift);
            ev.max_relative_nu_mass = ev.max_relative_nu_mass.max(rel);
            if rel > tol_nu {
                ev.paths_with_nu += 1;
            }
        }
        ev
    }

    pub fn merge(&mut self, other: &Self) {
        self.checked_paths += other.checked_paths;
        self.max_nu_mass = self.max_nu_mass.max(other.max_nu_mass);
        self.max_drift_mass = self.max_drift_mass.max(other.max_drift_mass);
        self.max_relative_nu_mass = self.max_relative_nu_mass.max(other.max_relative_nu_mass);
        self.paths_with_nu += other.paths_with_nu;
    }

    pub fn vanishes(&self, th: &Thresholds) -> bool {
        self.max_relative_nu_mass <= th.tol_nu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evidence {
    pub thresholds: Thresholds,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<NuEvidence>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tradeoff: Option<TradeoffSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate_kind: Option<CertificateKind>,
    /// Set when the verdict follows from a weaker condition failing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inherited_from: Option<Condition>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub condition: Condition,
    pub state: VerdictState,
    pub measure: MeasureLabel,
    pub evidence: Evidence,
    /// Attached whenever `state` is `FailsWithCertificate` (and then
    /// verified); an unverified attempt may be attached otherwise.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<Certificate>,
}

impl Verdict {
    fn new(condition: Condition, state: VerdictState, measure: MeasureLabel, evidence: Evidence) -> Self {
        Self {
            condition,
            state,
            measure,
            evidence,
            certificate: None,
        }
    }

    fn with_certificate(mut self, cert: Option<Certificate>) -> Self {
        if let Some(c) = &cert {
            self.evidence.certificate_kind = Some(c.kind);
        }
        self.certificate = cert;
        self
    }

    fn failed(&self) -> bool {
        self.state == VerdictState::FailsWithCertificate
    }

    fn inherit(&self, condition: Condition, mut evidence: Evidence) -> Self {
        evidence.inherited_from = Some(self.condition);
        evidence.note = format!("{} fails, which implies {} fails", self.condition.name(), condition.name());
        Verdict::new(condition, VerdictState::FailsWithCertificate, self.measure, evidence)
            .with_certificate(self.certificate.clone())
    }
}

fn evidence(th: &Thresholds) -> Evidence {
    Evidence {
        thresholds: th.clone(),
        nu: None,
        tradeoff: None,
        certificate_kind: None,
        inherited_from: None,
        note: String::new(),
    }
}

/// `H = nu` as an increasing-profit certificate for one bundle.
pub fn nip_certificate(
    dec: &Decomposition,
    s: &PathBundle,
    weights: Option<&[f64]>,
    th: &Thresholds,
) -> Result<Certificate, ArbitrageError> {
    let ev = NuEvidence::from_decomposition(dec, th.tol_nu);
    if ev.vanishes(th) {
        return Err(ArbitrageError::Precondition("nu vanishes on every path".into()));
    }
    let gains = nu_gains(dec, s)?;
    let measure = if weights.is_some() { MeasureLabel::Q } else { MeasureLabel::P };
    let mut check = CertificateCheck::new(CertificateKind::IncreasingProfit, measure, "H = nu", th);
    check.add(&gains, weights)?;
    check.finish()
}

/// Gains of `H = nu` on the decomposition's charged paths.
pub fn nu_gains(dec: &Decomposition, s: &PathBundle) -> Result<GainsProcess, ArbitrageError> {
    Ok(ito_integral_masked(&dec.nu, s, Some(&dec.mask))?)
}

/// No increasing profit holds iff `nu = 0`; otherwise the supplied
/// certificate (normally `H = nu`) must verify.
pub fn check_nip(nu: &NuEvidence, cert: Option<Certificate>, measure: MeasureLabel, th: &Thresholds) -> Verdict {
    let mut ev = evidence(th);
    ev.nu = Some(nu.clone());
    if nu.vanishes(th) {
        ev.note = "nu vanishes within tolerance".into();
        return Verdict::new(Condition::Nip, VerdictState::HoldsNumerically, measure, ev);
    }
    match cert {
        Some(c) if c.verified() && c.kind == CertificateKind::IncreasingProfit => {
            ev.note = "nu is non-zero and H = nu is an increasing profit".into();
            Verdict::new(Condition::Nip, VerdictState::FailsWithCertificate, measure, ev).with_certificate(Some(c))
        }
        other => {
            ev.note = "nu is non-zero but no increasing profit verified".into();
            Verdict::new(Condition::Nip, VerdictState::Inconclusive, measure, ev).with_certificate(other)
        }
    }
}

/// No strong arbitrage: `nu = 0` and no interval on which the trade-off
/// diverges under refinement.
pub fn check_nsa(tradeoff: &TradeoffSummary, nip: &Verdict, th: &Thresholds) -> Verdict {
    let mut ev = evidence(th);
    ev.tradeoff = Some(tradeoff.clone());
    ev.nu = nip.evidence.nu.clone();
    if nip.failed() {
        return nip.inherit(Condition::Nsa, ev);
    }
    let state = if nip.state == VerdictState::HoldsNumerically && tradeoff.refined && tradeoff.finite_sigma_paths == 0 {
        ev.note = "nu vanishes and no trade-off increment diverges under refinement".into();
        VerdictState::HoldsNumerically
    } else if !tradeoff.refined {
        ev.note = "no refinement comparison available".into();
        VerdictState::Inconclusive
    } else {
        ev.note = format!(
            "{} paths show a diverging trade-off increment or nu does not vanish",
            tradeoff.finite_sigma_paths
        );
        VerdictState::Inconclusive
    };
    Verdict::new(Condition::Nsa, state, nip.measure, ev)
}

/// No arbitrage of the first kind: `nu = 0` and a finite trade-off. Fails
/// on a verified first-kind certificate or when no increasing profit fails.
pub fn check_na1(
    tradeoff: &TradeoffSummary,
    nip: &Verdict,
    first_kind: Option<Certificate>,
    th: &Thresholds,
) -> Verdict {
    let mut ev = evidence(th);
    ev.tradeoff = Some(tradeoff.clone());
    ev.nu = nip.evidence.nu.clone();
    match first_kind {
        Some(c) if c.verified() && c.kind == CertificateKind::FirstKind => {
            ev.note = "claim super-replicated from every capital on the ladder".into();
            return Verdict::new(Condition::Na1, VerdictState::FailsWithCertificate, nip.measure, ev)
                .with_certificate(Some(c));
        }
        _ => {}
    }
    if nip.failed() {
        return nip.inherit(Condition::Na1, ev);
    }
    let state = if nip.state == VerdictState::HoldsNumerically && tradeoff.refined && tradeoff.divergent_paths == 0 {
        ev.note = "nu vanishes and the terminal trade-off is stable under refinement".into();
        VerdictState::HoldsNumerically
    } else if !tradeoff.refined {
        ev.note = "no refinement comparison available".into();
        VerdictState::Inconclusive
    } else {
        ev.note = format!(
            "{} paths flag a diverging terminal trade-off or nu does not vanish",
            tradeoff.divergent_paths
        );
        VerdictState::Inconclusive
    };
    Verdict::new(Condition::Na1, state, nip.measure, ev)
}

/// No arbitrage is only ever refuted, by an arbitrage opportunity or by a
/// weaker condition failing; it is otherwise inconclusive.
pub fn check_na(nip: &Verdict, opportunity: Option<Certificate>, th: &Thresholds) -> Verdict {
    let mut ev = evidence(th);
    ev.nu = nip.evidence.nu.clone();
    match opportunity {
        Some(c) if c.verified() => {
            ev.note = format!("{:?} certificate verified", c.kind);
            return Verdict::new(Condition::Na, VerdictState::FailsWithCertificate, nip.measure, ev)
                .with_certificate(Some(c));
        }
        _ => {}
    }
    if nip.failed() {
        return nip.inherit(Condition::Na, ev);
    }
    ev.note = "no arbitrage opportunity verified".into();
    Verdict::new(Condition::Na, VerdictState::Inconclusive, nip.measure, ev)
}
