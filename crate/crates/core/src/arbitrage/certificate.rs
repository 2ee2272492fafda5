use serde::{Deserialize, Serialize};

use super::{ArbitrageError, Thresholds};
use crate::measure::{reweight, ProportionEstimate, WeightedExpectation};
use crate::numerics::stats::pairwise_sum;
use crate::paths::{ito_integral_masked, GainsProcess, GridProcess, PathBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertificateKind {
    IncreasingProfit,
    StrongArbitrage,
    ArbitrageOpportunity,
    FirstKind,
}

/// Measure under which a certificate or verdict was evaluated. `Q` means the
/// sample was drawn under `P` and weighted by `Z_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureLabel {
    P,
    Q,
}

/// One rung of the first-kind capital ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderCheck {
    pub v: f64,
    /// `min_{p,t} (v + G^v_t)`; admissibility needs this `>= -tol`.
    pub min_wealth: f64,
    /// `min_p (v + G^v_T - xi)`; super-replication needs this `>= -tol`.
    pub min_surplus: f64,
    pub holds: bool,
}

/// Gains summary of a certificate strategy under the relevant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateStats {
    /// Paths with positive weight, i.e. the paths that were read.
    pub checked_paths: usize,
    pub ignored_paths: usize,
    pub terminal_gain: WeightedExpectation,
    pub terminal_min: f64,
    pub terminal_max: f64,
    /// Standard deviation of `G_T` under the weighted measure.
    pub terminal_sd: f64,
    pub positive: ProportionEstimate,
    /// Smallest per-step increment relative to `max(1, max |G|)` on its path.
    pub min_relative_increment: f64,
    pub monotonicity_violations: usize,
    pub min_gain: f64,
    pub admissibility_level: Option<f64>,
    pub terminal_violations: usize,
    /// Weighted measure of the paths with `G_T < -tol`.
    pub violation_mass: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ladder: Vec<LadderCheck>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub claim_positive: Option<ProportionEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub measure: MeasureLabel,
    /// How the strategy was built, e.g. `"H = nu"`.
    pub strategy: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub claim: Option<String>,
    pub stats: CertificateStats,
    verified: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

impl Certificate {
    pub fn verified(&self) -> bool {
        self.verified
    }
}

/// Streaming verifier: feed gains chunk by chunk, then [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct CertificateCheck {
    kind: CertificateKind,
    measure: MeasureLabel,
    strategy: String,
    claim: Option<String>,
    th: Thresholds,
    admissibility_level: Option<f64>,
    terminal: Vec<f64>,
    weights: Vec<f64>,
    positive: usize,
    checked: usize,
    min_rel_inc: f64,
    mono_violations: usize,
    min_gain: f64,
    term_violations: usize,
    violation_weight: f64,
    ladder: Vec<LadderCheck>,
    claim_positive: usize,
    claim_min: f64,
}

impl CertificateCheck {
    pub fn new(kind: CertificateKind, measure: MeasureLabel, strategy: impl Into<String>, th: &Thresholds) -> Self {
        let ladder = if kind == CertificateKind::FirstKind {
            th.v_ladder
                .iter()
                .map(|&v| LadderCheck {
                    v,
                    min_wealth: f64::INFINITY,
                    min_surplus: f64::INFINITY,
                    holds: false,
                })
                .collect()
        } else {
            vec![]
        };
        Self {
            kind,
            measure,
            strategy: strategy.into(),
            claim: None,
            th: th.clone(),
            admissibility_level: match kind {
                CertificateKind::StrongArbitrage => Some(0.0),
                _ => None,
            },
            terminal: vec![],
            weights: vec![],
            positive: 0,
            checked: 0,
            min_rel_inc: f64::INFINITY,
            mono_violations: 0,
            min_gain: f64::INFINITY,
            term_violations: 0,
            violation_weight: 0.0,
            ladder,
            claim_positive: 0,
            claim_min: f64::INFINITY,
        }
    }

    /// Lower bound `-a` required of the gains for an arbitrage opportunity;
    /// without it any sample-bounded strategy counts as admissible.
    pub fn with_admissibility(mut self, a: f64) -> Self {
        self.admissibility_level = Some(a);
        self
    }

    pub fn with_claim(mut self, label: impl Into<String>) -> Self {
        self.claim = Some(label.into());
        self
    }

    fn weight(weights: Option<&[f64]>, p: usize) -> f64 {
        weights.map_or(1.0, |w| w[p])
    }

    fn check_weights(n: usize, weights: Option<&[f64]>) -> Result<(), ArbitrageError> {
        match weights {
            Some(w) if w.len() != n => Err(ArbitrageError::Shape(format!(
                "{} weights for {} paths",
                w.len(),
                n
            ))),
            Some(w) if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) => {
                Err(ArbitrageError::Shape("weights must be finite and non-negative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Adds the gains of one chunk. Paths with zero weight are not read.
    pub fn add(&mut self, gains: &GainsProcess, weights: Option<&[f64]>) -> Result<(), ArbitrageError> {
        let n = gains.n_paths();
        Self::check_weights(n, weights)?;
        let tol = self.th.tol_admissible;
        for p in 0..n {
            let w = Self::weight(weights, p);
            if w == 0.0 {
                self.terminal.push(0.0);
                self.weights.push(0.0);
                continue;
            }
            let g = gains.path(p);
            let gt = *g.last().unwrap_or(&0.0);
            let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for s in g.windows(2) {
                let rel = (s[1] - s[0]) / scale;
                self.min_rel_inc = self.min_rel_inc.min(rel);
                if rel < -self.th.tol_mono {
                    self.mono_violations += 1;
                }
            }
            self.min_gain = g.iter().cloned().fold(self.min_gain, f64::min);
            if gt < -tol {
                self.term_violations += 1;
                self.violation_weight += w;
            }
            if gt > self.th.eps_pos {
                self.positive += 1;
            }
            self.checked += 1;
            self.terminal.push(gt);
            self.weights.push(w);
        }
        Ok(())
    }

    /// Adds one chunk for a first-kind family: `family[k]` are the gains of
    /// `H^v` for `v = v_ladder[k]` (a single entry is reused for every `v`),
    /// `claim` is `xi` per path. The family's first member also feeds the
    /// generic gains statistics.
    pub fn add_first_kind(
        &mut self,
        family: &[&GainsProcess],
        claim: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<(), ArbitrageError> {
        if self.kind != CertificateKind::FirstKind {
            return Err(ArbitrageError::Shape("not a first-kind check".into()));
        }
        let Some(first) = family.first() else {
            return Err(ArbitrageError::Shape("empty strategy family".into()));
        };
        if family.len() != 1 && family.len() != self.ladder.len() {
            return Err(ArbitrageError::Shape(format!(
                "{} strategies for {} capital levels",
                family.len(),
                self.ladder.len()
            )));
        }
        let n = first.n_paths();
        if claim.len() != n || family.iter().any(|g| g.n_paths() != n) {
            return Err(ArbitrageError::Shape("claim or family path counts differ".into()));
        }
        Self::check_weights(n, weights)?;
        for (k, rung) in self.ladder.iter_mut().enumerate() {
            let g = family[if family.len() == 1 { 0 } else { k }];
            for p in 0..n {
                if Self::weight(weights, p) == 0.0 {
                    continue;
                }
                let path = g.path(p);
                let lowest = path.iter().cloned().fold(f64::INFINITY, f64::min);
                rung.min_wealth = rung.min_wealth.min(rung.v + lowest);
                let gt = *path.last().unwrap_or(&0.0);
                rung.min_surplus = rung.min_surplus.min(rung.v + gt - claim[p]);
            }
        }
        for p in 0..n {
            if Self::weight(weights, p) > 0.0 {
                self.claim_min = self.claim_min.min(claim[p]);
                if claim[p] > self.th.eps_pos {
                    self.claim_positive += 1;
                }
            }
        }
        self.add(first, weights)
    }

    /// Applies the verification rules of the certificate kind.
    pub fn finish(mut self) -> Result<Certificate, ArbitrageError> {
        let th = &self.th;
        let tol = th.tol_admissible;
        let total = self.terminal.len();
        let positive = ProportionEstimate::from_counts(self.positive, self.checked);
        let terminal_gain = reweight(&self.terminal, &self.weights)?;
        let checked_terms: Vec<f64> = self
            .terminal
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(g, _)| *g)
            .collect();
        let terminal_min = checked_terms.iter().cloned().fold(f64::INFINITY, f64::min);
        let terminal_max = checked_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sw = pairwise_sum(&self.weights);
        let terminal_sd = if sw > 0.0 {
            let mean = pairwise_sum(&self.terminal.iter().zip(&self.weights).map(|(g, w)| g * w).collect::<Vec<_>>()) / sw;
            let var = pairwise_sum(
                &self
                    .terminal
                    .iter()
                    .zip(&self.weights)
                    .map(|(g, w)| w * (g - mean) * (g - mean))
                    .collect::<Vec<_>>(),
            ) / sw;
            var.max(0.0).sqrt()
        } else {
            0.0
        };
        let violation_mass = if total > 0 { self.violation_weight / total as f64 } else { 0.0 };
        let positivity = self.checked > 0 && positive.lower > th.min_positive_fraction && positive.successes > 0;

        let min_gain = if self.checked > 0 { self.min_gain } else { 0.0 };
        let admissible = self.admissibility_level.map_or(true, |a| min_gain >= -a - tol);
        let claim_positive = (self.kind == CertificateKind::FirstKind)
            .then(|| ProportionEstimate::from_counts(self.claim_positive, self.checked));

        let failure = if self.checked == 0 {
            Some("no path carries positive weight".to_string())
        } else {
            match self.kind {
                CertificateKind::IncreasingProfit => {
                    if self.mono_violations > 0 {
                        Some(format!("gains decrease on {} steps", self.mono_violations))
                    } else if !positivity {
                        Some("terminal gains are not positive with positive probability".into())
                    } else {
                        None
                    }
                }
                CertificateKind::StrongArbitrage => {
                    if !admissible {
                        Some(format!("not 0-admissible: min gain {min_gain}"))
                    } else if self.term_violations > 0 {
                        Some(format!("terminal gain negative on {} paths", self.term_violations))
                    } else if !positivity {
                        Some("terminal gains are not positive with positive probability".into())
                    } else {
                        None
                    }
                }
                CertificateKind::ArbitrageOpportunity => {
                    if !admissible {
                        Some(format!("not admissible: min gain {min_gain}"))
                    } else if violation_mass > th.max_violation_mass || (th.max_violation_mass == 0.0 && self.term_violations > 0) {
                        Some(format!(
                            "terminal gain negative on {} paths (mass {violation_mass})",
                            self.term_violations
                        ))
                    } else if !positivity {
                        Some("terminal gains are not positive with positive probability".into())
                    } else {
                        None
                    }
                }
                CertificateKind::FirstKind => {
                    for rung in &mut self.ladder {
                        rung.holds = rung.min_wealth >= -tol && rung.min_surplus >= -tol;
                    }
                    let claim_ok = claim_positive.is_some_and(|c| c.successes > 0 && c.lower > th.min_positive_fraction);
                    if self.claim_min < -tol {
                        Some(format!("claim is negative (min {})", self.claim_min))
                    } else if let Some(r) = self.ladder.iter().find(|r| !r.holds) {
                        Some(format!("capital level {} fails admissibility or super-replication", r.v))
                    } else if !claim_ok {
                        Some("claim is not positive with positive probability".into())
                    } else {
                        None
                    }
                }
            }
        };

        Ok(Certificate {
            kind: self.kind,
            measure: self.measure,
            strategy: self.strategy,
            claim: self.claim,
            stats: CertificateStats {
                checked_paths: self.checked,
                ignored_paths: total - self.checked,
                terminal_gain,
                terminal_min: if self.checked > 0 { terminal_min } else { 0.0 },
                terminal_max: if self.checked > 0 { terminal_max } else { 0.0 },
                terminal_sd,
                positive,
                min_relative_increment: if self.checked > 0 { self.min_rel_inc } else { 0.0 },
                monotonicity_violations: self.mono_violations,
                min_gain,
                admissibility_level: self.admissibility_level,
                terminal_violations: self.term_violations,
                violation_mass,
                ladder: self.ladder,
                claim_positive,
            },
            verified: failure.is_none(),
            failure,
        })
    }
}

/// Integrates `h` against `s` (skipping zero-weight paths) and verifies the
/// result as a certificate of `kind`. First-kind certificates use `h` for
/// every capital level with claim `xi = G_T(h)`.
pub fn verify_certificate(
    kind: CertificateKind,
    strategy: impl Into<String>,
    h: &GridProcess,
    s: &PathBundle,
    weights: Option<&[f64]>,
    th: &Thresholds,
) -> Result<Certificate, ArbitrageError> {
    let mask: Option<Vec<bool>> = weights.map(|w| w.iter().map(|x| *x > 0.0).collect());
    if let Some(m) = &mask {
        if m.len() != s.n_paths() {
            return Err(ArbitrageError::Shape(format!("{} weights for {} paths", m.len(), s.n_paths())));
        }
    }
    let gains = ito_integral_masked(h, s, mask.as_deref())?;
    let measure = if weights.is_some() { MeasureLabel::Q } else { MeasureLabel::P };
    let mut check = CertificateCheck::new(kind, measure, strategy, th);
    if kind == CertificateKind::FirstKind {
        let claim = gains.terminals();
        check = check.with_claim("xi = G_T(H)");
        check.add_first_kind(&[&gains], &claim, weights)?;
    } else {
        check.add(&gains, weights)?;
    }
    check.finish()
}
