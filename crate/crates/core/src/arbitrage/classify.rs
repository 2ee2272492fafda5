use serde::{Deserialize, Serialize};

use super::{
    check_na, check_na1, check_nip, check_nsa, mean_variance_tradeoff, nu_gains, ArbitrageError, CertificateCheck,
    CertificateKind, MeasureLabel, NuEvidence, Thresholds, TradeoffReport, TradeoffSummary, Verdict,
};
use crate::measure::{
    decompose_paths, girsanov, mvt_under_q, BoundCheck, Decomposition, DensityProcess, QDecomposition, ThetaSource,
};
use crate::models::{characteristics, simulate_range, DensitySpec, ModelSpec};
use crate::paths::{GridProcess, PathBundle, TimeGrid};

pub const DEFAULT_CHUNK_SIZE: usize = 512;

/// Everything a classification run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub model: ModelSpec,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    /// `None` classifies under `P`; otherwise under `Q = Z_T . P`.
    pub density: Option<DensitySpec>,
    pub thresholds: Thresholds,
    pub chunk_size: usize,
    /// Fit `theta` by cross-path regression per chunk instead of using the
    /// closed form.
    pub estimate_theta: bool,
}

impl ClassifyConfig {
    pub fn new(model: ModelSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Self {
        Self {
            model,
            grid,
            n_paths,
            seed,
            density: None,
            thresholds: Thresholds::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            estimate_theta: false,
        }
    }

    pub fn under(mut self, density: DensitySpec) -> Self {
        self.density = Some(density);
        self
    }

    pub fn measure(&self) -> MeasureLabel {
        if self.density.is_some() {
            MeasureLabel::Q
        } else {
            MeasureLabel::P
        }
    }
}

/// One chunk of paths on the requested grid plus the same paths on a grid
/// refined or coarsened by two, decomposed under the requested measure.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub bundle: PathBundle,
    pub partner: PathBundle,
    pub decomp_p: Decomposition,
    pub partner_p: Decomposition,
    pub density: Option<DensityProcess>,
    pub q: Option<QDecomposition>,
    pub partner_q: Option<Decomposition>,
}

impl Chunk {
    /// The decomposition under the requested measure.
    pub fn active(&self) -> &Decomposition {
        self.q.as_ref().map_or(&self.decomp_p, |q| &q.decomposition)
    }

    /// Decomposition and partner under `measure`; `None` if the chunk was
    /// prepared without a density and `Q` is asked for.
    pub fn under(&self, measure: MeasureLabel) -> Option<(&Decomposition, &Decomposition)> {
        match measure {
            MeasureLabel::P => Some((&self.decomp_p, &self.partner_p)),
            MeasureLabel::Q => Some((&self.q.as_ref()?.decomposition, self.partner_q.as_ref()?)),
        }
    }

    /// `Z_T` per path under `Q`, `None` under `P`.
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.density.as_ref().map(DensityProcess::terminals)
    }
}

/// Simulates and decomposes paths `first_path .. first_path + n`. With an
/// even step count the partner grid is the coarsening by two (restriction of
/// the same paths); otherwise the paths are simulated on the refinement and
/// restricted to the requested grid.
pub fn prepare_chunk(cfg: &ClassifyConfig, first_path: u64, n: usize) -> Result<Chunk, ArbitrageError> {
    let th = &cfg.thresholds;
    let (bundle, partner) = if cfg.grid.steps() % 2 == 0 {
        let b = simulate_range(&cfg.model, &cfg.grid, first_path, n, cfg.seed)?;
        let coarse = b.restrict(2)?;
        (b, coarse)
    } else {
        let fine = simulate_range(&cfg.model, &cfg.grid.refine(2)?, first_path, n, cfg.seed)?;
        (fine.restrict(2)?, fine)
    };
    let ch = characteristics(&cfg.model);
    let decomp_p = decompose_paths(&ch, &bundle, th.pinv_tol, None)?;
    let partner_p = decompose_paths(&ch, &partner, th.pinv_tol, None)?;
    match &cfg.density {
        None => Ok(Chunk {
            bundle,
            partner,
            decomp_p,
            partner_p,
            density: None,
            q: None,
            partner_q: None,
        }),
        Some(spec) => {
            let z = DensityProcess::from_spec(spec, &cfg.model, &bundle)?;
            let zp = DensityProcess::from_spec(spec, &cfg.model, &partner)?;
            let src = if cfg.estimate_theta {
                ThetaSource::Estimated
            } else {
                ThetaSource::Analytic
            };
            let q = girsanov(&decomp_p, &z, &bundle, &cfg.model, spec, &src, th.pinv_tol)?;
            let qp = girsanov(&partner_p, &zp, &partner, &cfg.model, spec, &src, th.pinv_tol)?;
            Ok(Chunk {
                bundle,
                partner,
                decomp_p,
                partner_p,
                density: Some(z),
                q: Some(q),
                partner_q: Some(qp.decomposition),
            })
        }
    }
}

/// Like [`prepare_chunk`], for a density known only through its sampled
/// values: path `k` of `z` (width one, on the run grid) is the density along
/// path `k` of the run. `theta` is fitted by cross-path regression within the
/// chunk, and a change in jump intensity under `Q` is not modelled. The step
/// count must be even so that the partner density is a restriction of `z`.
pub fn prepare_chunk_with_values(
    cfg: &ClassifyConfig,
    z: &GridProcess,
    first_path: u64,
    n: usize,
) -> Result<Chunk, ArbitrageError> {
    let steps = cfg.grid.steps();
    if z.width() != 1 || z.grid() != &cfg.grid || z.n_paths() < first_path as usize + n {
        return Err(ArbitrageError::Shape(format!(
            "density values must have width 1, the run grid and at least {} paths",
            first_path as usize + n
        )));
    }
    if steps % 2 != 0 {
        return Err(ArbitrageError::Shape(
            "a density given by values needs an even number of steps".into(),
        ));
    }
    let th = &cfg.thresholds;
    let bundle = simulate_range(&cfg.model, &cfg.grid, first_path, n, cfg.seed)?;
    let partner = bundle.restrict(2)?;
    let ch = characteristics(&cfg.model);
    let decomp_p = decompose_paths(&ch, &bundle, th.pinv_tol, None)?;
    let partner_p = decompose_paths(&ch, &partner, th.pinv_tol, None)?;

    let first = first_path as usize;
    let fine: Vec<f64> = (first..first + n).flat_map(|p| z.path(p).iter().copied()).collect();
    let coarse: Vec<f64> = (first..first + n)
        .flat_map(|p| z.path(p).iter().step_by(2).copied())
        .collect();
    let wrap = |grid: &TimeGrid, values: Vec<f64>| -> Result<DensityProcess, ArbitrageError> {
        let gp = GridProcess::from_values(grid.clone(), n, 1, values)?;
        Ok(DensityProcess::new(gp, vec![None; n], vec![None; n])?)
    };
    let zc = wrap(&cfg.grid, fine)?;
    let zp = wrap(partner.grid(), coarse)?;
    let (unit, src) = (DensitySpec::Unit, ThetaSource::Estimated);
    let q = girsanov(&decomp_p, &zc, &bundle, &cfg.model, &unit, &src, th.pinv_tol)?;
    let qp = girsanov(&partner_p, &zp, &partner, &cfg.model, &unit, &src, th.pinv_tol)?;
    Ok(Chunk {
        bundle,
        partner,
        decomp_p,
        partner_p,
        density: Some(zc),
        q: Some(q),
        partner_q: Some(qp.decomposition),
    })
}

/// Splits `0..n_paths` into consecutive chunks.
pub fn chunk_ranges(n_paths: usize, chunk_size: usize) -> impl Iterator<Item = (u64, usize)> {
    let size = chunk_size.max(1);
    (0..n_paths)
        .step_by(size)
        .map(move |start| (start as u64, size.min(n_paths - start)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Classification {
    pub measure: MeasureLabel,
    /// NIP, NSA, NA1 and NA, in that order.
    pub verdicts: Vec<Verdict>,
    pub nu: NuEvidence,
    pub tradeoff: TradeoffSummary,
    /// Pathwise bound of the `Q` trade-off by the `P` trade-off and the
    /// density; only under `Q`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tradeoff_bound: Option<BoundCheck>,
    pub weighted_paths: usize,
}

impl Classification {
    pub fn verdict(&self, c: super::Condition) -> &Verdict {
        self.verdicts
            .iter()
            .find(|v| v.condition == c)
            .expect("every condition is classified")
    }
}

/// Chunk-wise accumulation of the classification evidence.
#[derive(Debug, Clone)]
pub struct Classifier {
    measure: MeasureLabel,
    th: Thresholds,
    nu: NuEvidence,
    tradeoff: TradeoffReport,
    bound: Option<BoundCheck>,
    ip: CertificateCheck,
    fk: CertificateCheck,
    weighted_paths: usize,
}

impl Classifier {
    pub fn new(measure: MeasureLabel, th: &Thresholds) -> Result<Self, ArbitrageError> {
        th.validate()?;
        Ok(Self {
            measure,
            th: th.clone(),
            nu: NuEvidence::empty(),
            tradeoff: TradeoffReport::empty(true),
            bound: None,
            ip: CertificateCheck::new(CertificateKind::IncreasingProfit, measure, "H = nu", th),
            fk: CertificateCheck::new(CertificateKind::FirstKind, measure, "H^v = nu for every v", th)
                .with_claim("xi = G_T(nu)"),
            weighted_paths: 0,
        })
    }

    /// Adds a chunk, read under this classifier's measure.
    pub fn add_chunk(&mut self, chunk: &Chunk) -> Result<(), ArbitrageError> {
        let th = &self.th;
        let (dec, partner) = chunk
            .under(self.measure)
            .ok_or_else(|| ArbitrageError::Precondition("chunk was prepared without a density".into()))?;
        self.nu.merge(&NuEvidence::from_decomposition(dec, th.tol_nu));
        self.weighted_paths += dec.mask.iter().filter(|m| **m).count();

        let under_q = self.measure == MeasureLabel::Q;
        let mut report = match (&chunk.q, &chunk.density) {
            (Some(q), Some(z)) if under_q => {
                let (report, b) = mvt_under_q(q, &chunk.decomp_p, z, Some(partner), th)?;
                match &mut self.bound {
                    Some(acc) => acc.merge(&b),
                    None => self.bound = Some(b),
                }
                report
            }
            _ => mean_variance_tradeoff(dec, Some(partner), th)?,
        };
        report.k_hat = None;
        self.tradeoff.append(report);

        let weights = if under_q { chunk.weights() } else { None };
        let gains = nu_gains(dec, &chunk.bundle)?;
        let claim = gains.terminals();
        self.ip.add(&gains, weights.as_deref())?;
        self.fk.add_first_kind(&[&gains], &claim, weights.as_deref())?;
        Ok(())
    }

    pub fn finish(self) -> Result<Classification, ArbitrageError> {
        let th = &self.th;
        let summary = self.tradeoff.summary();
        let ip_cert = self.ip.finish()?;
        let fk_cert = self.fk.finish()?;
        let nip = check_nip(&self.nu, Some(ip_cert.clone()), self.measure, th);
        let nsa = check_nsa(&summary, &nip, th);
        // The derived first-kind family is only meaningful when `H = nu` is
        // an increasing profit; otherwise its claim may be negative.
        let fk = ip_cert.verified().then_some(fk_cert);
        let na1 = check_na1(&summary, &nip, fk, th);
        let na = check_na(&nip, None, th);
        Ok(Classification {
            measure: self.measure,
            verdicts: vec![nip, nsa, na1, na],
            nu: self.nu,
            tradeoff: summary,
            tradeoff_bound: self.bound,
            weighted_paths: self.weighted_paths,
        })
    }
}

/// Simulate, decompose and classify all four conditions chunk by chunk.
pub fn classify(cfg: &ClassifyConfig) -> Result<Classification, ArbitrageError> {
    if cfg.n_paths == 0 {
        return Err(ArbitrageError::Shape("n_paths must be positive".into()));
    }
    let mut classifier = Classifier::new(cfg.measure(), &cfg.thresholds)?;
    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        classifier.add_chunk(&prepare_chunk(cfg, first, n)?)?;
    }
    classifier.finish()
}
