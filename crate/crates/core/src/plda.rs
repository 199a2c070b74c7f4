//! Two-covariance PLDA: w = μ + y + ε with y ~ N(0, Φ_b) shared by a
//! speaker's utterances and ε ~ N(0, Φ_w) per utterance.
//!
//! Training is EM on full covariances. Trials are scored with the
//! same-speaker vs different-speaker log-likelihood ratio
//!
//!   ln p(a, b | same) − ln p(a | diff) − ln p(b | diff)
//!
//! evaluated in closed form.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::classifier::argmax_first;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PldaOptions {
    pub iterations: usize,
    /// Smallest eigenvalue kept in either covariance.
    pub eig_floor: f64,
    /// Added to a singular sample covariance before initialization.
    pub ridge: f64,
}

impl Default for PldaOptions {
    fn default() -> Self {
        Self {
            iterations: 20,
            eig_floor: 1e-8,
            ridge: 1e-6,
        }
    }
}

/// Matrices derived from the covariances, recomputed whenever they change.
#[derive(Debug, Clone, PartialEq)]
struct ScoringTerms {
    total_inv: DMatrix<f64>,
    pair_inv: DMatrix<f64>,
    within_inv: DMatrix<f64>,
    constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    pub mu: DVector<f64>,
    pub phi_b: DMatrix<f64>,
    pub phi_w: DMatrix<f64>,
    /// Speaker id → enrolled mean embedding.
    pub enrolled: BTreeMap<String, DVector<f64>>,
    terms: ScoringTerms,
}

#[derive(Debug, Clone)]
pub struct PldaTraining {
    pub model: PldaModel,
    /// Total data log-likelihood before the first and after every iteration.
    pub log_likelihoods: Vec<f64>,
    pub warnings: Vec<String>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn floor_eigen(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return symmetrize(m);
    }
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()))
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::Training("covariance is not positive definite".into()))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((symmetrize(&chol.inverse()), logdet))
}

fn quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

impl ScoringTerms {
    fn new(phi_b: &DMatrix<f64>, phi_w: &DMatrix<f64>) -> Result<Self> {
        let d = phi_b.nrows() as f64;
        let (total_inv, ld_total) = spd_inverse(&(phi_b + phi_w))?;
        let (pair_inv, ld_pair) = spd_inverse(&(phi_b + phi_w * 0.5))?;
        let (within_inv, ld_within) = spd_inverse(phi_w)?;
        let constant = -0.5 * ld_within - 0.5 * d * 2f64.ln() - 0.5 * ld_pair + ld_total;
        Ok(Self {
            total_inv,
            pair_inv,
            within_inv,
            constant,
        })
    }
}

impl PldaModel {
    /// Builds a model from explicit parameters. `phi_w` must be positive
    /// definite; `phi_b` may be singular (including zero).
    pub fn from_parts(mu: DVector<f64>, phi_b: DMatrix<f64>, phi_w: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 || phi_b.shape() != (d, d) || phi_w.shape() != (d, d) {
            return Err(Error::param("PLDA parameter dimensions disagree"));
        }
        let terms = ScoringTerms::new(&phi_b, &phi_w)
            .map_err(|_| Error::param("within-speaker covariance must be positive definite"))?;
        Ok(Self {
            mu,
            phi_b,
            phi_w,
            enrolled: BTreeMap::new(),
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::param(format!(
                "embedding length {} does not match PLDA dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Enrolls (or replaces) a speaker by the mean of its embeddings.
    pub fn enroll(&mut self, speaker: &str, embeddings: &[Vec<f64>]) -> Result<()> {
        if embeddings.is_empty() {
            return Err(Error::param(format!("no embeddings to enroll '{speaker}'")));
        }
        let mut mean = DVector::zeros(self.dim());
        for e in embeddings {
            self.check_dim(e)?;
            mean += DVector::from_column_slice(e);
        }
        mean /= embeddings.len() as f64;
        self.enrolled.insert(speaker.to_string(), mean);
        Ok(())
    }

    fn score_vectors(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let t = &self.terms;
        let diff = a - b;
        let mid = (a + b) * 0.5 - &self.mu;
        let ac = a - &self.mu;
        let bc = b - &self.mu;
        t.constant - 0.25 * quad(&t.within_inv, &diff) - 0.5 * quad(&t.pair_inv, &mid)
            + 0.5 * quad(&t.total_inv, &ac)
            + 0.5 * quad(&t.total_inv, &bc)
    }

    pub fn to_text(&self) -> String {
        let d = self.dim();
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "plda,1");
        let _ = writeln!(s, "dim,{d}");
        let _ = writeln!(s, "mu,{}", join(&mut self.mu.iter().copied()));
        for r in 0..d {
            let _ = writeln!(s, "phi_b,{}", join(&mut self.phi_b.row(r).iter().copied()));
        }
        for r in 0..d {
            let _ = writeln!(s, "phi_w,{}", join(&mut self.phi_w.row(r).iter().copied()));
        }
        let _ = writeln!(s, "speakers,{}", self.enrolled.len());
        for (id, mean) in &self.enrolled {
            let _ = writeln!(s, "speaker,{id},{}", join(&mut mean.iter().copied()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = crate::persist::Lines::new(text);
        lines.expect_tag("plda")?;
        let d = lines.expect_usize("dim")?;
        if d == 0 {
            return Err(lines.error("dimension must be positive"));
        }
        let mu = DVector::from_vec(lines.expect_f64s("mu", Some(d))?);
        let mut read_matrix = |tag: &str| -> Result<DMatrix<f64>> {
            let mut rows = Vec::with_capacity(d * d);
            for _ in 0..d {
                rows.extend(lines.expect_f64s(tag, Some(d))?);
            }
            Ok(DMatrix::from_row_slice(d, d, &rows))
        };
        let phi_b = read_matrix("phi_b")?;
        let phi_w = read_matrix("phi_w")?;
        let n = lines.expect_usize("speakers")?;
        let mut enrolled = BTreeMap::new();
        for _ in 0..n {
            let row = lines.next_row("speaker")?;
            if row.len() != d + 1 {
                return Err(lines.error(&format!(
                    "speaker row has {} values, expected {d}",
                    row.len().saturating_sub(1)
                )));
            }
            let values = row[1..]
                .iter()
                .map(|v| lines.parse_f64(v))
                .collect::<Result<Vec<_>>>()?;
            enrolled.insert(row[0].to_string(), DVector::from_vec(values));
        }
        lines.expect_end()?;
        let mut model = Self::from_parts(mu, phi_b, phi_w).map_err(|e| Error::Model(e.to_string()))?;
        model.enrolled = enrolled;
        Ok(model)
    }
}

struct SpeakerStats {
    count: usize,
    mean: DVector<f64>,
    /// Σ_i (w_i − mean)(w_i − mean)ᵀ
    scatter: DMatrix<f64>,
}

fn speaker_log_likelihood(
    s: &SpeakerStats,
    mu: &DVector<f64>,
    within_inv: &DMatrix<f64>,
    ld_within: f64,
    phi_b: &DMatrix<f64>,
    phi_w: &DMatrix<f64>,
) -> Result<f64> {
    let n = s.count as f64;
    let d = mu.len() as f64;
    let (marg_inv, ld_marg) = spd_inverse(&(phi_b + phi_w / n))?;
    let centered = &s.mean - mu;
    let within_term = (within_inv.component_mul(&s.scatter)).sum();
    Ok(-0.5 * (n - 1.0) * d * (2.0 * PI).ln()
        - 0.5 * (n - 1.0) * ld_within
        - 0.5 * d * n.ln()
        - 0.5 * within_term
        - 0.5 * d * (2.0 * PI).ln()
        - 0.5 * ld_marg
        - 0.5 * quad(&marg_inv, &centered))
}

fn total_log_likelihood(
    stats: &[SpeakerStats],
    mu: &DVector<f64>,
    phi_b: &DMatrix<f64>,
    phi_w: &DMatrix<f64>,
) -> Result<f64> {
    let (within_inv, ld_within) = spd_inverse(phi_w)?;
    stats
        .iter()
        .map(|s| speaker_log_likelihood(s, mu, &within_inv, ld_within, phi_b, phi_w))
        .sum()
}

/// EM training; every training speaker is enrolled with its mean.
pub fn train_plda(embeddings: &[Vec<f64>], labels: &[String], opts: &PldaOptions) -> Result<PldaTraining> {
    if embeddings.len() != labels.len() {
        return Err(Error::param("embeddings and labels differ in length"));
    }
    let d = embeddings
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Training("no training embeddings".into()))?;
    if d == 0 {
        return Err(Error::param("embedding dimension must be positive"));
    }
    for (row, e) in embeddings.iter().enumerate() {
        if e.len() != d {
            return Err(Error::param(format!(
                "embedding {row} has length {}, expected {d}",
                e.len()
            )));
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data { row });
        }
    }
    let mut groups: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (e, l) in embeddings.iter().zip(labels) {
        groups.entry(l.as_str()).or_default().push(e);
    }
    if groups.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two speakers, got {}",
            groups.len()
        )));
    }
    if let Some((id, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::Training(format!("speaker '{id}' has fewer than two embeddings")));
    }

    let n_total = embeddings.len() as f64;
    let stats: Vec<SpeakerStats> = groups
        .values()
        .map(|rows| {
            let mut mean = DVector::zeros(d);
            for r in rows {
                mean += DVector::from_column_slice(r);
            }
            mean /= rows.len() as f64;
            let mut scatter = DMatrix::zeros(d, d);
            for r in rows {
                let c = DVector::from_column_slice(r) - &mean;
                scatter += &c * c.transpose();
            }
            SpeakerStats {
                count: rows.len(),
                mean,
                scatter,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let mut global = DVector::zeros(d);
    for e in embeddings {
        global += DVector::from_column_slice(e);
    }
    global /= n_total;
    let mut cov = DMatrix::zeros(d, d);
    for e in embeddings {
        let c = DVector::from_column_slice(e) - &global;
        cov += &c * c.transpose();
    }
    cov /= n_total;
    let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if !(min_eig > 1e-12) {
        warnings.push(format!(
            "sample covariance is singular (smallest eigenvalue {min_eig:e}); adding ridge {}",
            opts.ridge
        ));
        cov += DMatrix::identity(d, d) * opts.ridge;
    }

    let mut mu = global;
    let mut phi_b = floor_eigen(&(&cov * 0.5), opts.eig_floor);
    let mut phi_w = floor_eigen(&(&cov * 0.5), opts.eig_floor);
    let mut log_likelihoods = vec![total_log_likelihood(&stats, &mu, &phi_b, &phi_w)?];

    let n_speakers = stats.len() as f64;
    for _ in 0..opts.iterations {
        // E-step: posterior of each speaker's latent mean.
        let mut by_count: BTreeMap<usize, (DMatrix<f64>, DMatrix<f64>)> = BTreeMap::new();
        let mut post_means = Vec::with_capacity(stats.len());
        for s in &stats {
            let (gain, post_cov) = match by_count.get(&s.count) {
                Some(v) => v.clone(),
                None => {
                    let (inv, _) = spd_inverse(&(&phi_b + &phi_w / s.count as f64))?;
                    let gain = &phi_b * inv;
                    let post_cov = symmetrize(&((DMatrix::identity(d, d) - &gain) * &phi_b));
                    by_count.insert(s.count, (gain.clone(), post_cov.clone()));
                    (gain, post_cov)
                }
            };
            let y_hat = &mu + gain * (&s.mean - &mu);
            post_means.push((y_hat, post_cov));
        }

        // M-step.
        let mut new_mu = DVector::zeros(d);
        for (y, _) in &post_means {
            new_mu += y;
        }
        new_mu /= n_speakers;
        let mut new_b = DMatrix::zeros(d, d);
        let mut new_w = DMatrix::zeros(d, d);
        for (s, (y, c)) in stats.iter().zip(&post_means) {
            let dy = y - &new_mu;
            new_b += c + &dy * dy.transpose();
            let offset = &s.mean - y;
            let n = s.count as f64;
            new_w += &s.scatter + (&offset * offset.transpose()) * n + c * n;
        }
        mu = new_mu;
        phi_b = floor_eigen(&(new_b / n_speakers), opts.eig_floor);
        phi_w = floor_eigen(&(new_w / n_total), opts.eig_floor);
        log_likelihoods.push(total_log_likelihood(&stats, &mu, &phi_b, &phi_w)?);
    }

    let mut model = PldaModel::from_parts(mu, phi_b, phi_w)?;
    for (id, s) in groups.keys().zip(&stats) {
        model.enrolled.insert(id.to_string(), s.mean.clone());
    }
    Ok(PldaTraining {
        model,
        log_likelihoods,
        warnings,
    })
}

/// Log-likelihood ratio of the same-speaker hypothesis for one trial.
pub fn plda_score(model: &PldaModel, w_target: &[f64], w_test: &[f64]) -> Result<f64> {
    model.check_dim(w_target)?;
    model.check_dim(w_test)?;
    Ok(model.score_vectors(
        &DVector::from_column_slice(w_target),
        &DVector::from_column_slice(w_test),
    ))
}

/// Closed-set identification against the enrolled means. Scores are in
/// lexicographic speaker order; ties go to the first speaker.
pub fn plda_identify(model: &PldaModel, w_test: &[f64]) -> Result<(String, Vec<(String, f64)>)> {
    if model.enrolled.is_empty() {
        return Err(Error::State("PLDA model has no enrolled speakers".into()));
    }
    model.check_dim(w_test)?;
    let test = DVector::from_column_slice(w_test);
    let scores: Vec<(String, f64)> = model
        .enrolled
        .iter()
        .map(|(id, mean)| (id.clone(), model.score_vectors(mean, &test)))
        .collect();
    let values: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    let best = argmax_first(&values);
    Ok((scores[best].0.clone(), scores))
}
