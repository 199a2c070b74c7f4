//! Utterance pooling and a one-vs-rest kernel SVM trained by SMO.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureMethod};

/// Per-dimension mean followed by per-dimension population std.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceEmbedding {
    pub values: Vec<f64>,
    pub source_method: FeatureMethod,
}

pub fn pool_utterance(features: &FeatureMatrix) -> Result<UtteranceEmbedding> {
    let n = features.n_frames();
    if n == 0 {
        return Err(Error::param("cannot pool an empty feature matrix"));
    }
    let dim = features.dim;
    let mut mean = vec![0.0; dim];
    for v in &features.vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for v in &features.vectors {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n as f64).sqrt());
    Ok(UtteranceEmbedding {
        values: mean.iter().copied().chain(std).collect(),
        source_method: features.method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Kernel requested at training time; `gamma: None` picks
/// 1 / (dim · variance of the standardized data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelChoice {
    Linear,
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: KernelChoice,
    pub c: f64,
    /// Stop when the maximal KKT violation falls below this.
    pub tol: f64,
    /// Iteration budget in units of passes over the training set.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Rbf { gamma: None },
            c: 10.0,
            tol: 1e-3,
            max_passes: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-12;

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// One binary decision function f(x) = Σ α_i y_i K(sv_i, x) + bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    /// Indices into [`SvmModel::support_vectors`].
    pub support: Vec<usize>,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<String>,
    pub kernel: Kernel,
    pub c: f64,
    pub scaler: Scaler,
    /// Standardized support vectors shared by all machines.
    pub support_vectors: Vec<Vec<f64>>,
    pub machines: Vec<BinaryMachine>,
}

/// Summary of one SMO run, kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoReport {
    pub iterations: usize,
    pub converged: bool,
}

struct SmoSolution {
    alpha: Vec<f64>,
    rho: f64,
    report: SmoReport,
}

const TAU: f64 = 1e-12;

/// Dual solver for min ½αᵀQα − Σα, 0 ≤ α ≤ C, yᵀα = 0 with maximal
/// violating pair selection and second-order choice of the partner.
fn smo(kernel: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX {
                let b = gmax - v;
                if b > 0.0 {
                    let a = (kernel[i_sel][i_sel] + kernel[t][t] - 2.0 * kernel[i_sel][t]).max(TAU);
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let quad = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += q(t, i) * dai + q(t, j) * daj;
        }
    }

    // Offset from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        rho,
        report: SmoReport { iterations, converged },
    }
}

fn check_rows(embeddings: &[Vec<f64>]) -> Result<usize> {
    let dim = embeddings
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Training("no training embeddings".into()))?;
    if dim == 0 {
        return Err(Error::param("embedding dimension must be positive"));
    }
    for (row, e) in embeddings.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::param(format!(
                "embedding {row} has length {}, expected {dim}",
                e.len()
            )));
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data { row });
        }
    }
    Ok(dim)
}

/// Trains one binary SVM per class against all others.
pub fn train_svm(embeddings: &[Vec<f64>], labels: &[String], params: &SvmParams) -> Result<(SvmModel, Vec<SmoReport>)> {
    if embeddings.len() != labels.len() {
        return Err(Error::param("embeddings and labels differ in length"));
    }
    let dim = check_rows(embeddings)?;
    if !(params.c > 0.0) {
        return Err(Error::param("C must be positive"));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two classes, got {}",
            classes.len()
        )));
    }

    let scaler = Scaler::fit(embeddings);
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| scaler.transform(&embeddings[i])).collect();
    let ys: Vec<&str> = order.iter().map(|&i| labels[i].as_str()).collect();

    let kernel = match params.kernel {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf { gamma: Some(g) } if g > 0.0 => Kernel::Rbf { gamma: g },
        KernelChoice::Rbf { gamma: Some(g) } => return Err(Error::param(format!("RBF gamma {g} must be positive"))),
        KernelChoice::Rbf { gamma: None } => {
            let count = (xs.len() * dim) as f64;
            let mean = xs.iter().flatten().sum::<f64>() / count;
            let var = xs.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            let gamma = if var > 0.0 {
                1.0 / (dim as f64 * var)
            } else {
                1.0 / dim as f64
            };
            Kernel::Rbf { gamma }
        }
    };

    let n = xs.len();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&xs[i], &xs[j]);
            gram[i][j] = k;
            gram[j][i] = k;
        }
    }

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut sv_slot = vec![usize::MAX; n];
    let mut support_vectors = Vec::new();
    let mut machines = Vec::with_capacity(classes.len());
    let mut reports = Vec::with_capacity(classes.len());
    for class in &classes {
        let y: Vec<f64> = ys.iter().map(|l| if *l == class { 1.0 } else { -1.0 }).collect();
        let sol = smo(&gram, &y, params.c, params.tol, max_iter);
        let mut m = BinaryMachine {
            support: Vec::new(),
            alpha: Vec::new(),
            y: Vec::new(),
            bias: -sol.rho,
        };
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                if sv_slot[t] == usize::MAX {
                    sv_slot[t] = support_vectors.len();
                    support_vectors.push(xs[t].clone());
                }
                m.support.push(sv_slot[t]);
                m.alpha.push(a);
                m.y.push(y[t]);
            }
        }
        machines.push(m);
        reports.push(sol.report);
    }

    Ok((
        SvmModel {
            classes,
            kernel,
            c: params.c,
            scaler,
            support_vectors,
            machines,
        },
        reports,
    ))
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Decision values of every class for an already standardized vector.
    fn decisions_standardized(&self, x: &[f64]) -> Vec<f64> {
        let k: Vec<f64> = self.support_vectors.iter().map(|sv| self.kernel.eval(sv, x)).collect();
        self.machines
            .iter()
            .map(|m| {
                m.support
                    .iter()
                    .zip(m.alpha.iter().zip(&m.y))
                    .map(|(&s, (a, y))| a * y * k[s])
                    .sum::<f64>()
                    + m.bias
            })
            .collect()
    }

    pub fn decision_values(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        if embedding.len() != self.dim() {
            return Err(Error::param(format!(
                "embedding length {} does not match model dimension {}",
                embedding.len(),
                self.dim()
            )));
        }
        Ok(self.decisions_standardized(&self.scaler.transform(embedding)))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "svm,1");
        let _ = writeln!(s, "dim,{}", self.dim());
        match self.kernel {
            Kernel::Linear => {
                let _ = writeln!(s, "kernel,linear");
            }
            Kernel::Rbf { gamma } => {
                let _ = writeln!(s, "kernel,rbf,{gamma}");
            }
        }
        let _ = writeln!(s, "c,{}", self.c);
        let _ = writeln!(s, "classes,{},{}", self.classes.len(), self.classes.join(","));
        let _ = writeln!(s, "scaler_mean,{}", join(&self.scaler.mean));
        let _ = writeln!(s, "scaler_std,{}", join(&self.scaler.std));
        let _ = writeln!(s, "support_vectors,{}", self.support_vectors.len());
        for sv in &self.support_vectors {
            let _ = writeln!(s, "sv,{}", join(sv));
        }
        for (k, m) in self.machines.iter().enumerate() {
            let _ = writeln!(s, "machine,{k},{},{}", m.bias, m.support.len());
            for ((idx, a), y) in m.support.iter().zip(&m.alpha).zip(&m.y) {
                let _ = writeln!(s, "coef,{idx},{a},{y}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = crate::persist::Lines::new(text);
        lines.expect_tag("svm")?;
        let dim = lines.expect_usize("dim")?;
        let kernel_row = lines.next_row("kernel")?;
        let kernel = match kernel_row.as_slice() {
            ["linear"] => Kernel::Linear,
            ["rbf", g] => Kernel::Rbf {
                gamma: lines.parse_f64(g)?,
            },
            _ => return Err(lines.error("bad kernel line")),
        };
        let c = lines.expect_f64s("c", Some(1))?[0];
        let class_row = lines.next_row("classes")?;
        let n_classes: usize = lines.parse_usize(class_row.first().copied().unwrap_or(""))?;
        if class_row.len() != n_classes + 1 {
            return Err(lines.error("class count mismatch"));
        }
        let classes: Vec<String> = class_row[1..].iter().map(|s| s.to_string()).collect();
        let mean = lines.expect_f64s("scaler_mean", Some(dim))?;
        let std = lines.expect_f64s("scaler_std", Some(dim))?;
        let n_sv = lines.expect_usize("support_vectors")?;
        let support_vectors = (0..n_sv)
            .map(|_| lines.expect_f64s("sv", Some(dim)))
            .collect::<Result<Vec<_>>>()?;
        let mut machines = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let head = lines.next_row("machine")?;
            if head.len() != 3 || lines.parse_usize(head[0])? != k {
                return Err(lines.error("bad machine header"));
            }
            let bias = lines.parse_f64(head[1])?;
            let count = lines.parse_usize(head[2])?;
            let mut m = BinaryMachine {
                support: Vec::with_capacity(count),
                alpha: Vec::with_capacity(count),
                y: Vec::with_capacity(count),
                bias,
            };
            for _ in 0..count {
                let row = lines.next_row("coef")?;
                if row.len() != 3 {
                    return Err(lines.error("bad coef line"));
                }
                let idx = lines.parse_usize(row[0])?;
                if idx >= n_sv {
                    return Err(lines.error("support index out of range"));
                }
                m.support.push(idx);
                m.alpha.push(lines.parse_f64(row[1])?);
                m.y.push(lines.parse_f64(row[2])?);
            }
            machines.push(m);
        }
        lines.expect_end()?;
        Ok(Self {
            classes,
            kernel,
            c,
            scaler: Scaler { mean, std },
            support_vectors,
            machines,
        })
    }
}

/// Returns the predicted class and the per-class decision values (in
/// `model.classes` order). Ties go to the lexicographically first class.
pub fn svm_predict(model: &SvmModel, embedding: &[f64]) -> Result<(String, Vec<f64>)> {
    let values = model.decision_values(embedding)?;
    let best = argmax_first(&values);
    Ok((model.classes[best].clone(), values))
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
