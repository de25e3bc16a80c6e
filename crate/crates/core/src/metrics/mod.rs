//! Disentanglement metrics over a table of latent codes and attributes.
//!
//! | metric           | per     | summary                                        |
//! |------------------|---------|------------------------------------------------|
//! | Interpretability | attr    | held-out R² of the best single dimension       |
//! | Modularity       | dim     | 1 − off-target MI mass relative to the top MI  |
//! | MIG              | attr    | gap between the top two MIs, over H(a)         |
//! | SAP              | attr    | gap between the top two held-out R²            |
//! | SCC              | attr    | best Spearman correlation over dimensions      |
//!
//! MI uses `bins × bins` quantile histograms (natural log). Regression-based
//! scores fit on one half of a seeded 50/50 split and score the other half,
//! with R² clipped to `[0, 1]`.

mod estimators;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::numgrad::SeededRng;
use crate::vae::MlpVae;

pub use estimators::{
    average_ranks, binned_entropy, entropy_of_labels, mutual_information,
    mutual_information_of_labels, quantile_bins, spearman, LinearFit, Spearman,
};

/// Below this many examples the estimates are unreliable.
pub const MIN_EXAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub bins: usize,
    pub split_seed: u64,
    /// Use `|ρ|` in SCC instead of the signed coefficient.
    pub absolute_scc: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            bins: 20,
            split_seed: 0,
            absolute_scc: false,
        }
    }
}

/// Latent codes (`D × N`) paired with attributes (`L × N`).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentAttributeTable {
    latents: Vec<Vec<f64>>,
    attributes: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl LatentAttributeTable {
    pub fn new(latents: Vec<Vec<f64>>, attributes: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if latents.is_empty() || attributes.is_empty() {
            return Err(Error::contract("table needs at least one latent and one attribute"));
        }
        if names.len() != attributes.len() {
            return Err(Error::dim(format!(
                "{} names for {} attributes",
                names.len(),
                attributes.len()
            )));
        }
        let n = latents[0].len();
        if latents.iter().chain(&attributes).any(|r| r.len() != n) {
            return Err(Error::dim("all latent and attribute rows need the same length"));
        }
        if n < 4 {
            return Err(Error::contract(format!("table has {n} examples, need at least 4")));
        }
        if latents.iter().chain(&attributes).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("table contains non-finite values".into()));
        }
        Ok(LatentAttributeTable {
            latents,
            attributes,
            names,
        })
    }

    /// Encoder means of every example in `data`, against all its attributes.
    pub fn from_model(model: &MlpVae, data: &Dataset) -> Result<Self> {
        if data.input_width() != model.architecture().input_width {
            return Err(Error::format(format!(
                "dataset width {} does not match model input width {}",
                data.input_width(),
                model.architecture().input_width
            )));
        }
        let d = model.latent_dim();
        let mut latents = vec![Vec::with_capacity(data.len()); d];
        let idx: Vec<usize> = (0..data.len()).collect();
        for chunk in idx.chunks(500) {
            let (mu, _) = model.encode(&data.inputs(chunk))?;
            for (k, row) in latents.iter_mut().enumerate() {
                row.extend(mu.column(k));
            }
        }
        LatentAttributeTable::new(
            latents,
            data.attributes().to_vec(),
            data.attribute_names().to_vec(),
        )
    }

    /// The same latents against the named attributes only, in that order.
    pub fn select_attributes(&self, names: &[String]) -> Result<Self> {
        let rows = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .map(|l| self.attributes[l].clone())
                    .ok_or_else(|| Error::usage(format!("unknown attribute {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LatentAttributeTable::new(self.latents.clone(), rows, names.to_vec())
    }

    pub fn len(&self) -> usize {
        self.latents[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn latent_dim(&self) -> usize {
        self.latents.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn latent(&self, d: usize) -> &[f64] {
        &self.latents[d]
    }

    pub fn attribute(&self, l: usize) -> &[f64] {
        &self.attributes[l]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `MI(z_d, a_l)` for every pair, as `D × L`.
    pub fn mutual_information_matrix(&self, bins: usize) -> Vec<Vec<f64>> {
        let zl: Vec<Vec<usize>> = self.latents.iter().map(|z| quantile_bins(z, bins)).collect();
        let al: Vec<Vec<usize>> = self.attributes.iter().map(|a| quantile_bins(a, bins)).collect();
        zl.iter()
            .map(|z| {
                al.iter()
                    .map(|a| mutual_information_of_labels(z, a, bins))
                    .collect()
            })
            .collect()
    }

    /// The latent dimension sharing the most information with attribute `l`.
    pub fn most_informative_dim(&self, l: usize, bins: usize) -> usize {
        let al = quantile_bins(&self.attributes[l], bins);
        let mi: Vec<f64> = self
            .latents
            .iter()
            .map(|z| mutual_information_of_labels(&quantile_bins(z, bins), &al, bins))
            .collect();
        argmax(&mi)
    }

    fn split(&self, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut perm = SeededRng::new(seed).permutation(self.len());
        let test = perm.split_off(self.len() / 2);
        (perm, test)
    }

    /// Held-out R² (clipped) of `z_d → a_l` fits, as `D × L`, plus the
    /// in-sample training R² used for model selection.
    fn r2_matrices(&self, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (train, test) = self.split(seed);
        let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut held_out = Vec::with_capacity(self.latent_dim());
        let mut in_sample = Vec::with_capacity(self.latent_dim());
        for z in &self.latents {
            let (ztr, zte) = (pick(z, &train), pick(z, &test));
            let mut ho = Vec::new();
            let mut is = Vec::new();
            for a in &self.attributes {
                let (atr, ate) = (pick(a, &train), pick(a, &test));
                let fit = LinearFit::fit(&ztr, &atr);
                is.push(fit.r2(&ztr, &atr));
                ho.push(fit.r2(&zte, &ate).clamp(0.0, 1.0));
            }
            held_out.push(ho);
            in_sample.push(is);
        }
        (held_out, in_sample)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn top_two(v: &[f64]) -> (f64, f64) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    (sorted[0], sorted.get(1).copied().unwrap_or(0.0))
}

/// Per-item scores with their mean and a flag per degenerate item.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub values: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub mean: f64,
}

impl Scores {
    fn new(values: Vec<f64>, degenerate: Vec<bool>) -> Scores {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Scores {
            values,
            degenerate,
            mean,
        }
    }

    fn plain(values: Vec<f64>) -> Scores {
        let n = values.len();
        Scores::new(values, vec![false; n])
    }
}

pub fn interpretability(table: &LatentAttributeTable, settings: &MetricSettings) -> Scores {
    let (held_out, in_sample) = table.r2_matrices(settings.split_seed);
    Scores::plain(
        (0..table.attribute_count())
            .map(|l| {
                let col: Vec<f64> = in_sample.iter().map(|r| r[l]).collect();
                held_out[argmax(&col)][l]
            })
            .collect(),
    )
}

/// Per latent dimension.
pub fn modularity(table: &LatentAttributeTable, settings: &MetricSettings) -> Scores {
    let mi = table.mutual_information_matrix(settings.bins);
    let l = table.attribute_count();
    Scores::plain(
        mi.iter()
            .map(|row| {
                if l == 1 {
                    return 1.0;
                }
                let best = argmax(row);
                let theta = row[best];
                if theta < 1e-6 {
                    return 1.0;
                }
                let off: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != best)
                    .map(|(_, m)| m * m)
                    .sum();
                (1.0 - off / (theta * theta * (l - 1) as f64)).clamp(0.0, 1.0)
            })
            .collect(),
    )
}

pub fn mig(table: &LatentAttributeTable, settings: &MetricSettings) -> Scores {
    let mi = table.mutual_information_matrix(settings.bins);
    let mut values = Vec::new();
    let mut degenerate = Vec::new();
    for l in 0..table.attribute_count() {
        let h = binned_entropy(table.attribute(l), settings.bins);
        if h <= 0.0 {
            values.push(0.0);
            degenerate.push(true);
            continue;
        }
        let col: Vec<f64> = mi.iter().map(|r| r[l]).collect();
        let (a, b) = top_two(&col);
        values.push(((a - b) / h).clamp(0.0, 1.0));
        degenerate.push(false);
    }
    Scores::new(values, degenerate)
}

pub fn sap(table: &LatentAttributeTable, settings: &MetricSettings) -> Scores {
    let (held_out, _) = table.r2_matrices(settings.split_seed);
    Scores::plain(
        (0..table.attribute_count())
            .map(|l| {
                let col: Vec<f64> = held_out.iter().map(|r| r[l]).collect();
                let (a, b) = top_two(&col);
                a - b
            })
            .collect(),
    )
}

pub fn scc(table: &LatentAttributeTable, settings: &MetricSettings) -> Scores {
    let mut values = Vec::new();
    let mut degenerate = Vec::new();
    for l in 0..table.attribute_count() {
        let a = table.attribute(l);
        let rhos: Vec<Spearman> = (0..table.latent_dim())
            .map(|d| spearman(table.latent(d), a).expect("table rows have equal length"))
            .collect();
        let best = rhos
            .iter()
            .map(|s| if settings.absolute_scc { s.rho.abs() } else { s.rho })
            .fold(f64::NEG_INFINITY, f64::max);
        values.push(best.clamp(0.0, 1.0));
        degenerate.push(rhos.iter().all(|s| s.degenerate));
    }
    Scores::new(values, degenerate)
}

/// Signed Spearman correlation between one latent dimension and one attribute.
pub fn dimension_scc(table: &LatentAttributeTable, d: usize, l: usize) -> Result<Spearman> {
    spearman(table.latent(d), table.attribute(l))
}

pub const METRIC_NAMES: [&str; 5] = ["interpretability", "modularity", "mig", "sap", "scc"];

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub settings: MetricSettings,
    pub attributes: Vec<String>,
    pub interpretability: Scores,
    /// Per latent dimension.
    pub modularity: Scores,
    pub mig: Scores,
    pub sap: Scores,
    pub scc: Scores,
    /// Modularity of the dimension most informative about each attribute.
    pub modularity_by_attribute: Vec<f64>,
    pub recon_accuracy: Option<f64>,
}

impl MetricReport {
    pub fn compute(table: &LatentAttributeTable, settings: &MetricSettings) -> Self {
        let modularity = modularity(table, settings);
        let modularity_by_attribute = (0..table.attribute_count())
            .map(|l| modularity.values[table.most_informative_dim(l, settings.bins)])
            .collect();
        MetricReport {
            settings: *settings,
            attributes: table.names().to_vec(),
            interpretability: interpretability(table, settings),
            modularity,
            mig: mig(table, settings),
            sap: sap(table, settings),
            scc: scc(table, settings),
            modularity_by_attribute,
            recon_accuracy: None,
        }
    }

    pub fn with_recon_accuracy(mut self, accuracy: f64) -> Self {
        self.recon_accuracy = Some(accuracy);
        self
    }

    /// `(metric, per-attribute values, mean)` in report order.
    pub fn rows(&self) -> Vec<(&'static str, &[f64], f64)> {
        vec![
            ("interpretability", &self.interpretability.values[..], self.interpretability.mean),
            ("modularity", &self.modularity_by_attribute[..], self.modularity.mean),
            ("mig", &self.mig.values[..], self.mig.mean),
            ("sap", &self.sap.values[..], self.sap.mean),
            ("scc", &self.scc.values[..], self.scc.mean),
        ]
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.rows().into_iter().find(|r| r.0 == metric).map(|r| r.2)
    }

    pub fn summary(&self) -> String {
        let mut s: Vec<String> = self
            .rows()
            .iter()
            .map(|(m, _, mean)| format!("{m}={mean:.4}"))
            .collect();
        if let Some(a) = self.recon_accuracy {
            s.push(format!("recon_accuracy={a:.4}"));
        }
        s.join(" ")
    }

    /// CSV with a settings comment line, then `metric,attribute,score` rows:
    /// every metric per attribute, each metric's mean, and the
    /// reconstruction accuracy when present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# bins={} split_seed={} scc={}",
            self.settings.bins,
            self.settings.split_seed,
            if self.settings.absolute_scc { "absolute" } else { "signed" }
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "attribute", "score"])?;
        for (metric, values, _) in self.rows() {
            for (name, v) in self.attributes.iter().zip(values) {
                w.write_record([metric, name.as_str(), &v.to_string()])?;
            }
        }
        for (metric, _, mean) in self.rows() {
            w.write_record([metric, "mean", &mean.to_string()])?;
        }
        if let Some(a) = self.recon_accuracy {
            w.write_record(["recon_accuracy", "all", &a.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
