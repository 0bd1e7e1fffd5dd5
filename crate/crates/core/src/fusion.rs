//! The five embeddings compared by the toolkit: two independent
//! single-modality autoencoders (M1), early fusion of the raw inputs (M2),
//! late fusion by concatenating M1 codes (M3) and a jointly trained
//! hierarchical stack over those codes (M4).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::io::{read_node_matrix, write_node_matrix};
use crate::dataset::{Dataset, NodeId};
use crate::error::{Error, Result};
use crate::gae::{
    mse_with_grad, optimize, train, Autoencoder, AutoencoderSpec, MeanAggregator, Objective,
    Parameterized, TrainReport, TrainedAutoencoder, WeightsArtifact,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FusionModelKind {
    M1Static,
    M1Dynamic,
    M2Early,
    M3Late,
    M4Hierarchical,
}

impl FusionModelKind {
    pub const ALL: [FusionModelKind; 5] = [
        FusionModelKind::M1Static,
        FusionModelKind::M1Dynamic,
        FusionModelKind::M2Early,
        FusionModelKind::M3Late,
        FusionModelKind::M4Hierarchical,
    ];

    /// File stem used for every per-model artifact.
    pub fn stem(self) -> &'static str {
        match self {
            FusionModelKind::M1Static => "m1_static",
            FusionModelKind::M1Dynamic => "m1_dynamic",
            FusionModelKind::M2Early => "m2",
            FusionModelKind::M3Late => "m3",
            FusionModelKind::M4Hierarchical => "m4",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FusionModelKind::M1Static => "M1-Static",
            FusionModelKind::M1Dynamic => "M1-Dynamic",
            FusionModelKind::M2Early => "M2",
            FusionModelKind::M3Late => "M3",
            FusionModelKind::M4Hierarchical => "M4",
        }
    }
}

impl fmt::Display for FusionModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FusionModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| {
                norm == k.stem()
                    || norm == k.label().to_ascii_lowercase().replace('-', "_")
                    || serde_json::to_value(k).ok().and_then(|v| v.as_str().map(str::to_ascii_lowercase))
                        == Some(norm.clone())
            })
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

/// Size and schedule of one autoencoder; input width and gating come from
/// the recipe that uses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeHyper {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for AeHyper {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            latent_dim: 32,
            epochs: 500,
            learning_rate: 1e-3,
        }
    }
}

impl AeHyper {
    pub fn spec(&self, input_dim: usize, use_gate: bool, seed: u64) -> AutoencoderSpec {
        AutoencoderSpec {
            input_dim,
            hidden_dim: self.hidden_dim,
            latent_dim: self.latent_dim,
            use_gate,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub static_weight: f64,
    pub dynamic_weight: f64,
    pub top_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            static_weight: 1.0,
            dynamic_weight: 1.0,
            top_weight: 1.0,
        }
    }
}

/// Hyperparameters for all recipes. M4 reuses the static and dynamic
/// settings for its lower autoencoders (with the M1 seeds) and runs its
/// joint optimisation with the epochs and learning rate of `top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpecs {
    pub static_ae: AeHyper,
    pub dynamic_ae: AeHyper,
    pub early: AeHyper,
    pub top: AeHyper,
    pub loss_weights: LossWeights,
    pub seed: u64,
}

impl Default for ModelSpecs {
    fn default() -> Self {
        Self {
            // 11 static features leave no room for a 16-wide code
            static_ae: AeHyper {
                latent_dim: 8,
                ..AeHyper::default()
            },
            dynamic_ae: AeHyper::default(),
            early: AeHyper::default(),
            top: AeHyper::default(),
            loss_weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl ModelSpecs {
    pub fn static_spec(&self, p: usize) -> AutoencoderSpec {
        self.static_ae.spec(p, false, rng::derive_seed(self.seed, &[rng::tag("m1-static")]))
    }

    pub fn dynamic_spec(&self, t: usize) -> AutoencoderSpec {
        self.dynamic_ae.spec(t, false, rng::derive_seed(self.seed, &[rng::tag("m1-dynamic")]))
    }

    pub fn early_spec(&self, p: usize, t: usize) -> AutoencoderSpec {
        self.early.spec(p + t, true, rng::derive_seed(self.seed, &[rng::tag("m2")]))
    }

    pub fn top_spec(&self) -> AutoencoderSpec {
        self.top.spec(
            self.static_ae.latent_dim + self.dynamic_ae.latent_dim,
            true,
            rng::derive_seed(self.seed, &[rng::tag("m4-top")]),
        )
    }
}

pub fn aggregator(dataset: &Dataset) -> MeanAggregator {
    MeanAggregator::new(dataset.graph().adjacency())
}

fn require_normalized(dataset: &Dataset) -> Result<()> {
    if dataset.normalization().is_none() {
        return Err(Error::Config("fusion models expect a normalized dataset".into()));
    }
    Ok(())
}

/// Two independent, ungated autoencoders on the static and dynamic inputs.
pub fn train_m1(dataset: &Dataset, specs: &ModelSpecs) -> Result<(TrainedAutoencoder, TrainedAutoencoder)> {
    require_normalized(dataset)?;
    let agg = aggregator(dataset);
    let x_s = dataset.static_features();
    let x_d = dataset.dynamic_series();
    let s = train(&specs.static_spec(x_s.ncols()), x_s.view(), &agg)?;
    let d = train(&specs.dynamic_spec(x_d.ncols()), x_d.view(), &agg)?;
    Ok((s, d))
}

/// One gated autoencoder over `[static | dynamic]`.
pub fn train_m2(dataset: &Dataset, specs: &ModelSpecs) -> Result<TrainedAutoencoder> {
    require_normalized(dataset)?;
    let x = dataset.concatenated_features();
    let spec = specs.early_spec(dataset.static_features().ncols(), dataset.dynamic_series().ncols());
    train(&spec, x.view(), &aggregator(dataset))
}

/// Column-wise concatenation of the two M1 codes.
pub fn train_m3(z_static: ArrayView2<f64>, z_dynamic: ArrayView2<f64>) -> Result<Array2<f64>> {
    if z_static.nrows() != z_dynamic.nrows() {
        return Err(Error::CountMismatch {
            left_name: "static embedding".into(),
            left: z_static.nrows(),
            right_name: "dynamic embedding".into(),
            right: z_dynamic.nrows(),
        });
    }
    Ok(concatenate![Axis(1), z_static, z_dynamic])
}

/// Static and dynamic autoencoders plus a gated top autoencoder over their
/// concatenated codes, optimised as one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub static_ae: Autoencoder,
    pub dynamic_ae: Autoencoder,
    pub top: Autoencoder,
}

impl HierarchicalModel {
    pub fn init(specs: &ModelSpecs, p: usize, t: usize) -> Result<Self> {
        let top_spec = specs.top_spec();
        if top_spec.input_dim != specs.static_ae.latent_dim + specs.dynamic_ae.latent_dim {
            return Err(Error::Config("top input must equal the two latent widths".into()));
        }
        Ok(Self {
            static_ae: Autoencoder::init(&specs.static_spec(p))?,
            dynamic_ae: Autoencoder::init(&specs.dynamic_spec(t))?,
            top: Autoencoder::init(&top_spec)?,
        })
    }
}

impl Parameterized for HierarchicalModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.static_ae.visit(&mut |n, s, d| f(&format!("static.{n}"), s, d));
        self.dynamic_ae.visit(&mut |n, s, d| f(&format!("dynamic.{n}"), s, d));
        self.top.visit(&mut |n, s, d| f(&format!("top.{n}"), s, d));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.static_ae.visit_mut(&mut |n, d| f(&format!("static.{n}"), d));
        self.dynamic_ae.visit_mut(&mut |n, d| f(&format!("dynamic.{n}"), d));
        self.top.visit_mut(&mut |n, d| f(&format!("top.{n}"), d));
    }
}

/// Unweighted loss terms of one M4 evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub static_loss: f64,
    pub dynamic_loss: f64,
    pub top_loss: f64,
}

/// `w_s·L_s + w_d·L_d + w_t·L_t`, where `L_t` reconstructs the concatenated
/// codes. Gradients reach the lower models through the top input and
/// through the reconstruction target.
pub struct HierarchicalObjective<'a> {
    pub static_features: ArrayView2<'a, f64>,
    pub dynamic_features: ArrayView2<'a, f64>,
    pub aggregator: &'a MeanAggregator,
    pub weights: LossWeights,
    trace: RefCell<Vec<LossTerms>>,
}

impl<'a> HierarchicalObjective<'a> {
    pub fn new(
        static_features: ArrayView2<'a, f64>,
        dynamic_features: ArrayView2<'a, f64>,
        aggregator: &'a MeanAggregator,
        weights: LossWeights,
    ) -> Self {
        Self {
            static_features,
            dynamic_features,
            aggregator,
            weights,
            trace: RefCell::new(Vec::new()),
        }
    }

    /// Loss terms recorded by every gradient evaluation so far.
    pub fn take_trace(&self) -> Vec<LossTerms> {
        self.trace.take()
    }

    fn combine(&self, t: &LossTerms) -> f64 {
        let w = &self.weights;
        w.static_weight * t.static_loss + w.dynamic_weight * t.dynamic_loss + w.top_weight * t.top_loss
    }

    pub fn terms(&self, model: &HierarchicalModel) -> Result<LossTerms> {
        let agg = self.aggregator;
        let ps = model.static_ae.forward(self.static_features, agg)?;
        let pd = model.dynamic_ae.forward(self.dynamic_features, agg)?;
        let c = concatenate![Axis(1), ps.latent, pd.latent];
        let pt = model.top.forward(c.view(), agg)?;
        Ok(LossTerms {
            static_loss: mse_with_grad(&ps.reconstruction, self.static_features).0,
            dynamic_loss: mse_with_grad(&pd.reconstruction, self.dynamic_features).0,
            top_loss: mse_with_grad(&pt.reconstruction, c.view()).0,
        })
    }

    /// Top-level code of the model.
    pub fn embed(&self, model: &HierarchicalModel) -> Result<Array2<f64>> {
        let agg = self.aggregator;
        let zs = model.static_ae.encode(self.static_features, agg)?;
        let zd = model.dynamic_ae.encode(self.dynamic_features, agg)?;
        let c = concatenate![Axis(1), zs, zd];
        model.top.encode(c.view(), agg)
    }
}

impl Objective for HierarchicalObjective<'_> {
    type Model = HierarchicalModel;

    fn loss(&self, model: &HierarchicalModel) -> Result<f64> {
        Ok(self.combine(&self.terms(model)?))
    }

    fn loss_and_grad(&self, model: &HierarchicalModel) -> Result<(f64, HierarchicalModel)> {
        let agg = self.aggregator;
        let w = self.weights;
        let ps = model.static_ae.forward(self.static_features, agg)?;
        let pd = model.dynamic_ae.forward(self.dynamic_features, agg)?;
        let ls_w = ps.latent.ncols();
        let c = concatenate![Axis(1), ps.latent, pd.latent];
        let pt = model.top.forward(c.view(), agg)?;

        let (ls, d_rs) = mse_with_grad(&ps.reconstruction, self.static_features);
        let (ld, d_rd) = mse_with_grad(&pd.reconstruction, self.dynamic_features);
        let (lt, d_rt) = mse_with_grad(&pt.reconstruction, c.view());
        let terms = LossTerms {
            static_loss: ls,
            dynamic_loss: ld,
            top_loss: lt,
        };

        let d_rt = d_rt * w.top_weight;
        let (g_top, d_c_input) = model.top.backward(&pt, d_rt.view(), None, agg);
        // C is also the target of the top reconstruction
        let d_c = d_c_input - &d_rt;

        let d_rs = d_rs * w.static_weight;
        let d_rd = d_rd * w.dynamic_weight;
        let (g_s, _) = model
            .static_ae
            .backward(&ps, d_rs.view(), Some(d_c.slice(s![.., ..ls_w])), agg);
        let (g_d, _) = model
            .dynamic_ae
            .backward(&pd, d_rd.view(), Some(d_c.slice(s![.., ls_w..])), agg);

        self.trace.borrow_mut().push(terms);
        Ok((
            self.combine(&terms),
            HierarchicalModel {
                static_ae: g_s,
                dynamic_ae: g_d,
                top: g_top,
            },
        ))
    }
}

#[derive(Debug, Clone)]
pub struct TrainedHierarchical {
    pub model: HierarchicalModel,
    pub embedding: Array2<f64>,
    pub report: TrainReport,
    /// Unweighted loss terms before each update, then for the final weights.
    pub terms: Vec<LossTerms>,
}

/// Joint training of the three M4 autoencoders.
pub fn train_m4(dataset: &Dataset, specs: &ModelSpecs) -> Result<TrainedHierarchical> {
    require_normalized(dataset)?;
    let agg = aggregator(dataset);
    train_m4_on(
        dataset.static_features().view(),
        dataset.dynamic_series().view(),
        &agg,
        specs,
    )
}

pub fn train_m4_on(
    x_s: ArrayView2<f64>,
    x_d: ArrayView2<f64>,
    agg: &MeanAggregator,
    specs: &ModelSpecs,
) -> Result<TrainedHierarchical> {
    let model = HierarchicalModel::init(specs, x_s.ncols(), x_d.ncols())?;
    let objective = HierarchicalObjective::new(x_s, x_d, agg, specs.loss_weights);
    let (model, report) = optimize(&objective, model, specs.top.epochs, specs.top.learning_rate)?;
    let mut terms = objective.take_trace();
    terms.push(objective.terms(&model)?);
    let embedding = objective.embed(&model)?;
    Ok(TrainedHierarchical {
        model,
        embedding,
        report,
        terms,
    })
}

/// One entry of an [`EmbeddingSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub kind: FusionModelKind,
    pub file: String,
    pub dims: usize,
    /// Specs of the autoencoders involved; empty for M3.
    pub specs: Vec<AutoencoderSpec>,
    pub report: Option<TrainReport>,
    pub loss_terms: Option<Vec<LossTerms>>,
    #[serde(skip)]
    pub embedding: Array2<f64>,
    #[serde(skip)]
    pub weights: Option<WeightsArtifact>,
}

impl ModelRecord {
    pub fn final_loss(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.final_loss)
    }
}

pub const EMBEDDINGS_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    model_specs: ModelSpecs,
    models: Vec<ModelRecord>,
}

/// Embeddings of all five recipes over one node ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub node_ids: Vec<NodeId>,
    pub model_specs: ModelSpecs,
    pub models: BTreeMap<FusionModelKind, ModelRecord>,
}

impl EmbeddingSet {
    pub fn get(&self, kind: FusionModelKind) -> Result<&ModelRecord> {
        self.models
            .get(&kind)
            .ok_or_else(|| Error::IncompleteSession(format!("missing {kind} embedding")))
    }

    pub fn embedding(&self, kind: FusionModelKind) -> Result<&Array2<f64>> {
        Ok(&self.get(kind)?.embedding)
    }

    pub fn is_complete(&self) -> bool {
        FusionModelKind::ALL.iter().all(|k| self.models.contains_key(k))
    }

    /// Writes `<stem>.csv` per model, `weights_<stem>.json` for trained
    /// models and `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for rec in self.models.values() {
            let headers: Vec<String> = (1..=rec.dims).map(|i| format!("z{i}")).collect();
            write_node_matrix(&dir.join(&rec.file), &self.node_ids, &headers, &rec.embedding)?;
            if let Some(w) = &rec.weights {
                let path = dir.join(format!("weights_{}.json", rec.kind.stem()));
                fs::write(&path, w.to_json()?).map_err(|e| Error::io(&path, e))?;
            }
        }
        let manifest = Manifest {
            format_version: EMBEDDINGS_FORMAT_VERSION,
            model_specs: self.model_specs,
            models: self.models.values().cloned().collect(),
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("embedding manifest", e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads a directory written by [`EmbeddingSet::save`]. Every model
    /// listed in the manifest must have its CSV.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json("embedding manifest", e))?;
        if manifest.format_version != EMBEDDINGS_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported embeddings format version {}",
                manifest.format_version
            )));
        }
        let mut node_ids: Option<Vec<NodeId>> = None;
        let mut models = BTreeMap::new();
        for mut rec in manifest.models {
            let csv_path = dir.join(&rec.file);
            if !csv_path.exists() {
                return Err(Error::IncompleteSession(format!(
                    "{} embedding file {} is missing",
                    rec.kind,
                    rec.file
                )));
            }
            let (_, ids, matrix) = read_node_matrix(&csv_path)?;
            match &node_ids {
                Some(prev) if *prev != ids => {
                    return Err(Error::Graph(format!("{} uses a different node order", rec.file)))
                }
                Some(_) => {}
                None => node_ids = Some(ids),
            }
            if matrix.ncols() != rec.dims {
                return Err(Error::Dimension(format!(
                    "{} has {} columns, manifest says {}",
                    rec.file,
                    matrix.ncols(),
                    rec.dims
                )));
            }
            rec.embedding = matrix;
            let wpath = dir.join(format!("weights_{}.json", rec.kind.stem()));
            if wpath.exists() {
                let text = fs::read_to_string(&wpath).map_err(|e| Error::io(&wpath, e))?;
                rec.weights = Some(WeightsArtifact::from_json(&text)?);
            }
            models.insert(rec.kind, rec);
        }
        Ok(Self {
            node_ids: node_ids.unwrap_or_default(),
            model_specs: manifest.model_specs,
            models,
        })
    }
}

fn record(
    kind: FusionModelKind,
    embedding: Array2<f64>,
    specs: Vec<AutoencoderSpec>,
    report: Option<TrainReport>,
    weights: Option<WeightsArtifact>,
) -> ModelRecord {
    ModelRecord {
        kind,
        file: format!("{}.csv", kind.stem()),
        dims: embedding.ncols(),
        specs,
        report,
        loss_terms: None,
        embedding,
        weights,
    }
}

/// Trains every recipe on a normalized dataset.
pub fn train_all(dataset: &Dataset, specs: &ModelSpecs) -> Result<EmbeddingSet> {
    use FusionModelKind::*;
    let (m1s, m1d) = train_m1(dataset, specs)?;
    log::info!("M1 trained: static loss {:.4e}, dynamic loss {:.4e}", m1s.report.final_loss, m1d.report.final_loss);
    let m2 = train_m2(dataset, specs)?;
    log::info!("M2 trained: loss {:.4e}", m2.report.final_loss);
    let m3 = train_m3(m1s.embedding.view(), m1d.embedding.view())?;
    let m4 = train_m4(dataset, specs)?;
    log::info!("M4 trained: joint loss {:.4e}", m4.report.final_loss);

    let mut models = BTreeMap::new();
    let m3_specs = vec![m1s.spec, m1d.spec];
    models.insert(
        M1Static,
        record(
            M1Static,
            m1s.embedding,
            vec![m1s.spec],
            Some(m1s.report),
            Some(WeightsArtifact::capture(M1Static.stem(), &m1s.model)),
        ),
    );
    models.insert(
        M1Dynamic,
        record(
            M1Dynamic,
            m1d.embedding,
            vec![m1d.spec],
            Some(m1d.report),
            Some(WeightsArtifact::capture(M1Dynamic.stem(), &m1d.model)),
        ),
    );
    models.insert(
        M2Early,
        record(
            M2Early,
            m2.embedding,
            vec![m2.spec],
            Some(m2.report),
            Some(WeightsArtifact::capture(M2Early.stem(), &m2.model)),
        ),
    );
    models.insert(M3Late, record(M3Late, m3, m3_specs, None, None));
    let p = dataset.static_features().ncols();
    let t = dataset.dynamic_series().ncols();
    let mut m4_rec = record(
        M4Hierarchical,
        m4.embedding,
        vec![specs.static_spec(p), specs.dynamic_spec(t), specs.top_spec()],
        Some(m4.report),
        Some(WeightsArtifact::capture(M4Hierarchical.stem(), &m4.model)),
    );
    m4_rec.loss_terms = Some(m4.terms);
    models.insert(M4Hierarchical, m4_rec);

    Ok(EmbeddingSet {
        node_ids: dataset.graph().node_ids(),
        model_specs: *specs,
        models,
    })
}
