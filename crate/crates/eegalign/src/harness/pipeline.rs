//! Pipeline configuration and per-subject data routing.
//!
//! A pipeline couples an alignment strategy with a classification chain.
//! Euclidean alignment (and no alignment) transforms time-series trials, so
//! every chain can follow it; Riemannian alignment transforms covariance
//! matrices, which only the MDRM chain consumes.

use std::collections::BTreeMap;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    build_reference, covariance, ea_align, ra_align, ReferenceKind, ShrinkageParam,
};
use crate::data::{TaskKind, Trial};
use crate::models::{
    csp_features, csp_fit, lda_fit, lda_predict, mdrm_fit, mdrm_predict, pca_apply, pca_fit,
    select_c, svm_fit, svm_predict, xdawn_apply, xdawn_fit, CspFilters, LdaModel,
    LinearMarginModel, MdrmModel, PcaModel, XdawnFilters,
};
use crate::preprocess::{augment_erp, erp_template};
use crate::spd::SpdMatrix;
use crate::{Error, Result};

fn default_n_filters() -> usize {
    6
}

fn default_n_components() -> usize {
    4
}

fn default_pca_features() -> usize {
    20
}

/// How each subject's data is mapped into a shared space before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlignmentSpec {
    /// Pass trials through untouched.
    None,
    /// Whiten trials by the inverse square root of a reference covariance.
    Euclidean { reference: ReferenceKind },
    /// Congruence-transform trial covariances by the reference.
    Riemannian { reference: ReferenceKind },
}

/// Classification chain applied after alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelChain {
    /// Minimum distance to Riemannian class means on trial covariances.
    Mdrm,
    /// CSP log-variance features into a linear discriminant.
    CspLda {
        #[serde(default = "default_n_filters")]
        n_filters: usize,
    },
    /// xDAWN spatial filtering, PCA features, and a linear max-margin model.
    XdawnPcaSvm {
        #[serde(default = "default_n_components")]
        n_components: usize,
        #[serde(default = "default_pca_features")]
        pca_features: usize,
    },
    /// PCA features straight from flattened trials into a max-margin model.
    PcaSvm {
        #[serde(default = "default_pca_features")]
        pca_features: usize,
    },
}

/// Full pipeline description: alignment, chain, and covariance shrinkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub alignment: AlignmentSpec,
    pub chain: ModelChain,
    /// Fixed shrinkage for every covariance estimate; `None` selects it
    /// automatically from the trial shape.
    #[serde(default)]
    pub shrinkage: Option<f64>,
}

impl PipelineSpec {
    /// Checks that the alignment, chain, task, and parameters are a valid
    /// combination.
    pub fn validate(&self, task: TaskKind) -> Result<()> {
        if let Some(epsilon) = self.shrinkage {
            ShrinkageParam::new(epsilon)?;
        }
        if matches!(self.alignment, AlignmentSpec::Riemannian { .. })
            && !matches!(self.chain, ModelChain::Mdrm)
        {
            return Err(Error::UnsupportedPipeline {
                reason: "riemannian alignment outputs covariance matrices; only the mdrm chain \
                         consumes them"
                    .to_string(),
            });
        }
        match (self.chain, task) {
            (ModelChain::CspLda { .. }, TaskKind::Erp) => Err(Error::UnsupportedPipeline {
                reason: "csp_lda discriminates oscillatory variance and applies to motor imagery \
                         data only"
                    .to_string(),
            }),
            (ModelChain::XdawnPcaSvm { .. }, TaskKind::MotorImagery) => {
                Err(Error::UnsupportedPipeline {
                    reason: "xdawn_pca_svm enhances evoked responses and applies to ERP data only"
                        .to_string(),
                })
            }
            (ModelChain::CspLda { n_filters }, _) if n_filters == 0 || n_filters % 2 != 0 => {
                Err(Error::InvalidParameter {
                    name: "n_filters",
                    reason: format!("must be an even number of at least 2, got {n_filters}"),
                })
            }
            (ModelChain::XdawnPcaSvm { n_components, pca_features }, _)
                if n_components == 0 || pca_features == 0 =>
            {
                Err(Error::InvalidParameter {
                    name: "chain",
                    reason: "n_components and pca_features must be positive".to_string(),
                })
            }
            (ModelChain::PcaSvm { pca_features: 0 }, _) => {
                Err(Error::InvalidParameter {
                    name: "pca_features",
                    reason: "must be positive".to_string(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Shrinkage parameter to use for a trial of the given shape.
    pub fn shrink_for(&self, n_channels: usize, n_samples: usize) -> Result<ShrinkageParam> {
        match self.shrinkage {
            Some(epsilon) => ShrinkageParam::new(epsilon),
            None => Ok(ShrinkageParam::auto_for(n_channels, n_samples)),
        }
    }
}

/// The two class labels of a binary dataset as `(nontarget, target)` for ERP
/// tasks or simply `(smaller, larger)` for motor imagery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassLabels {
    pub nontarget: u32,
    pub target: u32,
}

impl ClassLabels {
    /// Extracts the two labels from a dataset label map.
    pub fn from_label_map(map: &BTreeMap<u32, String>) -> Result<Self> {
        if map.len() != 2 {
            return Err(Error::ClassCount {
                context: "pipeline label map",
                expected: 2,
                got: map.len(),
            });
        }
        let mut keys = map.keys();
        let nontarget = *keys.next().unwrap();
        let target = *keys.next().unwrap();
        Ok(Self { nontarget, target })
    }
}

/// One subject's data after the alignment stage.
#[derive(Debug, Clone)]
pub enum AlignedSubject {
    /// Time-series trials: untouched or Euclidean-whitened.
    Trials(Vec<Trial>),
    /// Covariance matrices with optional labels, from Riemannian alignment.
    Covariances(Vec<(SpdMatrix, Option<u32>)>),
}

impl AlignedSubject {
    /// Number of aligned items.
    pub fn len(&self) -> usize {
        match self {
            AlignedSubject::Trials(t) => t.len(),
            AlignedSubject::Covariances(c) => c.len(),
        }
    }

    /// Whether the subject holds no items.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label of the item at `index`.
    pub fn label(&self, index: usize) -> Option<u32> {
        match self {
            AlignedSubject::Trials(t) => t[index].label,
            AlignedSubject::Covariances(c) => c[index].1,
        }
    }
}

/// Concatenates per-subject aligned data into one training set, preserving
/// subject order. All parts must share the same variant.
pub fn merge_aligned(parts: Vec<AlignedSubject>) -> Result<AlignedSubject> {
    let mut trials: Vec<Trial> = Vec::new();
    let mut covs: Vec<(SpdMatrix, Option<u32>)> = Vec::new();
    for part in parts {
        match part {
            AlignedSubject::Trials(mut t) => trials.append(&mut t),
            AlignedSubject::Covariances(mut c) => covs.append(&mut c),
        }
    }
    match (trials.is_empty(), covs.is_empty()) {
        (false, true) => Ok(AlignedSubject::Trials(trials)),
        (true, false) => Ok(AlignedSubject::Covariances(covs)),
        (true, true) => Err(Error::EmptyInput {
            context: "merging aligned subjects",
        }),
        (false, false) => Err(Error::UnsupportedPipeline {
            reason: "cannot mix trial-space and covariance-space aligned data".to_string(),
        }),
    }
}

/// Picks the trials a reference may be built from.
///
/// Resting-pool kinds use dedicated resting recordings for motor imagery and
/// non-target trials for ERP tasks; the latter therefore requires labels.
/// Task-pool kinds use every provided task trial.
pub fn select_reference_pool<'a>(
    task: TaskKind,
    kind: ReferenceKind,
    task_trials: &'a [Trial],
    resting: &'a [Trial],
    nontarget_label: u32,
) -> Result<Vec<&'a Trial>> {
    if !kind.uses_resting() {
        if task_trials.is_empty() {
            return Err(Error::EmptyInput {
                context: "reference pool",
            });
        }
        return Ok(task_trials.iter().collect());
    }
    match task {
        TaskKind::MotorImagery => {
            if resting.is_empty() {
                return Err(Error::NoRestingTrials {
                    subject: task_trials.first().map(|t| t.subject).unwrap_or(0),
                });
            }
            Ok(resting.iter().collect())
        }
        TaskKind::Erp => {
            let mut pool = Vec::new();
            for trial in task_trials {
                match trial.label {
                    None => {
                        return Err(Error::LabelsRequired {
                            context: "selecting non-target trials as the ERP resting pool"
                                .to_string(),
                        })
                    }
                    Some(label) if label == nontarget_label => pool.push(trial),
                    Some(_) => {}
                }
            }
            if pool.is_empty() {
                return Err(Error::DegenerateData {
                    context: "no non-target trials available for the reference pool".to_string(),
                });
            }
            Ok(pool)
        }
    }
}

/// Mean target response from labeled trials, or the fallback template when
/// no labeled target is available.
pub fn target_template(
    trials: &[Trial],
    target_label: u32,
    fallback: Option<&Trial>,
) -> Result<Trial> {
    let targets: Vec<Trial> = trials
        .iter()
        .filter(|t| t.label == Some(target_label))
        .cloned()
        .collect();
    if targets.is_empty() {
        return fallback.cloned().ok_or_else(|| Error::LabelsRequired {
            context: "computing the target template".to_string(),
        });
    }
    erp_template(&targets)
}

/// Aligns one subject's trials for the configured pipeline.
///
/// `trials` are the trials to transform; `pool_task` provides the task-trial
/// candidates for the reference (online protocols pass only the seen pool
/// here) and `resting` the resting recordings. For Riemannian alignment on
/// ERP data every trial is augmented with the subject's own target template
/// when `pool_task` has labeled targets, falling back to
/// `template_fallback` otherwise.
pub fn align_subject(
    spec: &PipelineSpec,
    task: TaskKind,
    trials: &[Trial],
    pool_task: &[Trial],
    resting: &[Trial],
    labels: ClassLabels,
    template_fallback: Option<&Trial>,
) -> Result<AlignedSubject> {
    if trials.is_empty() {
        return Err(Error::EmptyInput {
            context: "aligning a subject with no trials",
        });
    }
    let shrink = spec.shrink_for(trials[0].n_channels(), trials[0].n_samples())?;

    match spec.alignment {
        AlignmentSpec::None => Ok(AlignedSubject::Trials(trials.to_vec())),
        AlignmentSpec::Euclidean { reference } => {
            let pool = select_reference_pool(task, reference, pool_task, resting, labels.nontarget)?;
            let pool_owned: Vec<Trial> = pool.into_iter().cloned().collect();
            let matrix = build_reference(&pool_owned, reference, shrink)?;
            Ok(AlignedSubject::Trials(ea_align(trials, &matrix)?))
        }
        AlignmentSpec::Riemannian { reference } => {
            let (work_trials, work_pool) = if task == TaskKind::Erp {
                let template = target_template(pool_task, labels.target, template_fallback)?;
                let augment_all = |set: &[Trial]| -> Result<Vec<Trial>> {
                    set.iter().map(|t| augment_erp(t, &template)).collect()
                };
                (augment_all(trials)?, augment_all(pool_task)?)
            } else {
                (trials.to_vec(), pool_task.to_vec())
            };
            let shrink = spec.shrink_for(work_trials[0].n_channels(), work_trials[0].n_samples())?;
            let pool = select_reference_pool(task, reference, &work_pool, resting, labels.nontarget)?;
            let pool_owned: Vec<Trial> = pool.into_iter().cloned().collect();
            let matrix = build_reference(&pool_owned, reference, shrink)?;
            let covs = work_trials
                .iter()
                .map(|t| covariance(t, shrink))
                .collect::<Result<Vec<_>>>()?;
            let aligned = ra_align(&covs, &matrix)?;
            Ok(AlignedSubject::Covariances(
                aligned
                    .into_iter()
                    .zip(work_trials.iter().map(|t| t.label))
                    .collect(),
            ))
        }
    }
}

/// Trained classification chain ready to score aligned items.
#[derive(Debug)]
pub enum FittedPipeline {
    Mdrm {
        model: MdrmModel,
        /// Training-side augmentation template for ERP trials.
        template: Option<Trial>,
        shrink: ShrinkageParam,
    },
    CspLda {
        filters: CspFilters,
        lda: LdaModel,
    },
    XdawnPcaSvm {
        xdawn: XdawnFilters,
        pca: PcaModel,
        svm: LinearMarginModel,
    },
    PcaSvm {
        pca: PcaModel,
        svm: LinearMarginModel,
    },
}

fn flatten_trial(trial: &Trial) -> Array1<f64> {
    Array1::from_iter(trial.data.iter().cloned())
}

fn labeled_feature_matrix(
    trials: &[Trial],
    features: Vec<Array1<f64>>,
) -> Result<(ndarray::Array2<f64>, Vec<u32>)> {
    let labels = trials
        .iter()
        .map(|t| {
            t.label.ok_or_else(|| Error::LabelsRequired {
                context: "training a classification chain".to_string(),
            })
        })
        .collect::<Result<Vec<u32>>>()?;
    let dim = features.first().map(|f| f.len()).unwrap_or(0);
    let mut matrix = ndarray::Array2::zeros((features.len(), dim));
    for (mut row, f) in matrix.rows_mut().into_iter().zip(&features) {
        row.assign(f);
    }
    Ok((matrix, labels))
}

/// Fits the configured chain on merged aligned training data.
///
/// `seed` drives the stratified cross-validation inside the hinge trade-off
/// search of the max-margin chains.
pub fn fit_pipeline(
    spec: &PipelineSpec,
    task: TaskKind,
    train: &AlignedSubject,
    labels: ClassLabels,
    seed: u64,
) -> Result<FittedPipeline> {
    spec.validate(task)?;
    match (&spec.chain, train) {
        (ModelChain::Mdrm, AlignedSubject::Covariances(items)) => {
            let mut covs = Vec::with_capacity(items.len());
            let mut truth = Vec::with_capacity(items.len());
            for (cov, label) in items {
                covs.push(cov.clone());
                truth.push(label.ok_or_else(|| Error::LabelsRequired {
                    context: "training MDRM on aligned covariances".to_string(),
                })?);
            }
            let model = mdrm_fit(&covs, &truth)?;
            // Shrinkage is irrelevant at predict time: items arrive as
            // covariances already.
            Ok(FittedPipeline::Mdrm {
                model,
                template: None,
                shrink: ShrinkageParam::none(),
            })
        }
        (ModelChain::Mdrm, AlignedSubject::Trials(trials)) => {
            let template = if task == TaskKind::Erp {
                Some(target_template(trials, labels.target, None)?)
            } else {
                None
            };
            let work: Vec<Trial> = match &template {
                Some(tpl) => trials
                    .iter()
                    .map(|t| augment_erp(t, tpl))
                    .collect::<Result<Vec<_>>>()?,
                None => trials.to_vec(),
            };
            let shrink = spec.shrink_for(work[0].n_channels(), work[0].n_samples())?;
            let mut covs = Vec::with_capacity(work.len());
            let mut truth = Vec::with_capacity(work.len());
            for trial in &work {
                covs.push(covariance(trial, shrink)?);
                truth.push(trial.label.ok_or_else(|| Error::LabelsRequired {
                    context: "training MDRM".to_string(),
                })?);
            }
            let model = mdrm_fit(&covs, &truth)?;
            Ok(FittedPipeline::Mdrm {
                model,
                template,
                shrink,
            })
        }
        (ModelChain::CspLda { n_filters }, AlignedSubject::Trials(trials)) => {
            let shrink = spec.shrink_for(trials[0].n_channels(), trials[0].n_samples())?;
            let filters = csp_fit(trials, *n_filters, shrink)?;
            let features = trials
                .iter()
                .map(|t| csp_features(t, &filters))
                .collect::<Result<Vec<_>>>()?;
            let (matrix, truth) = labeled_feature_matrix(trials, features)?;
            let lda = lda_fit(&matrix, &truth)?;
            Ok(FittedPipeline::CspLda { filters, lda })
        }
        (
            ModelChain::XdawnPcaSvm {
                n_components,
                pca_features,
            },
            AlignedSubject::Trials(trials),
        ) => {
            let shrink = spec.shrink_for(trials[0].n_channels(), trials[0].n_samples())?;
            let xdawn = xdawn_fit(trials, *n_components, shrink)?;
            let features = trials
                .iter()
                .map(|t| Ok(flatten_trial(&xdawn_apply(t, &xdawn)?)))
                .collect::<Result<Vec<_>>>()?;
            let (matrix, truth) = labeled_feature_matrix(trials, features)?;
            let pca = pca_fit(&matrix, *pca_features)?;
            let mut reduced = ndarray::Array2::zeros((matrix.nrows(), pca.n_features()));
            for (i, row) in matrix.rows().into_iter().enumerate() {
                reduced.row_mut(i).assign(&pca_apply(&row, &pca)?);
            }
            let selection = select_c(&reduced, &truth, seed)?;
            let svm = svm_fit(&reduced, &truth, selection.c)?;
            Ok(FittedPipeline::XdawnPcaSvm { xdawn, pca, svm })
        }
        (ModelChain::PcaSvm { pca_features }, AlignedSubject::Trials(trials)) => {
            let features: Vec<Array1<f64>> = trials.iter().map(flatten_trial).collect();
            let (matrix, truth) = labeled_feature_matrix(trials, features)?;
            let pca = pca_fit(&matrix, *pca_features)?;
            let mut reduced = ndarray::Array2::zeros((matrix.nrows(), pca.n_features()));
            for (i, row) in matrix.rows().into_iter().enumerate() {
                reduced.row_mut(i).assign(&pca_apply(&row, &pca)?);
            }
            let selection = select_c(&reduced, &truth, seed)?;
            let svm = svm_fit(&reduced, &truth, selection.c)?;
            Ok(FittedPipeline::PcaSvm { pca, svm })
        }
        (_, AlignedSubject::Covariances(_)) => Err(Error::UnsupportedPipeline {
            reason: "feature chains require time-series trials, not covariance matrices"
                .to_string(),
        }),
    }
}

impl FittedPipeline {
    /// Classifies one aligned time-series trial.
    pub fn predict_trial(&self, trial: &Trial) -> Result<u32> {
        match self {
            FittedPipeline::Mdrm {
                model,
                template,
                shrink,
            } => {
                let work = match template {
                    Some(tpl) => augment_erp(trial, tpl)?,
                    None => trial.clone(),
                };
                let cov = covariance(&work, *shrink)?;
                mdrm_predict(&cov, model)
            }
            FittedPipeline::CspLda { filters, lda } => {
                let features = csp_features(trial, filters)?;
                Ok(lda_predict(&features.view(), lda))
            }
            FittedPipeline::XdawnPcaSvm { xdawn, pca, svm } => {
                let features = flatten_trial(&xdawn_apply(trial, xdawn)?);
                let reduced = pca_apply(&features.view(), pca)?;
                Ok(svm_predict(&reduced.view(), svm))
            }
            FittedPipeline::PcaSvm { pca, svm } => {
                let features = flatten_trial(trial);
                let reduced = pca_apply(&features.view(), pca)?;
                Ok(svm_predict(&reduced.view(), svm))
            }
        }
    }

    /// Classifies one aligned covariance matrix (MDRM chains only).
    pub fn predict_covariance(&self, cov: &SpdMatrix) -> Result<u32> {
        match self {
            FittedPipeline::Mdrm { model, .. } => mdrm_predict(cov, model),
            _ => Err(Error::UnsupportedPipeline {
                reason: "only the mdrm chain classifies covariance matrices".to_string(),
            }),
        }
    }

    /// Classifies every item of an aligned subject.
    pub fn predict(&self, subject: &AlignedSubject) -> Result<Vec<u32>> {
        match subject {
            AlignedSubject::Trials(trials) => {
                trials.iter().map(|t| self.predict_trial(t)).collect()
            }
            AlignedSubject::Covariances(items) => items
                .iter()
                .map(|(cov, _)| self.predict_covariance(cov))
                .collect(),
        }
    }
}
