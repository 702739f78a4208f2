use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use craft_core::clustering::{cluster_count_scan, hierarchy_tree, knee};
use craft_core::data_model::{Bundle, SourceRecord};
use craft_core::evaluation::{
    accuracy, cluster_means, confusion, default_thresholds, feature_hierarchy, majority_accuracy, matched_mask,
    threshold_curve, Accuracy, ConfusionMatrix, CorrectMask,
};
use craft_core::features::{compute_features_with, FeatureVector, FEATURE_NAMES};
use craft_core::pipeline::{cluster_features, feature_matrix, ClusterStage};
use craft_core::spectra_prep::{separate_with, SplitDecision};
use craft_core::synthgen::{catalog, generate_dataset, Jitter};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::reports::{self, ClusterReport, Scan};
use crate::settings::Settings;
use crate::staging::Staging;

/// Order-preserving parallel map on a pool of `jobs` threads.
fn par_map<T: Sync, U: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Result<Vec<U>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_bundle(path: &Path) -> Result<Bundle> {
    Bundle::load(path).with_context(|| format!("loading bundle {}", path.display()))
}

pub fn gen(out: &Path, s: &Settings) -> Result<()> {
    let c = catalog();
    let archetypes = if s.with_split { c.archetypes.clone() } else { c.single_mechanism() };
    let (bundle, labels) = generate_dataset(&archetypes, s.per_type, &c.setup, s.seed, &Jitter::default())?;
    let mut st = Staging::new(out)?;
    st.write("bundle.json", &bundle.to_json()?)?;
    st.write_json("labels.json", &labels)?;
    st.commit("gen", s, &[])?;
    Ok(())
}

#[derive(Serialize)]
struct SeparationEntry {
    id: String,
    decision: Option<SplitDecision>,
    error: Option<String>,
    records: Vec<String>,
}

fn separate_all(records: &[SourceRecord], s: &Settings) -> Result<(Vec<SourceRecord>, Vec<SeparationEntry>)> {
    let config = s.separation();
    let results = par_map(s.jobs, records, |r| separate_with(r, &config))?;
    let mut out = Vec::new();
    let mut log = Vec::new();
    for (r, res) in records.iter().zip(results) {
        let (decision, error, parts) = match res {
            Ok(sep) => (Some(sep.decision), None, sep.records),
            Err(e) => (None, Some(e.to_string()), vec![r.clone()]),
        };
        log.push(SeparationEntry {
            id: r.id.clone(),
            decision,
            error,
            records: parts.iter().map(|p| p.id.clone()).collect(),
        });
        out.extend(parts);
    }
    Ok((out, log))
}

pub fn prep(input: &Path, out: &Path, s: &Settings) -> Result<()> {
    let mut bundle = load_bundle(input)?;
    let (records, log) = separate_all(&bundle.sources, s)?;
    bundle.sources = records;
    let mut st = Staging::new(out)?;
    st.write("prepared.json", &bundle.to_json()?)?;
    st.write_json("separation.json", &log)?;
    st.commit("prep", s, &[input])?;
    Ok(())
}

fn extract(records: &[SourceRecord], s: &Settings) -> Result<Vec<FeatureVector>> {
    let config = s.features();
    par_map(s.jobs, records, |r| compute_features_with(r, &config))
}

fn write_features(st: &mut Staging, features: &[FeatureVector]) -> Result<()> {
    st.write("features.csv", &reports::features_csv(features)?)?;
    st.write_json("features.json", features)
}

pub fn features(input: &Path, out: &Path, s: &Settings) -> Result<()> {
    let bundle = load_bundle(input)?;
    let fv = extract(&bundle.sources, s)?;
    let mut st = Staging::new(out)?;
    write_features(&mut st, &fv)?;
    st.commit("features", s, &[input])?;
    Ok(())
}

fn cluster_stage(features: &[FeatureVector], s: &Settings) -> Result<(ClusterStage, Option<Scan>)> {
    let stage = cluster_features(features, &s.pipeline())?;
    let scan = match s.scan {
        Some((a, b)) => {
            let sizes: Vec<usize> = (a..=b).collect();
            let points = cluster_count_scan(&stage.reduced.scores, &sizes)?;
            Some(Scan { knee: knee(&points), points })
        }
        None => None,
    };
    Ok((stage, scan))
}

fn write_clusters(st: &mut Staging, report: &ClusterReport) -> Result<()> {
    st.write_json("clusters.json", report)?;
    st.write_json("hierarchy.json", &hierarchy_tree(&report.model))?;
    if let Some(scan) = &report.scan {
        st.write("scan.csv", &reports::scan_csv(&scan.points)?)?;
    }
    Ok(())
}

pub fn cluster(input: &Path, out: &Path, s: &Settings) -> Result<()> {
    let fv: Vec<FeatureVector> = read_json(input)?;
    let (stage, scan) = cluster_stage(&fv, s)?;
    let ids: Vec<String> = fv.iter().map(|f| f.id.clone()).collect();
    let mut st = Staging::new(out)?;
    write_clusters(&mut st, &ClusterReport::new(&ids, &stage, scan))?;
    st.commit("cluster", s, &[input])?;
    Ok(())
}

/// Where per-source correctness comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    /// Expert mask file.
    Mask,
    /// Best one-to-one label/cluster pairing (diagnostic).
    Matched,
}

pub struct EvalInputs<'a> {
    pub labels: &'a Path,
    pub mask: Option<&'a Path>,
    pub matched: bool,
}

#[derive(Serialize)]
struct ConfusionReport<'a> {
    matrix: &'a ConfusionMatrix,
    correctness: Option<Correctness>,
    mask: Option<&'a CorrectMask>,
}

#[derive(Serialize)]
struct EvaluationReport {
    n_labelled: usize,
    n_unlabelled: usize,
    correctness: Option<Correctness>,
    accuracy: Option<Accuracy>,
    percent: Option<f64>,
    /// Each cluster credited with its most frequent label.
    majority_accuracy: Accuracy,
}

/// Label of each source; split sub-sources fall back to their parent's.
fn source_labels(ids: &[String], labels: &BTreeMap<String, String>) -> Vec<Option<String>> {
    ids.iter()
        .map(|id| {
            labels
                .get(id)
                .or_else(|| id.rsplit_once('#').and_then(|(parent, _)| labels.get(parent)))
                .cloned()
        })
        .collect()
}

fn evaluate_into(
    st: &mut Staging,
    report: &ClusterReport,
    features: Option<&[FeatureVector]>,
    inputs: &EvalInputs,
    s: &Settings,
) -> Result<()> {
    let label_map: BTreeMap<String, String> = read_json(inputs.labels)?;
    let labels = source_labels(&report.ids(), &label_map);
    let model = &report.model;
    let cm = confusion(&labels, model)?;
    let (mask, kind) = match (inputs.mask, inputs.matched) {
        (Some(path), _) => (Some(CorrectMask::from_json(&std::fs::read_to_string(path)?)?), Some(Correctness::Mask)),
        (None, true) => (Some(matched_mask(&cm)?), Some(Correctness::Matched)),
        (None, false) => (None, None),
    };
    st.write("confusion.csv", &reports::confusion_csv(&cm)?)?;
    st.write_json("confusion.json", &ConfusionReport { matrix: &cm, correctness: kind, mask: mask.as_ref() })?;

    let acc = match &mask {
        Some(mask) => {
            let acc = accuracy(&cm, &mask.cells(&cm)?)?;
            let (conf, ok): (Vec<f64>, Vec<bool>) = labels
                .iter()
                .zip(&model.labels)
                .zip(&model.confidence)
                .filter_map(|((l, c), p)| l.as_ref().map(|l| (*p, mask.is_correct(l, *c))))
                .unzip();
            let curve = threshold_curve(&conf, &ok, &default_thresholds(s.thresholds))?;
            st.write("threshold.csv", &reports::threshold_csv(&curve)?)?;
            Some(acc)
        }
        None => None,
    };
    let n_labelled = labels.iter().flatten().count();
    st.write_json(
        "evaluation.json",
        &EvaluationReport {
            n_labelled,
            n_unlabelled: labels.len() - n_labelled,
            correctness: kind,
            percent: acc.map(|a| a.percent()),
            accuracy: acc,
            majority_accuracy: majority_accuracy(&cm)?,
        },
    )?;

    if let Some(fv) = features {
        if fv.iter().map(|f| &f.id).ne(report.sources.iter().map(|s| &s.id)) {
            bail!("feature rows do not match the clustered sources");
        }
        let matrix = feature_matrix(fv);
        st.write_json("dendrogram.json", &feature_hierarchy(&matrix, &FEATURE_NAMES)?)?;
        st.write_json("cluster_means.json", &cluster_means(&matrix, model)?)?;
    }
    Ok(())
}

pub fn evaluate(
    clusters: &Path,
    features: Option<&Path>,
    inputs: &EvalInputs,
    out: &Path,
    s: &Settings,
) -> Result<()> {
    let report: ClusterReport = read_json(clusters)?;
    let fv: Option<Vec<FeatureVector>> = features.map(read_json).transpose()?;
    let mut st = Staging::new(out)?;
    evaluate_into(&mut st, &report, fv.as_deref(), inputs, s)?;
    let mut used: Vec<&Path> = vec![clusters, inputs.labels];
    used.extend(features);
    used.extend(inputs.mask);
    st.commit("evaluate", s, &used)?;
    Ok(())
}

pub fn pipeline(input: &Path, eval: Option<&EvalInputs>, out: &Path, s: &Settings) -> Result<()> {
    let bundle = load_bundle(input)?;
    let mut st = Staging::new(out)?;
    let records = if s.separate {
        let (records, log) = separate_all(&bundle.sources, s)?;
        st.write_json("separation.json", &log)?;
        records
    } else {
        bundle.sources
    };
    let fv = extract(&records, s)?;
    write_features(&mut st, &fv)?;
    let (stage, scan) = cluster_stage(&fv, s)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let report = ClusterReport::new(&ids, &stage, scan);
    write_clusters(&mut st, &report)?;
    let mut used: Vec<PathBuf> = vec![input.to_path_buf()];
    if let Some(e) = eval {
        evaluate_into(&mut st, &report, Some(&fv), e, s)?;
        used.push(e.labels.to_path_buf());
        used.extend(e.mask.map(Path::to_path_buf));
    }
    let used: Vec<&Path> = used.iter().map(PathBuf::as_path).collect();
    st.commit("pipeline", s, &used)?;
    Ok(())
}
