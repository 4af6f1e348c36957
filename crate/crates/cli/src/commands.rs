//! Implementations behind the `semdist` subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use semdist_core::{
    evaluate_run, generate, truncate_top_k, FeatureIndex, PairScore, RunReport, SemanticVector,
    SparseFeature, SynthConfig, SynthImage,
};

use crate::config::RunConfig;
use crate::ingest::{ingest_features, ingest_labels, ingest_vectors};
use crate::CliError;

/// Where a query feature comes from.
#[derive(Debug, Clone)]
pub enum QuerySource {
    /// An image already in the index (excluded from its own results).
    MemberId(String),
    /// External probability file holding exactly one vector.
    VectorFile(PathBuf),
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(content.as_bytes())?;
            w.flush()?;
        }
        None => {
            print!("{content}");
        }
    }
    Ok(())
}

/// Parses and validates a probability file, reporting what it holds.
pub fn cmd_ingest(cfg: &RunConfig, probs: &Path, out: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let mut count = 0usize;
    crate::ingest::for_each_vector(probs, cfg, |_| {
        count += 1;
        Ok(())
    })?;
    let strict = if cfg.strict_prob { "on" } else { "off" };
    write_output(
        out,
        &format!(
            "ok: {count} vectors, n_classes={}, strict={strict}\n",
            cfg.n_classes
        ),
    )
}

/// Ingests a probability file, truncates to top-K, and serializes the index.
pub fn cmd_build_index(cfg: &RunConfig, probs: &Path, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let features = ingest_features(probs, cfg)?;
    let index = FeatureIndex::build(features, cfg.distance_params(), cfg.n_classes)?;
    let mut w = BufWriter::new(File::create(out)?);
    index.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(cfg: &RunConfig, path: &Path) -> Result<FeatureIndex, CliError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(FeatureIndex::read_from(reader, cfg.distance_params())?)
}

/// Ranks the whole database against one query and prints the top `p` as
/// `rank<TAB>image_id<TAB>score` lines, rejected items as `rejected:<shared>`.
pub fn cmd_query(
    cfg: &RunConfig,
    index_path: &Path,
    source: &QuerySource,
    out: Option<&Path>,
) -> Result<(), CliError> {
    cfg.validate()?;
    let index = load_index(cfg, index_path)?;
    let query: SparseFeature = match source {
        QuerySource::MemberId(id) => index
            .feature(id)
            .cloned()
            .ok_or_else(|| CliError::Invalid(format!("image id {id:?} not in index")))?,
        QuerySource::VectorFile(path) => {
            let vectors = ingest_vectors(path, cfg)?;
            let [v]: [SemanticVector; 1] = vectors.try_into().map_err(|vs: Vec<_>| {
                CliError::Invalid(format!(
                    "query vector file must hold exactly one vector, found {}",
                    vs.len()
                ))
            })?;
            truncate_top_k(&v, index.params().k)
        }
    };
    let ranked = index.query(&query, cfg.p);
    let mut content = String::new();
    for (rank, item) in ranked.items.iter().enumerate() {
        match item.outcome {
            PairScore::Scored(s) => {
                content.push_str(&format!("{}\t{}\t{:.6}\n", rank + 1, item.image_id, s.0))
            }
            PairScore::Rejected { shared } => content.push_str(&format!(
                "{}\t{}\trejected:{shared}\n",
                rank + 1,
                item.image_id
            )),
        }
    }
    write_output(out, &content)
}

/// Leave-one-out evaluation: every database image queries the rest.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    index_path: &Path,
    labels_path: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    cfg.validate()?;
    let index = load_index(cfg, index_path)?;
    let labels = ingest_labels(labels_path)?;
    let report = evaluate_all(cfg, &index, &labels)?;
    write_output(out, &report.to_tsv())
}

fn evaluate_all(
    cfg: &RunConfig,
    index: &FeatureIndex,
    labels: &std::collections::HashMap<String, semdist_core::LabelSet>,
) -> Result<RunReport, CliError> {
    let ids: Vec<String> = index
        .features()
        .iter()
        .map(|f| f.image_id().to_owned())
        .collect();
    Ok(evaluate_run(
        index,
        &ids,
        labels,
        cfg.p,
        cfg.relevance,
        cfg.workers,
    )?)
}

/// One evaluation run per K with everything else fixed; emits a CSV with a
/// `k,mean_ndcg,mean_acg` header.
pub fn cmd_sweep_k(
    cfg: &RunConfig,
    probs: &Path,
    labels_path: &Path,
    k_values: &[usize],
    out: Option<&Path>,
) -> Result<(), CliError> {
    cfg.validate()?;
    if k_values.is_empty() {
        return Err(CliError::Invalid("sweep needs at least one K value".into()));
    }
    let vectors = ingest_vectors(probs, cfg)?;
    let labels = ingest_labels(labels_path)?;
    let mut csv = String::from("k,mean_ndcg,mean_acg\n");
    for &k in k_values {
        let run_cfg = RunConfig { k, ..*cfg };
        run_cfg.validate()?;
        let features: Vec<SparseFeature> =
            vectors.iter().map(|v| truncate_top_k(v, k)).collect();
        let index = FeatureIndex::build(features, run_cfg.distance_params(), cfg.n_classes)?;
        let report = evaluate_all(&run_cfg, &index, &labels)?;
        csv.push_str(&format!(
            "{k},{:.6},{:.6}\n",
            report.mean_ndcg, report.mean_acg
        ));
    }
    write_output(out, &csv)
}

/// One evaluation run per m1/m2 ratio at fixed K; emits a CSV with an
/// `m_ratio,mean_ndcg,mean_acg` header.
pub fn cmd_sweep_m(
    cfg: &RunConfig,
    probs: &Path,
    labels_path: &Path,
    ratios: &[f64],
    out: Option<&Path>,
) -> Result<(), CliError> {
    cfg.validate()?;
    if ratios.is_empty() {
        return Err(CliError::Invalid(
            "sweep needs at least one ratio value".into(),
        ));
    }
    let features = ingest_features(probs, cfg)?;
    let labels = ingest_labels(labels_path)?;
    let mut csv = String::from("m_ratio,mean_ndcg,mean_acg\n");
    for &ratio in ratios {
        let run_cfg = RunConfig {
            m_ratio: ratio,
            ..*cfg
        };
        run_cfg.validate()?;
        let index = FeatureIndex::build(
            features.clone(),
            run_cfg.distance_params(),
            cfg.n_classes,
        )?;
        let report = evaluate_all(&run_cfg, &index, &labels)?;
        csv.push_str(&format!(
            "{ratio},{:.6},{:.6}\n",
            report.mean_ndcg, report.mean_acg
        ));
    }
    write_output(out, &csv)
}

/// Generates a planted-cluster corpus and writes the probability file
/// (sparse flavor) and label file. Deterministic given the seed.
pub fn cmd_gen_synth(
    cfg: &RunConfig,
    synth: &SynthConfig,
    out_probs: &Path,
    out_labels: &Path,
) -> Result<(), CliError> {
    cfg.validate()?;
    let images = generate(synth)?;
    write_probability_file(out_probs, &images)?;
    write_label_file(out_labels, &images)?;
    Ok(())
}

pub fn write_probability_file(path: &Path, images: &[SynthImage]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for img in images {
        write!(w, "{}", img.feature.image_id())?;
        for &(class, prob) in img.feature.entries() {
            write!(w, " {class}:{prob}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_label_file(path: &Path, images: &[SynthImage]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for img in images {
        let joined: Vec<&str> = img.labels.labels.iter().map(String::as_str).collect();
        writeln!(w, "{}\t{}", img.labels.image_id, joined.join(";"))?;
    }
    w.flush()?;
    Ok(())
}

/// Synth settings assembled from CLI flags.
pub fn synth_config(
    cfg: &RunConfig,
    clusters: usize,
    per_cluster: usize,
    overlap: usize,
    secondary_groups: usize,
) -> SynthConfig {
    SynthConfig {
        n_classes: cfg.n_classes,
        k: cfg.k,
        clusters,
        per_cluster,
        overlap,
        seed: cfg.seed,
        secondary_groups,
    }
}
