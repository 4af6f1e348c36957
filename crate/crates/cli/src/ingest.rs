//! Probability-file and label-file parsing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use semdist_core::{truncate_top_k, LabelSet, SemanticVector, SparseFeature};

use crate::config::RunConfig;
use crate::CliError;

/// Reads, validates, and truncates one probability file into sparse
/// features, streaming line by line so dense files never sit in memory.
pub fn ingest_features(path: &Path, cfg: &RunConfig) -> Result<Vec<SparseFeature>, CliError> {
    let mut features = Vec::new();
    for_each_vector(path, cfg, |v| {
        features.push(truncate_top_k(&v, cfg.k));
        Ok(())
    })?;
    Ok(features)
}

/// Reads and validates one probability file into dense vectors (kept
/// dense so parameter sweeps can re-truncate at several K values).
pub fn ingest_vectors(path: &Path, cfg: &RunConfig) -> Result<Vec<SemanticVector>, CliError> {
    let mut vectors = Vec::new();
    for_each_vector(path, cfg, |v| {
        vectors.push(v);
        Ok(())
    })?;
    Ok(vectors)
}

/// Streams validated vectors from a probability file.
pub fn for_each_vector(
    path: &Path,
    cfg: &RunConfig,
    mut f: impl FnMut(SemanticVector) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let reader = BufReader::new(File::open(path)?);
    let path_str = path.display().to_string();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let v = parse_prob_line(line, &path_str, lineno, cfg.n_classes)?;
        v.validate(cfg.n_classes, cfg.strict_prob)?;
        f(v)?;
    }
    Ok(())
}

/// One line, either flavor. Dense lines contain commas; everything else is
/// treated as sparse `class:prob` pairs.
fn parse_prob_line(
    line: &str,
    path: &str,
    lineno: usize,
    n_classes: usize,
) -> Result<SemanticVector, CliError> {
    let bad = |msg: String| CliError::Parse {
        path: path.to_owned(),
        line: lineno,
        msg,
    };
    if line.contains(',') {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default();
        check_image_id(id).map_err(bad)?;
        let probs: Vec<f64> = fields
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad probability {s:?}")))
            })
            .collect::<Result<_, _>>()?;
        // Length mismatches are caught by vector validation.
        Ok(SemanticVector::new(id, probs))
    } else {
        let mut tokens = line.split_whitespace();
        let id = tokens.next().unwrap_or_default();
        check_image_id(id).map_err(bad)?;
        let mut probs = vec![0.0; n_classes];
        let mut seen = vec![false; n_classes];
        for token in tokens {
            let (class_s, prob_s) = token
                .split_once(':')
                .ok_or_else(|| bad(format!("bad entry token {token:?}")))?;
            let class: usize = class_s
                .parse()
                .map_err(|_| bad(format!("bad class id {class_s:?}")))?;
            if class == 0 || class > n_classes {
                return Err(bad(format!(
                    "class id {class} outside 1..={n_classes}"
                )));
            }
            if seen[class - 1] {
                return Err(bad(format!("class id {class} repeated")));
            }
            seen[class - 1] = true;
            probs[class - 1] = prob_s
                .parse::<f64>()
                .map_err(|_| bad(format!("bad probability {prob_s:?}")))?;
        }
        Ok(SemanticVector::new(id, probs))
    }
}

fn check_image_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("missing image id".into());
    }
    if id.chars().any(char::is_whitespace) {
        return Err(format!("image id {id:?} contains whitespace"));
    }
    Ok(())
}

/// Reads a label file: `image_id<TAB>label;label;...`, one image per line.
/// An empty label field is a legal empty set.
pub fn ingest_labels(path: &Path) -> Result<HashMap<String, LabelSet>, CliError> {
    let reader = BufReader::new(File::open(path)?);
    let path_str = path.display().to_string();
    let mut labels = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Parse {
            path: path_str.clone(),
            line: lineno,
            msg,
        };
        let (id, field) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected image_id<TAB>labels".into()))?;
        check_image_id(id).map_err(bad)?;
        let set = LabelSet::new(id, field.split(';').filter(|s| !s.is_empty()));
        if labels.insert(id.to_owned(), set).is_some() {
            return Err(CliError::DuplicateImageId(id.to_owned()));
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn cfg(n: usize) -> RunConfig {
        RunConfig {
            n_classes: n,
            k: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn dense_line_parses() {
        let f = write_tmp("img_001,0.5,0.3,0.2\n");
        let vs = ingest_vectors(f.path(), &cfg(3)).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].image_id(), "img_001");
        assert_eq!(vs[0].probs(), &[0.5, 0.3, 0.2]);
    }

    #[test]
    fn sparse_line_expands_with_zeros() {
        let f = write_tmp("img_002 2:0.8 3:0.2\n");
        let vs = ingest_vectors(f.path(), &cfg(4)).unwrap();
        assert_eq!(vs[0].probs(), &[0.0, 0.8, 0.2, 0.0]);
    }

    #[test]
    fn both_flavors_of_the_same_data_agree() {
        let dense = write_tmp("a,0.0,0.7,0.3\nb,0.5,0.0,0.5\n");
        let sparse = write_tmp("a 2:0.7 3:0.3\nb 1:0.5 3:0.5\n");
        let c = cfg(3);
        assert_eq!(
            ingest_features(dense.path(), &c).unwrap(),
            ingest_features(sparse.path(), &c).unwrap()
        );
    }

    #[test]
    fn malformed_probability_is_a_parse_error_with_line_number() {
        let f = write_tmp("ok,0.5,0.5,0.0\nimg,abc,0.5,0.5\n");
        match ingest_vectors(f.path(), &cfg(3)) {
            Err(CliError::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn sparse_rejects_bad_class_ids() {
        for content in ["img 0:0.5\n", "img 5:0.5\n", "img 1:0.5 1:0.5\n", "img x\n"] {
            let f = write_tmp(content);
            assert!(
                matches!(ingest_vectors(f.path(), &cfg(4)), Err(CliError::Parse { .. })),
                "expected parse error for {content:?}"
            );
        }
    }

    #[test]
    fn wrong_dense_length_is_a_validation_error() {
        let f = write_tmp("img,0.5,0.5\n");
        assert!(matches!(
            ingest_vectors(f.path(), &cfg(3)),
            Err(CliError::Feature(_))
        ));
    }

    #[test]
    fn strict_mode_rejects_unnormalized_vectors() {
        let f = write_tmp("img,0.9,0.9,0.0\n");
        let strict = RunConfig {
            strict_prob: true,
            ..cfg(3)
        };
        assert!(matches!(
            ingest_vectors(f.path(), &strict),
            Err(CliError::Feature(_))
        ));
        assert!(ingest_vectors(f.path(), &cfg(3)).is_ok());
    }

    #[test]
    fn labels_parse_including_empty_sets() {
        let f = write_tmp("img_001\tsky;water\nimg_002\t\n");
        let labels = ingest_labels(f.path()).unwrap();
        assert_eq!(labels["img_001"].labels.len(), 2);
        assert!(labels["img_001"].labels.contains("sky"));
        assert!(labels["img_002"].labels.is_empty());
    }

    #[test]
    fn duplicate_label_lines_are_rejected() {
        let f = write_tmp("img\ta\nimg\tb\n");
        assert!(matches!(
            ingest_labels(f.path()),
            Err(CliError::DuplicateImageId(id)) if id == "img"
        ));
    }

    #[test]
    fn label_line_without_tab_is_a_parse_error() {
        let f = write_tmp("img sky\n");
        assert!(matches!(
            ingest_labels(f.path()),
            Err(CliError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn exit_codes_distinguish_parse_from_validation() {
        let parse = CliError::Parse {
            path: "x".into(),
            line: 1,
            msg: "m".into(),
        };
        assert_eq!(parse.exit_code(), 2);
        let validation = CliError::DuplicateImageId("img".into());
        assert_eq!(validation.exit_code(), 1);
    }
}
