//! Exact-match evaluation, per-suffix recall and the nonsense-stem probe.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingTable, Instance, LexiconMode};
use crate::error::{Error, Result};
use crate::model::{Model, Prediction};

/// Anything that maps an instance to a derived form.
pub trait Predictor: Sync {
    fn name(&self) -> String;

    fn predict(&self, inst: &Instance) -> Result<Prediction>;

    /// Whether the predictor can produce forms for stems never seen in training.
    fn supports_split_lexicon(&self) -> bool {
        true
    }
}

/// A trained model together with the word vectors it reads.
pub struct NeuralPredictor<'a> {
    pub model: &'a Model,
    pub embeddings: &'a EmbeddingTable,
}

impl Predictor for NeuralPredictor<'_> {
    fn name(&self) -> String {
        self.model.config().variant.name()
    }

    fn predict(&self, inst: &Instance) -> Result<Prediction> {
        self.model.predict(inst, self.embeddings)
    }
}

/// Fraction of instances whose greedy prediction equals the gold form.
pub fn exact_match_accuracy(model: &Model, emb: &EmbeddingTable, instances: &[Instance]) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let correct = instances
        .par_iter()
        .map(|inst| model.predict(inst, emb).map(|p| usize::from(p.form == inst.target)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / instances.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub predictor: String,
    pub lexicon: LexiconMode,
    pub instances: usize,
    /// Evaluation instances whose stem occurs in the training data.
    pub stems_seen_in_train: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: usize,
    pub base: String,
    pub suffix: String,
    pub gold: String,
    pub predicted: String,
    pub correct: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub predictions: Vec<PredictionRecord>,
    pub correct: usize,
    pub accuracy: f64,
    pub per_suffix_recall: BTreeMap<String, f64>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ReportLine<'a> {
    Header(&'a ReportHeader),
    Prediction(&'a PredictionRecord),
    Summary {
        correct: usize,
        total: usize,
        accuracy: f64,
        per_suffix_recall: &'a BTreeMap<String, f64>,
    },
}

impl EvalReport {
    /// One JSON object per line: header, predictions in id order, summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |l: ReportLine| {
            let _ = writeln!(out, "{}", serde_json::to_string(&l).expect("report serializes"));
        };
        line(ReportLine::Header(&self.header));
        for p in &self.predictions {
            line(ReportLine::Prediction(p));
        }
        line(ReportLine::Summary {
            correct: self.correct,
            total: self.predictions.len(),
            accuracy: self.accuracy,
            per_suffix_recall: &self.per_suffix_recall,
        });
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Recall per gold suffix label; labels without gold instances are omitted.
pub fn per_suffix_recall(predictions: &[PredictionRecord]) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in predictions {
        let t = tally.entry(p.suffix.as_str()).or_default();
        t.0 += usize::from(p.correct);
        t.1 += 1;
    }
    tally
        .into_iter()
        .map(|(s, (c, n))| (s.to_owned(), c as f64 / n as f64))
        .collect()
}

/// Runs `predictor` over `instances` and scores by exact match.
///
/// `train_stems` drives the lexicon audit: in shared mode every evaluation
/// stem must occur in training, in split mode none may.
pub fn evaluate<P: Predictor + ?Sized>(
    predictor: &P,
    instances: &[Instance],
    mode: LexiconMode,
    train_stems: &HashSet<&str>,
) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset("no evaluation instances".into()));
    }
    if mode == LexiconMode::Split && !predictor.supports_split_lexicon() {
        return Err(Error::Unsupported(format!(
            "{} only chooses among forms seen in training and cannot be evaluated on a split lexicon",
            predictor.name()
        )));
    }
    let seen = instances
        .iter()
        .filter(|i| train_stems.contains(i.base.as_str()))
        .count();
    let audit_ok = match mode {
        LexiconMode::Shared => seen == instances.len(),
        LexiconMode::Split => seen == 0,
    };
    if !audit_ok {
        return Err(Error::Config(format!(
            "lexicon audit failed: {seen} of {} evaluation stems occur in training, \
             inconsistent with a {mode} lexicon",
            instances.len()
        )));
    }

    let predictions = instances
        .par_iter()
        .enumerate()
        .map(|(id, inst)| {
            let p = predictor.predict(inst)?;
            Ok(PredictionRecord {
                id,
                base: inst.base.clone(),
                suffix: inst.suffix.clone(),
                gold: inst.target.clone(),
                correct: p.form == inst.target,
                predicted: p.form,
                truncated: p.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().filter(|p| p.correct).count();
    Ok(EvalReport {
        header: ReportHeader {
            predictor: predictor.name(),
            lexicon: mode,
            instances: instances.len(),
            stems_seen_in_train: seen,
        },
        per_suffix_recall: per_suffix_recall(&predictions),
        accuracy: correct as f64 / predictions.len() as f64,
        correct,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub stem: String,
    pub form: String,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub context_id: usize,
    /// The form that originally filled the slot.
    pub original: String,
    pub outputs: Vec<ProbeOutput>,
}

/// Substitutes each stem as the base form of each template context and
/// records the generated derivations.
pub fn nonsense_probe(
    model: &Model,
    emb: &EmbeddingTable,
    templates: &[Instance],
    stems: &[String],
) -> Result<Vec<ProbeRow>> {
    if let Some(s) = stems.iter().find(|s| s.is_empty()) {
        return Err(Error::Config(format!("empty probe stem `{s}`")));
    }
    templates
        .par_iter()
        .enumerate()
        .map(|(context_id, t)| {
            let outputs = stems
                .iter()
                .map(|stem| {
                    let inst = Instance {
                        base: stem.clone(),
                        ..t.clone()
                    };
                    let p = model.predict(&inst, emb)?;
                    Ok(ProbeOutput {
                        stem: stem.clone(),
                        form: p.form,
                        truncated: p.truncated,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProbeRow {
                context_id,
                original: t.target.clone(),
                outputs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl Predictor for Echo {
        fn name(&self) -> String {
            "echo".into()
        }

        fn predict(&self, inst: &Instance) -> Result<Prediction> {
            Ok(Prediction {
                form: inst.base.clone(),
                truncated: false,
            })
        }
    }

    struct Oracle;

    impl Predictor for Oracle {
        fn name(&self) -> String {
            "oracle".into()
        }

        fn predict(&self, inst: &Instance) -> Result<Prediction> {
            Ok(Prediction {
                form: inst.target.clone(),
                truncated: false,
            })
        }

        fn supports_split_lexicon(&self) -> bool {
            false
        }
    }

    fn inst(base: &str, target: &str, suffix: &str) -> Instance {
        Instance {
            left: vec!["a".into()],
            right: vec!["b".into()],
            base: base.into(),
            target: target.into(),
            pos: "NOUN".into(),
            suffix: suffix.into(),
        }
    }

    fn sample() -> Vec<Instance> {
        vec![
            inst("walk", "walk", "NULL"),
            inst("walk", "walker", "-er"),
            inst("move", "movement", "-ment"),
            inst("move", "move", "NULL"),
            inst("move", "mover", "-er"),
        ]
    }

    fn stems_of(xs: &[Instance]) -> HashSet<&str> {
        xs.iter().map(|i| i.base.as_str()).collect()
    }

    #[test]
    fn perfect_predictor() {
        let d = sample();
        let r = evaluate(&Oracle, &d, LexiconMode::Shared, &stems_of(&d)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_suffix_recall.values().all(|&v| v == 1.0));
    }

    #[test]
    fn base_copier_scores_identity_fraction() {
        let d = sample();
        let r = evaluate(&Echo, &d, LexiconMode::Shared, &stems_of(&d)).unwrap();
        let identity = d.iter().filter(|i| i.suffix == "NULL").count();
        assert_eq!(r.correct, identity);
        assert_eq!(r.per_suffix_recall["NULL"], 1.0);
        assert_eq!(r.per_suffix_recall["-er"], 0.0);
        let recount = r.predictions.iter().filter(|p| p.gold == p.predicted).count();
        assert_eq!(recount as f64 / d.len() as f64, r.accuracy);
    }

    #[test]
    fn audits_lexicon() {
        let d = sample();
        let none = HashSet::new();
        assert!(evaluate(&Echo, &d, LexiconMode::Shared, &none).is_err());
        assert!(evaluate(&Echo, &d, LexiconMode::Split, &stems_of(&d)).is_err());
        let r = evaluate(&Echo, &d, LexiconMode::Split, &none).unwrap();
        assert_eq!(r.header.stems_seen_in_train, 0);
    }

    #[test]
    fn refuses_unsupported_split() {
        let d = sample();
        assert!(matches!(
            evaluate(&Oracle, &d, LexiconMode::Split, &HashSet::new()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn empty_evaluation_rejected() {
        assert!(evaluate(&Echo, &[], LexiconMode::Shared, &HashSet::new()).is_err());
    }

    #[test]
    fn jsonl_layout() {
        let d = sample();
        let r = evaluate(&Echo, &d, LexiconMode::Shared, &stems_of(&d)).unwrap();
        let text = r.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), d.len() + 2);
        assert!(lines[0].starts_with(r#"{"type":"header","predictor":"echo""#));
        assert!(lines[1].starts_with(r#"{"type":"prediction","id":0,"#));
        assert!(lines.last().unwrap().contains(r#""accuracy":0.4"#));
    }
}
