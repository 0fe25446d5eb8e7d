use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sleepstage::cohort::{format_cohort_report, select_cohort, split_subjects, CohortCandidate};
use sleepstage::eval_report::{
    accuracy, cdf_csv, cohens_kappa, confusion_csv, confusion_matrix, format_confusion, format_importance,
    format_subject_table, importance_csv, per_subject_cdf, permutation_importance, rank_cases, subject_csv,
    ConfusionMatrix, SubjectScore,
};
use sleepstage::feature_registry::{fit_normalization, FeatureManifest, FeatureMatrix, RegistryError};
use sleepstage::model_blstm::{predict, train, Checkpoint, Sequence};
use sleepstage::pipeline::{
    extract_features, preprocess_record, to_sequence, PipelineConfig, PipelineError, Preprocessed,
};
use sleepstage::signal_io::{
    read_edf, read_feature_matrix, read_hypnogram, read_rr_csv, read_subject_metadata, read_trace_csv, write_edf,
    write_feature_matrix, write_hypnogram, write_rr_csv, write_subject_metadata, write_trace_csv, AnyHypnogram,
    Hypnogram, SignalTrace, SubjectMeta, SubjectRecord,
};
use sleepstage::synth_oracle::generate_subject;
use sleepstage::Stage;

use crate::error::CliError;
use crate::run::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SubjectSet {
    Train,
    Test,
    All,
}

fn subject_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
}

fn lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn id_list(ids: &[String]) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}

/// Subject ids with a file `dir/{id}{suffix}`, sorted.
fn ids_in(dir: &Path, suffix: &str) -> Result<Vec<String>, CliError> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(Vec::new());
    };
    let mut ids = Vec::new();
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(suffix) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn synth(cfg: &PipelineConfig, run: &Run, subjects: Option<usize>, epochs: Option<usize>) -> Result<(), CliError> {
    let n = subjects.unwrap_or(cfg.synth.n_subjects);
    let n_epochs = epochs.unwrap_or(cfg.synth.n_epochs);
    let metas: Vec<SubjectMeta> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<SubjectMeta, CliError> {
            let id = format!("syn{i:03}");
            let s = generate_subject(subject_seed(cfg.seed, i), &cfg.synth.profile, n_epochs, &id)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = &s.record;
            let abdomen = r.breath_abdomen.as_ref().expect("synthetic subjects carry both belts");
            run.write(
                &format!("synth/{id}.edf"),
                &write_edf(&[r.ecg.clone(), r.breath_chest.clone(), abdomen.clone()], 1.0)?,
            )?;
            if let Some(AnyHypnogram::Six(h)) = &r.hypnogram {
                run.write(&format!("synth/{id}.hyp"), write_hypnogram(h).as_bytes())?;
            }
            run.write(&format!("synth/{id}.truth.hyp"), write_hypnogram(&s.truth).as_bytes())?;
            Ok(SubjectMeta {
                subject_id: id.clone(),
                ahi: r.ahi,
                edf_path: format!("{id}.edf"),
                hypnogram_path: Some(format!("{id}.hyp")),
                ecg_label: r.ecg.channel_label.clone(),
                chest_label: r.breath_chest.channel_label.clone(),
                abdomen_label: Some(abdomen.channel_label.clone()),
            })
        })
        .collect::<Result<_, _>>()?;
    run.write("synth/subjects.jsonl", write_subject_metadata(&metas).as_bytes())?;
    println!(
        "wrote {n} synthetic subjects of {n_epochs} epochs to {}",
        run.path("synth").display()
    );
    Ok(())
}

/// Subject metadata with paths resolved against the metadata file.
fn subject_list(run: &Run, explicit: Option<&Path>) -> Result<Vec<SubjectMeta>, CliError> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => ["ingest/subjects.jsonl", "synth/subjects.jsonl"]
            .iter()
            .map(|r| run.path(r))
            .find(|p| p.exists())
            .ok_or_else(|| {
                CliError::Data("no subject metadata found; run ingest or synth first, or pass --metadata".into())
            })?,
    };
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &str| -> String {
        let p = PathBuf::from(p);
        if p.is_absolute() { p } else { base.join(p) }.display().to_string()
    };
    let mut metas = read_subject_metadata(&run.read_string(&path)?)?;
    for m in &mut metas {
        m.edf_path = resolve(&m.edf_path);
        m.hypnogram_path = m.hypnogram_path.as_deref().map(resolve);
    }
    Ok(metas)
}

fn load_record(cfg: &PipelineConfig, run: &Run, meta: &SubjectMeta) -> Result<SubjectRecord, CliError> {
    let id = &meta.subject_id;
    let mut traces = read_edf(&run.read(Path::new(&meta.edf_path))?).map_err(|e| CliError::from(e).context(id))?;
    let mut take = |label: &str| -> Result<SignalTrace, CliError> {
        let k = traces.iter().position(|t| t.channel_label == label).ok_or_else(|| {
            CliError::Data(format!(
                "subject {id}: channel `{label}` not found in {}",
                meta.edf_path
            ))
        })?;
        Ok(traces.swap_remove(k))
    };
    let ecg = take(&meta.ecg_label)?;
    let breath_chest = take(&meta.chest_label)?;
    let breath_abdomen = meta.abdomen_label.as_deref().map(&mut take).transpose()?;
    let hypnogram = match &meta.hypnogram_path {
        Some(p) => Some(
            read_hypnogram(&run.read_string(Path::new(p))?, cfg.epoch_len_s)
                .map_err(|e| CliError::from(e).context(id))?,
        ),
        None => None,
    };
    Ok(SubjectRecord {
        subject_id: id.clone(),
        ecg,
        breath_chest,
        breath_abdomen,
        hypnogram,
        ahi: meta.ahi,
    })
}

pub fn ingest(cfg: &PipelineConfig, run: &Run, metadata: &Path) -> Result<(), CliError> {
    let metas = subject_list(run, Some(metadata))?;
    let rows: Vec<(SubjectMeta, String)> = metas
        .par_iter()
        .map(|m| -> Result<_, CliError> {
            let r = load_record(cfg, run, m)?;
            let mut m = m.clone();
            for p in std::iter::once(&mut m.edf_path).chain(m.hypnogram_path.as_mut()) {
                *p = fs::canonicalize(&*p)?.display().to_string();
            }
            let row = format!(
                "{}\t{:.1}\t{}\t{}\t{}\t{}\t{}\n",
                r.subject_id,
                r.span_s(),
                r.ecg.sample_rate_hz,
                r.breath_chest.sample_rate_hz,
                r.breath_abdomen.is_some(),
                r.hypnogram.as_ref().map_or(0, |h| h.len()),
                r.ahi.map_or("NA".to_string(), |a| a.to_string()),
            );
            Ok((m, row))
        })
        .collect::<Result<_, _>>()?;
    let mut summary = String::from("subject\tspan_s\tecg_hz\tresp_hz\tabdomen\tepochs\tahi\n");
    rows.iter().for_each(|(_, r)| summary.push_str(r));
    let metas: Vec<SubjectMeta> = rows.into_iter().map(|(m, _)| m).collect();
    run.write("ingest/subjects.jsonl", write_subject_metadata(&metas).as_bytes())?;
    run.write("ingest/summary.tsv", summary.as_bytes())?;
    println!("ingested {} subjects", metas.len());
    Ok(())
}

pub fn preprocess(cfg: &PipelineConfig, run: &Run, metadata: Option<&Path>) -> Result<(), CliError> {
    let metas = subject_list(run, metadata)?;
    metas.par_iter().try_for_each(|m| -> Result<(), CliError> {
        let id = &m.subject_id;
        let record = load_record(cfg, run, m)?;
        let pre = preprocess_record(&record).map_err(|e| CliError::from(e).context(format!("subject {id}")))?;
        let mut buf = Vec::new();
        write_rr_csv(&pre.rr, &mut buf)?;
        run.write(&format!("preprocess/{id}.rr.csv"), &buf)?;
        buf.clear();
        write_trace_csv(&[&pre.chest], &mut buf)?;
        run.write(&format!("preprocess/{id}.chest.csv"), &buf)?;
        if let Some(abd) = &pre.abdomen {
            buf.clear();
            write_trace_csv(&[abd], &mut buf)?;
            run.write(&format!("preprocess/{id}.abdomen.csv"), &buf)?;
        }
        if let Some(h) = &record.hypnogram {
            run.write(
                &format!("preprocess/{id}.labels.hyp"),
                write_hypnogram(&h.to_four_class()).as_bytes(),
            )?;
        }
        log::info!("{id}: {} RR intervals", pre.rr.len());
        Ok(())
    })?;
    println!("preprocessed {} subjects", metas.len());
    Ok(())
}

fn read_single_trace(run: &Run, path: &Path) -> Result<SignalTrace, CliError> {
    let mut traces = read_trace_csv(run.read(path)?.as_slice())?;
    if traces.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: expected one channel, found {}",
            path.display(),
            traces.len()
        )));
    }
    Ok(traces.remove(0))
}

pub fn extract(cfg: &PipelineConfig, run: &Run) -> Result<(), CliError> {
    let manifest = cfg.manifest()?;
    let ids = ids_in(&run.path("preprocess"), ".rr.csv")?;
    if ids.is_empty() {
        return Err(CliError::Data("no preprocessed subjects; run preprocess first".into()));
    }
    let outcomes: Vec<Option<String>> = ids
        .par_iter()
        .map(|id| -> Result<Option<String>, CliError> {
            let ctx = format!("subject {id}");
            let dir = run.path("preprocess");
            let rr = read_rr_csv(run.read(&dir.join(format!("{id}.rr.csv")))?.as_slice())?;
            let chest = read_single_trace(run, &dir.join(format!("{id}.chest.csv")))?;
            let abd_path = dir.join(format!("{id}.abdomen.csv"));
            let abdomen = abd_path
                .exists()
                .then(|| read_single_trace(run, &abd_path))
                .transpose()?;
            let labels_path = dir.join(format!("{id}.labels.hyp"));
            let labels = if labels_path.exists() {
                match read_hypnogram(&run.read_string(&labels_path)?, cfg.epoch_len_s)? {
                    AnyHypnogram::Four(h) => Some(h),
                    AnyHypnogram::Six(h) => Some(sleepstage::cohort::merge_stages(&h)),
                }
            } else {
                None
            };
            let pre = Preprocessed { rr, chest, abdomen };
            match extract_features(&manifest, &pre, cfg.epoch_len_s, labels.as_ref()) {
                Ok(m) => {
                    let mut buf = Vec::new();
                    write_feature_matrix(&m, &mut buf)?;
                    run.write(&format!("features/{id}.csv"), &buf)?;
                    Ok(None)
                }
                Err(PipelineError::Registry(e @ RegistryError::SubjectUnusable { .. })) => {
                    log::warn!("{ctx} skipped: {e}");
                    Ok(Some(format!("{id}\t{e}\n")))
                }
                Err(e) => Err(CliError::from(e).context(ctx)),
            }
        })
        .collect::<Result<_, _>>()?;
    run.write("features/manifest.tsv", manifest.to_tsv().as_bytes())?;
    let skipped: String = outcomes.iter().flatten().cloned().collect();
    if !skipped.is_empty() {
        run.write("features/skipped.tsv", skipped.as_bytes())?;
    }
    let n_skipped = outcomes.iter().flatten().count();
    println!(
        "extracted {} features for {} subjects ({n_skipped} skipped), profile {}",
        manifest.len(),
        ids.len() - n_skipped,
        manifest.profile()
    );
    Ok(())
}

pub fn cohort(cfg: &PipelineConfig, run: &Run, metadata: Option<&Path>) -> Result<(), CliError> {
    let metas = subject_list(run, metadata)?;
    let candidates = metas
        .iter()
        .map(|m| -> Result<CohortCandidate, CliError> {
            let hypnogram = match &m.hypnogram_path {
                Some(p) => match read_hypnogram(&run.read_string(Path::new(p))?, cfg.epoch_len_s)? {
                    AnyHypnogram::Six(h) => Some(h),
                    AnyHypnogram::Four(_) => None,
                },
                None => None,
            };
            Ok(CohortCandidate {
                subject_id: m.subject_id.clone(),
                ahi: m.ahi,
                hypnogram,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let selection = select_cohort(&candidates, &cfg.cohort.thresholds);
    let kept: Vec<String> = selection.kept.iter().map(|(id, _)| id.clone()).collect();
    let report = format_cohort_report(&selection.report);
    run.write("cohort/report.txt", report.as_bytes())?;
    run.write("cohort/selected.txt", id_list(&kept).as_bytes())?;
    print!("{report}");
    println!("kept {} of {} subjects", kept.len(), candidates.len());
    Ok(())
}

fn featured_ids(run: &Run) -> Result<Vec<String>, CliError> {
    let ids = ids_in(&run.path("features"), ".csv")?;
    if ids.is_empty() {
        return Err(CliError::Data("no feature matrices; run extract first".into()));
    }
    Ok(ids)
}

pub fn split(cfg: &PipelineConfig, run: &Run) -> Result<(), CliError> {
    let featured = featured_ids(run)?;
    let selected = run.path("cohort/selected.txt");
    let ids: Vec<String> = if selected.exists() {
        lines(&run.read_string(&selected)?)
            .into_iter()
            .filter(|id| featured.contains(id))
            .collect()
    } else {
        featured
    };
    let (train_ids, test_ids) =
        split_subjects(&ids, cfg.cohort.train_ratio, cfg.seed).map_err(|e| CliError::Data(e.to_string()))?;
    run.write("split/train.txt", id_list(&train_ids).as_bytes())?;
    run.write("split/test.txt", id_list(&test_ids).as_bytes())?;
    println!(
        "split {} subjects: {} train, {} test",
        ids.len(),
        train_ids.len(),
        test_ids.len()
    );
    Ok(())
}

fn set_ids(run: &Run, set: SubjectSet) -> Result<Vec<String>, CliError> {
    let file = match set {
        SubjectSet::Train => "split/train.txt",
        SubjectSet::Test => "split/test.txt",
        SubjectSet::All => return featured_ids(run),
    };
    let path = run.path(file);
    if !path.exists() {
        log::warn!("{file} not found; using every subject with features");
        return featured_ids(run);
    }
    let ids = lines(&run.read_string(&path)?);
    if ids.is_empty() {
        return Err(CliError::Data(format!("{file} lists no subjects")));
    }
    Ok(ids)
}

fn load_matrices(run: &Run, manifest: &FeatureManifest, ids: &[String]) -> Result<Vec<FeatureMatrix>, CliError> {
    ids.par_iter()
        .map(|id| {
            let path = run.path(&format!("features/{id}.csv"));
            read_feature_matrix(run.read(&path)?.as_slice(), manifest)
                .map_err(|e| CliError::from(e).context(format!("subject {id}")))
        })
        .collect()
}

pub fn train_model(cfg: &PipelineConfig, run: &Run) -> Result<(), CliError> {
    let manifest = cfg.manifest()?;
    let ids = set_ids(run, SubjectSet::Train)?;
    let matrices = load_matrices(run, &manifest, &ids)?;
    let norm = fit_normalization(&matrices.iter().collect::<Vec<_>>())?;
    let seqs: Vec<Sequence> = matrices
        .iter()
        .map(|m| norm.apply(m).map(|z| to_sequence(&z)))
        .collect::<Result<_, _>>()?;
    let outcome = train(cfg.dims(), &cfg.train, &seqs, &[])?;
    let checkpoint = Checkpoint::new(
        manifest.hash(),
        cfg.train.clone(),
        outcome.class_weights,
        Some(norm),
        outcome.params,
    );
    let mut buf = Vec::new();
    checkpoint.write(&mut buf)?;
    run.write("model/checkpoint.json", &buf)?;
    let mut history = String::from("epoch,train_loss\n");
    for h in &outcome.history {
        let _ = writeln!(history, "{},{}", h.epoch, h.train_loss);
    }
    run.write("model/history.csv", history.as_bytes())?;
    println!(
        "trained on {} subjects for {} epochs; best epoch {} (loss {:.4})",
        ids.len(),
        outcome.history.len(),
        outcome.best_epoch,
        outcome.history[outcome.best_epoch].train_loss
    );
    Ok(())
}

fn load_checkpoint(cfg: &PipelineConfig, run: &Run) -> Result<(FeatureManifest, Checkpoint), CliError> {
    let manifest = cfg.manifest()?;
    let path = run.path("model/checkpoint.json");
    if !path.exists() {
        return Err(CliError::Data("no model/checkpoint.json; run train first".into()));
    }
    let ck = Checkpoint::read(run.read(&path)?.as_slice(), &manifest.hash())?;
    Ok((manifest, ck))
}

fn normalized(ck: &Checkpoint, m: &FeatureMatrix) -> Result<FeatureMatrix, CliError> {
    Ok(match &ck.norm {
        Some(n) => n.apply(m)?,
        None => m.clone(),
    })
}

fn stages(pred: Vec<usize>) -> Vec<Stage> {
    pred.into_iter()
        .map(|k| Stage::from_index(k).expect("four output classes"))
        .collect()
}

pub fn predict_set(cfg: &PipelineConfig, run: &Run, set: SubjectSet) -> Result<(), CliError> {
    let (manifest, ck) = load_checkpoint(cfg, run)?;
    let ids = set_ids(run, set)?;
    let matrices = load_matrices(run, &manifest, &ids)?;
    for (id, m) in ids.iter().zip(&matrices) {
        let pred = stages(predict(&ck.params, &normalized(&ck, m)?.values)?);
        let h = Hypnogram::new(cfg.epoch_len_s, pred);
        run.write(&format!("predictions/{id}.hyp"), write_hypnogram(&h).as_bytes())?;
    }
    println!("wrote predictions for {} subjects", ids.len());
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig, run: &Run, set: SubjectSet) -> Result<(), CliError> {
    let (manifest, ck) = load_checkpoint(cfg, run)?;
    let ids = set_ids(run, set)?;
    let matrices = load_matrices(run, &manifest, &ids)?;
    let mut total = ConfusionMatrix::default();
    let mut rows = Vec::new();
    for (id, m) in ids.iter().zip(&matrices) {
        let pred = stages(predict(&ck.params, &normalized(&ck, m)?.values)?);
        let (p, t): (Vec<Stage>, Vec<Stage>) = pred
            .iter()
            .zip(&m.labels)
            .filter_map(|(p, t)| t.map(|t| (*p, t)))
            .unzip();
        if t.is_empty() {
            return Err(CliError::Data(format!(
                "subject {id} has no stage labels; nothing to evaluate against"
            )));
        }
        let cm = confusion_matrix(&p, &t)?;
        total += cm;
        rows.push(SubjectScore {
            subject_id: id.clone(),
            epochs: t.len(),
            accuracy: accuracy(&cm)?,
            kappa: cohens_kappa(&cm).ok(),
        });
    }
    let acc = accuracy(&total)?;
    let kappa = cohens_kappa(&total)?;
    let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let subject_mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let mut report = format!(
        "subjects: {}\nepochs: {}\naccuracy (epoch-weighted): {acc:.4}\naccuracy (subject mean): {subject_mean:.4}\nkappa: {kappa:.4}\n\n",
        rows.len(),
        total.total()
    );
    report.push_str(&format_confusion(&total));
    if let Some((from, to, n)) = total.dominant_error() {
        let _ = writeln!(report, "\ndominant error: {from} scored as {to} ({n} epochs)");
    }
    let scored: Vec<(String, f64)> = rows.iter().map(|r| (r.subject_id.clone(), r.accuracy)).collect();
    let (best, median, worst) = rank_cases(&scored)?;
    let _ = writeln!(report, "best {best}, median {median}, worst {worst}\n");
    report.push_str(&format_subject_table(&rows));
    run.write("eval/report.txt", report.as_bytes())?;
    run.write("eval/confusion.csv", confusion_csv(&total).as_bytes())?;
    run.write("eval/subjects.csv", subject_csv(&rows).as_bytes())?;
    run.write("eval/cdf.csv", cdf_csv(&per_subject_cdf(&accs)?).as_bytes())?;
    print!("{report}");
    Ok(())
}

pub fn importance(
    cfg: &PipelineConfig,
    run: &Run,
    set: SubjectSet,
    repeats: usize,
    top: usize,
) -> Result<(), CliError> {
    let (manifest, ck) = load_checkpoint(cfg, run)?;
    let ids = set_ids(run, set)?;
    let seqs: Vec<Sequence> = load_matrices(run, &manifest, &ids)?
        .iter()
        .map(|m| normalized(&ck, m).map(|z| to_sequence(&z)))
        .collect::<Result<_, _>>()?;
    if !seqs.iter().any(|s| s.labels.iter().any(Option::is_some)) {
        return Err(CliError::Data("no stage labels in the selected subjects".into()));
    }
    let names: Vec<String> = manifest.names().map(String::from).collect();
    let ranked = permutation_importance(&ck.params, &seqs, &names, cfg.seed, repeats)?;
    run.write("importance/importance.csv", importance_csv(&ranked).as_bytes())?;
    print!("{}", format_importance(&ranked, top));
    Ok(())
}
