//! Subcommand implementations.

use std::path::PathBuf;

use clap::Args;

use voxanon::audio::WindowKind;
use voxanon::embed::{
    apply_assignment, assign_pseudo_speakers, format_embeddings, load_embeddings, EmbedError,
    PoolSelectionParams,
};
use voxanon::mcadams::{anonymize_corpus, read_manifest, McAdamsParams};
use voxanon::metrics::{cllr, cllr_min, eer, wer_corpus, TranscriptTable};
use voxanon::protocol::{
    emit_results, load_mapping, parse_results, score_trials, validate_pseudo_mapping, AsvRow,
    Condition, ExpectedCounts, ProtocolError, ResultsTable, SubsetTag, TableFormat, TrialList,
};

use crate::{CmdResult, Failure, SEED_ENV_VAR};

fn config_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(msg.to_string())
}

fn op_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Operational(msg.to_string())
}

fn parse_window(s: &str) -> Result<WindowKind, String> {
    match s {
        "hann" => Ok(WindowKind::Hann),
        "rectangular" => Ok(WindowKind::Rectangular),
        other => Err(format!("unknown window {other:?} (want hann|rectangular)")),
    }
}

fn parse_tag(s: &str) -> Result<SubsetTag, String> {
    s.parse()
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse()
}

fn default_seed() -> u64 {
    std::env::var(SEED_ENV_VAR)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

#[derive(Args, Debug)]
pub struct AnonymizeArgs {
    /// Manifest of `<utterance-id> <wav-path>` lines.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; file names are preserved.
    #[arg(long)]
    out: PathBuf,
    /// McAdams coefficient (1.0 = identity).
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 20)]
    lpc_order: usize,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
    /// Maximum pole modulus after warping.
    #[arg(long, default_value_t = 0.998)]
    clamp: f64,
    #[arg(long, default_value = "hann", value_parser = parse_window)]
    window: WindowKind,
    /// Optional pre-emphasis coefficient (e.g. 0.97), undone after synthesis.
    #[arg(long)]
    pre_emphasis: Option<f64>,
    /// File-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Where to write the JSON run report (default <out>/anonymize_report.json).
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn anonymize(args: AnonymizeArgs, quiet: bool) -> CmdResult {
    let params = McAdamsParams {
        alpha: args.alpha,
        lpc_order: args.lpc_order,
        frame_ms: args.frame_ms,
        hop_ms: args.hop_ms,
        window: args.window,
        stability_clamp: args.clamp,
        pre_emphasis: args.pre_emphasis,
        rng_seed: 0,
    };
    params.validate().map_err(config_err)?;
    if !quiet {
        eprintln!(
            "config: alpha={} lpc_order={} frame_ms={} hop_ms={} window={:?} clamp={} pre_emphasis={:?} jobs={}",
            params.alpha,
            params.lpc_order,
            params.frame_ms,
            params.hop_ms,
            params.window,
            params.stability_clamp,
            params.pre_emphasis,
            args.jobs
        );
    }
    let entries = read_manifest(&args.manifest).map_err(config_err)?;
    let report = anonymize_corpus(&entries, &params, &args.out, args.jobs).map_err(config_err)?;

    let report_path = args
        .report
        .unwrap_or_else(|| args.out.join("anonymize_report.json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, json).map_err(|e| {
        op_err(format!(
            "cannot write report {}: {e}",
            report_path.display()
        ))
    })?;

    println!(
        "processed {} failed {} clipped_samples {} report {}",
        report.processed,
        report.failed,
        report.clipped_samples,
        report_path.display()
    );
    if report.failed > 0 {
        for file in report.files.iter().filter(|f| !f.ok) {
            eprintln!(
                "failed: {} ({})",
                file.utterance_id,
                file.error.as_deref().unwrap_or("unknown error")
            );
        }
        return Err(op_err(format!("{} file(s) failed", report.failed)));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnonEmbedArgs {
    /// Embeddings to anonymize: `<utterance-id> <speaker-id> <v1> ...`.
    #[arg(long)]
    input: PathBuf,
    /// Speaker pool in the same format.
    #[arg(long)]
    pool: PathBuf,
    /// Which side of the protocol these utterances belong to.
    #[arg(long, value_parser = parse_tag)]
    tag: SubsetTag,
    /// Output pseudo-embedding file.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the JSON selection audit (default <out>.audit.json).
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n_farthest: usize,
    #[arg(long, default_value_t = 100)]
    n_subset: usize,
    /// RNG seed; falls back to $VOXANON_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Length-normalize the averaged pseudo vector.
    #[arg(long)]
    normalize: bool,
}

pub fn anon_embed(args: AnonEmbedArgs, quiet: bool) -> CmdResult {
    let params = PoolSelectionParams {
        n_farthest: args.n_farthest,
        n_subset: args.n_subset,
        rng_seed: args.seed.unwrap_or_else(default_seed),
        normalize: args.normalize,
    };
    params.validate().map_err(config_err)?;
    if !quiet {
        eprintln!(
            "config: n_farthest={} n_subset={} seed={} normalize={} tag={}",
            params.n_farthest, params.n_subset, params.rng_seed, params.normalize, args.tag
        );
    }
    let embeddings = load_embeddings(&args.input).map_err(config_err)?;
    if embeddings.is_empty() {
        return Err(config_err(format!(
            "{}: no embeddings to anonymize",
            args.input.display()
        )));
    }
    let pool = load_embeddings(&args.pool).map_err(config_err)?;
    let assignment =
        assign_pseudo_speakers(&embeddings, &pool, &params, args.tag).map_err(|e| match e {
            EmbedError::CollisionExhausted { .. } => op_err(e),
            other => config_err(other),
        })?;
    let pseudo = apply_assignment(&embeddings, &assignment, args.tag)
        .expect("assignment covers every input speaker");
    std::fs::write(&args.out, format_embeddings(&pseudo))
        .map_err(|e| op_err(format!("cannot write {}: {e}", args.out.display())))?;

    let audit_path = args.audit.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".audit.json");
        PathBuf::from(p)
    });
    let audit = serde_json::json!({
        "seed": params.rng_seed,
        "tag": args.tag.to_string(),
        "n_farthest": params.n_farthest,
        "n_subset": params.n_subset,
        "normalize": params.normalize,
        "speakers": assignment.entries.iter().map(|((speaker, _), record)| {
            serde_json::json!({
                "speaker": speaker,
                "pseudo_id": record.pseudo_id,
                "attempt": record.attempt,
                "candidate_ids": record.candidate_ids,
            })
        }).collect::<Vec<_>>(),
    });
    std::fs::write(&audit_path, serde_json::to_string_pretty(&audit).unwrap())
        .map_err(|e| op_err(format!("cannot write {}: {e}", audit_path.display())))?;

    println!(
        "wrote {} pseudo embeddings for {} speakers to {} (audit {})",
        pseudo.len(),
        assignment.entries.len(),
        args.out.display(),
        audit_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalAsvArgs {
    /// Score file: `<enroll-id> <test-utterance> <llr>`.
    #[arg(long)]
    scores: PathBuf,
    /// Trial list: `<enroll-id> <test-utterance> target|nontarget`.
    #[arg(long)]
    trials: PathBuf,
    /// Optional expected-counts manifest (`target <n>` / `nontarget <n>`).
    #[arg(long)]
    expected_counts: Option<PathBuf>,
    /// Also print a LaTeX table row.
    #[arg(long)]
    latex: bool,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, default_value = "o", value_parser = parse_condition)]
    enr: Condition,
    #[arg(long, default_value = "o", value_parser = parse_condition)]
    trl: Condition,
    #[arg(long, default_value = "?")]
    gender: String,
}

pub fn eval_asv(args: EvalAsvArgs, quiet: bool) -> CmdResult {
    let trials = TrialList::load(&args.trials).map_err(config_err)?;
    if let Some(path) = &args.expected_counts {
        let expected = ExpectedCounts::load(path).map_err(config_err)?;
        let discrepancies = expected.check(&trials);
        if !discrepancies.is_empty() {
            return Err(op_err(format!(
                "trial counts do not match expectations: {}",
                discrepancies.join("; ")
            )));
        }
    }
    if !quiet {
        eprintln!(
            "config: trials={} (target {} / nontarget {}) scores={}",
            args.trials.display(),
            trials.count(voxanon::protocol::TrialLabel::Target),
            trials.count(voxanon::protocol::TrialLabel::Nontarget),
            args.scores.display()
        );
    }
    let scores = score_trials(&args.scores, &trials).map_err(|e| match e {
        ProtocolError::Parse { .. } => config_err(e),
        other => op_err(other),
    })?;
    let eer_result = eer(&scores);
    let c = cllr(&scores);
    let cmin = cllr_min(&scores);
    println!("EER,%    : {:.3}", eer_result.eer_percent);
    println!("Cllr_min : {cmin:.3}");
    println!("Cllr     : {c:.3}");
    if args.latex {
        let table = ResultsTable {
            asv: vec![AsvRow {
                dataset: args.dataset.clone(),
                enroll: args.enr,
                trial: args.trl,
                gender: args.gender.clone(),
                eer_percent: eer_result.eer_percent,
                cllr_min: cmin,
                cllr: c,
                source: args.scores.display().to_string(),
            }],
            wer: vec![],
        };
        print!(
            "{}",
            emit_results(&table, TableFormat::Latex).map_err(op_err)?
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalAsrArgs {
    /// Reference transcripts: `<utterance-id> <word> ...`.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis transcripts in the same format.
    #[arg(long)]
    hyp: PathBuf,
    /// Also dump per-utterance error counts.
    #[arg(long)]
    per_utt: bool,
}

pub fn eval_asr(args: EvalAsrArgs, quiet: bool) -> CmdResult {
    let reference = TranscriptTable::load(&args.reference).map_err(config_err)?;
    if reference.is_empty() {
        return Err(config_err(format!(
            "{}: reference transcript file is empty",
            args.reference.display()
        )));
    }
    let hypothesis = TranscriptTable::load(&args.hyp).map_err(config_err)?;
    if !quiet {
        eprintln!(
            "config: ref={} ({} utterances) hyp={} ({} utterances)",
            args.reference.display(),
            reference.len(),
            args.hyp.display(),
            hypothesis.len()
        );
    }
    let corpus = wer_corpus(&reference, &hypothesis).map_err(op_err)?;
    for id in &corpus.unused_references {
        eprintln!("warning: reference utterance {id} has no hypothesis; ignored");
    }
    let b = &corpus.breakdown;
    println!(
        "WER,%    : {:.2} (sub {} del {} ins {} / ref {})",
        b.wer_percent(),
        b.n_sub,
        b.n_del,
        b.n_ins,
        b.n_ref
    );
    if args.per_utt {
        for (id, u) in &corpus.per_utterance {
            println!(
                "{id} {:.2} sub {} del {} ins {} ref {}",
                u.wer_percent(),
                u.n_sub,
                u.n_del,
                u.n_ins,
                u.n_ref
            );
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Mapping file: `<utt-id> <speaker-id> <enrollment|trial> <pseudo-id>`.
    #[arg(long)]
    mapping: PathBuf,
}

pub fn validate(args: ValidateArgs, quiet: bool) -> CmdResult {
    let records = load_mapping(&args.mapping).map_err(config_err)?;
    if !quiet {
        eprintln!(
            "config: mapping={} ({} records)",
            args.mapping.display(),
            records.len()
        );
    }
    let report = validate_pseudo_mapping(&records);
    if report.is_compliant() {
        let speakers: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.speaker.as_str()).collect();
        println!(
            "mapping is compliant: {} records, {} speakers",
            records.len(),
            speakers.len()
        );
        Ok(())
    } else {
        for v in &report.violations {
            println!("violation: {v}");
        }
        Err(op_err(format!(
            "{} rule violation(s)",
            report.violations.len()
        )))
    }
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Results table in the plain emission format.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "plain")]
    format: String,
}

pub fn report(args: ReportArgs) -> CmdResult {
    let format = match args.format.as_str() {
        "plain" => TableFormat::Plain,
        "latex" => TableFormat::Latex,
        other => {
            return Err(config_err(format!(
                "unknown format {other:?} (want plain|latex)"
            )))
        }
    };
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.input.display())))?;
    let table = parse_results(&text).map_err(config_err)?;
    print!("{}", emit_results(&table, format).map_err(config_err)?);
    Ok(())
}
