//! Cross-module integration: file-backed flows through the anonymizers and
//! the evaluation stack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use voxanon::audio::{read_wav, write_wav, AudioBuffer};
use voxanon::embed::{
    apply_assignment, assign_pseudo_speakers, embeddings_from_lines, format_embeddings, Embedding,
    PoolSelectionParams,
};
use voxanon::mcadams::{anonymize_corpus, read_manifest, ManifestEntry, McAdamsParams};
use voxanon::metrics::{cllr, cllr_min, eer};
use voxanon::protocol::{score_trials_from_lines, validate_pseudo_mapping, SubsetTag, TrialList};

fn resonant_noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (r, w) = (0.95f64, 0.7f64);
    let (a1, a2) = (2.0 * r * w.cos(), -r * r);
    let mut y = vec![0.0f64; len];
    for n in 0..len {
        let e = rng.gen_range(-0.05..0.05);
        let y1 = if n >= 1 { y[n - 1] } else { 0.0 };
        let y2 = if n >= 2 { y[n - 2] } else { 0.0 };
        y[n] = e + a1 * y1 + a2 * y2;
    }
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    y.iter().map(|v| 0.4 * v / peak).collect()
}

#[test]
fn wav_to_anonymized_wav_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest_text = String::new();
    for i in 0..3u64 {
        let path = dir.path().join(format!("utt{i}.wav"));
        let buffer = AudioBuffer::new(resonant_noise(i, 8000), 16000).unwrap();
        write_wav(&buffer, &path).unwrap();
        manifest_text.push_str(&format!("utt{i} {}\n", path.display()));
    }
    let manifest_path = dir.path().join("m.txt");
    std::fs::write(&manifest_path, &manifest_text).unwrap();

    let entries: Vec<ManifestEntry> = read_manifest(&manifest_path).unwrap();
    let out_dir = dir.path().join("anon");
    let report = anonymize_corpus(&entries, &McAdamsParams::default(), &out_dir, 2).unwrap();
    assert_eq!(report.processed, 3);
    assert_eq!(report.failed, 0);

    for i in 0..3u64 {
        let original = read_wav(dir.path().join(format!("utt{i}.wav"))).unwrap();
        let anonymized = read_wav(out_dir.join(format!("utt{i}.wav"))).unwrap();
        assert_eq!(original.sample_rate, anonymized.sample_rate);
        assert_eq!(original.len(), anonymized.len());
        let rms: f64 = original
            .samples
            .iter()
            .zip(&anonymized.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / original.len() as f64;
        assert!(
            rms.sqrt() > 1e-4,
            "file {i}: alpha=0.8 left the signal unchanged"
        );
    }
}

#[test]
fn embeddings_through_files_to_validated_mapping() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let pool: Vec<Embedding> = (0..50)
        .map(|i| Embedding {
            utterance_id: Some(format!("p{i:02}")),
            speaker_id: format!("ps{i:02}"),
            vector: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    let utterances: Vec<Embedding> = (0..4)
        .flat_map(|s| {
            (0..2).map(move |u| Embedding {
                utterance_id: Some(format!("s{s}u{u}")),
                speaker_id: format!("spk{s}"),
                vector: (0..5).map(|d| ((s + u + d) as f64 * 0.61).cos()).collect(),
            })
        })
        .collect();

    // file round trip of the inputs
    let text = format_embeddings(&utterances);
    let lines: Vec<&str> = text.lines().collect();
    let reloaded = embeddings_from_lines("mem", &lines).unwrap();
    assert_eq!(utterances, reloaded);

    let params = PoolSelectionParams {
        n_farthest: 20,
        n_subset: 8,
        rng_seed: 3,
        normalize: false,
    };
    let mut assignment =
        assign_pseudo_speakers(&reloaded, &pool, &params, SubsetTag::Enrollment).unwrap();
    let trial = assign_pseudo_speakers(&reloaded, &pool, &params, SubsetTag::Trial).unwrap();
    assignment.merge(trial).unwrap();

    let pseudo = apply_assignment(&reloaded, &assignment, SubsetTag::Enrollment).unwrap();
    assert_eq!(pseudo.len(), reloaded.len());
    // every output line parses back and carries a pseudo speaker id
    let out_text = format_embeddings(&pseudo);
    let out_lines: Vec<&str> = out_text.lines().collect();
    let parsed = embeddings_from_lines("out", &out_lines).unwrap();
    assert!(parsed.iter().all(|e| e.speaker_id.starts_with("pseudo-")));

    let mut records = assignment.to_mapping_records(&reloaded, SubsetTag::Enrollment);
    records.extend(assignment.to_mapping_records(&reloaded, SubsetTag::Trial));
    assert!(validate_pseudo_mapping(&records).is_compliant());
}

#[test]
fn scores_to_metrics_through_trial_list() {
    let trials = TrialList::from_lines(
        "t.txt",
        &[
            "s1 u1 target",
            "s1 u2 target",
            "s1 u3 target",
            "s2 u1 nontarget",
            "s2 u2 nontarget",
            "s2 u3 nontarget",
        ],
    )
    .unwrap();
    let score_lines = [
        "s1 u1 4.0",
        "s1 u2 3.0",
        "s1 u3 2.0",
        "s2 u1 -2.0",
        "s2 u2 -3.0",
        "s2 u3 -4.0",
    ];
    let scores = score_trials_from_lines("s.txt", &score_lines, &trials).unwrap();
    assert_eq!(eer(&scores).eer_percent, 0.0);
    let c = cllr(&scores);
    let cmin = cllr_min(&scores);
    assert!(cmin <= c && cmin < 0.2, "cmin {cmin}, cllr {c}");
}
