use nomad::corpus::{synthesize_utterance, write_corpus};
use nomad::synth::{synth_dataset, SynthOptions, MANIFEST_FILE};
use nomad::{tables, wav, Error};
use nomad_core::degrade::{DegradeOptions, Family};

#[test]
fn corpus_is_seeded_and_bounded() {
    let a = synthesize_utterance(1.0, 5);
    assert_eq!(a, synthesize_utterance(1.0, 5));
    assert_ne!(a, synthesize_utterance(1.0, 6));
    assert_eq!(a.len(), 16000);
    assert!(a.peak() <= 0.51);
    assert!(a.power() > 1e-4);
}

#[test]
fn counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    write_corpus(&clean, "s", 2, 1.0, 3).unwrap();
    let opts = SynthOptions { seed: 9, ..SynthOptions::default() };
    let out_a = dir.path().join("a");
    let rows = synth_dataset(&clean, &out_a, &opts).unwrap();
    assert_eq!(rows.len(), 42);
    assert_eq!(rows.iter().filter(|r| r.is_clean()).count(), 2);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.nsim)));
    for r in &rows {
        assert!(out_a.join(&r.clip_path).is_file(), "{}", r.clip_path);
    }
    assert_eq!(tables::read_manifest(&out_a.join(MANIFEST_FILE)).unwrap(), rows);

    let out_b = dir.path().join("b");
    synth_dataset(&clean, &out_b, &SynthOptions { seed: 9, jobs: 3, ..SynthOptions::default() }).unwrap();
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&out_a, MANIFEST_FILE), read(&out_b, MANIFEST_FILE));
    for r in &rows {
        assert_eq!(read(&out_a, &r.clip_path), read(&out_b, &r.clip_path));
    }
}

#[test]
fn stored_nsim_matches_files() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    write_corpus(&clean, "s", 1, 1.0, 8).unwrap();
    let out = dir.path().join("out");
    let opts = SynthOptions { families: vec![Family::Noise], ..SynthOptions::default() };
    let rows = synth_dataset(&clean, &out, &opts).unwrap();
    let reference = wav::load_wav(&out.join(&rows[0].clip_path)).unwrap();
    for r in &rows[1..] {
        let q = nomad_core::nsim::utterance_nsim(&reference, &wav::load_wav(&out.join(&r.clip_path)).unwrap()).unwrap();
        assert_eq!(q, r.nsim);
    }
    let qs: Vec<f64> = rows[1..].iter().map(|r| r.nsim).collect();
    assert!(qs.windows(2).all(|w| w[0] < w[1]), "{qs:?}");
}

#[test]
fn bad_files_are_skipped_and_empty_dirs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    write_corpus(&clean, "s", 1, 1.0, 1).unwrap();
    std::fs::write(clean.join("broken.wav"), b"not a wav").unwrap();
    let rows = synth_dataset(&clean, &dir.path().join("out"), &SynthOptions::default()).unwrap();
    assert_eq!(rows.len(), 21);

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert!(matches!(synth_dataset(&empty, &dir.path().join("o2"), &SynthOptions::default()), Err(Error::EmptyCorpus(_))));

    let opts = SynthOptions { families: vec![Family::ExternalCodec], degrade: DegradeOptions::default(), ..SynthOptions::default() };
    assert!(matches!(synth_dataset(&clean, &dir.path().join("o3"), &opts), Err(Error::EmptyCorpus(_))));
}
