use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};
use nomad::checkpoint::{decode, encode, load_checkpoint, save_checkpoint};
use nomad::external::CommandEncoder;
use nomad::{tables, wav, Error};
use nomad_core::dataset::ManifestRow;
use nomad_core::degrade::{DegradationCondition, ExternalEncoder, Family};
use nomad_core::{EmbeddingModel, EncoderConfig, Waveform};
use proptest::prelude::*;

fn write_raw(path: &Path, channels: u16, bits: u16, samples: &[i32]) {
    let spec = WavSpec { channels, sample_rate: 16000, bits_per_sample: bits, sample_format: SampleFormat::Int };
    let mut w = WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn one_second_mono_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.wav");
    write_raw(&p, 1, 16, &vec![100; 16000]);
    let w = wav::load_wav(&p).unwrap();
    assert_eq!(w.len(), 16000);
    assert_eq!(w.sample_rate(), 16000);
}

#[test]
fn full_scale_negative_maps_to_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.wav");
    write_raw(&p, 1, 16, &[-32768, 0, 32767]);
    let w = wav::load_wav(&p).unwrap();
    assert_eq!(w.samples(), &[-1.0, 0.0, 32767.0 / 32768.0]);
}

#[test]
fn rejected_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let stereo = dir.path().join("stereo.wav");
    write_raw(&stereo, 2, 16, &[1, 2, 3, 4]);
    assert!(matches!(wav::load_wav(&stereo), Err(Error::UnsupportedFormat { .. })));
    let deep = dir.path().join("24.wav");
    write_raw(&deep, 1, 24, &[1, 2, 3]);
    assert!(matches!(wav::load_wav(&deep), Err(Error::UnsupportedFormat { .. })));
    assert!(matches!(wav::load_wav(&dir.path().join("missing.wav")), Err(Error::NotFound(_))));
    let junk = dir.path().join("junk.wav");
    std::fs::write(&junk, b"RIFF\x10\x00\x00\x00WAVEfmt ").unwrap();
    let r = wav::load_wav(&junk);
    assert!(matches!(r, Err(Error::CorruptHeader { .. })), "{r:?}");
    let text = dir.path().join("text.wav");
    std::fs::write(&text, b"hello, this is not audio at all").unwrap();
    assert!(matches!(wav::load_wav(&text), Err(Error::CorruptHeader { .. })));
}

proptest! {
    #[test]
    fn pcm16_round_trip(samples in prop::collection::vec(-1.0f64..1.0, 1..400)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        let w = Waveform::new(samples, 22050).unwrap().quantized_pcm16();
        wav::write_wav(&p, &w).unwrap();
        let back = wav::load_wav(&p).unwrap();
        prop_assert_eq!(back, w);
    }
}

fn small_model(seed: u64) -> EmbeddingModel {
    EmbeddingModel::init(EncoderConfig { init_seed: seed, ..EncoderConfig::default() }).unwrap()
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    let mut m = small_model(4);
    let grad: Vec<f64> = (0..m.params().len()).map(|i| (i as f64 * 0.37).sin()).collect();
    m.sgd_step(&grad, 0.013);
    save_checkpoint(&m, &p).unwrap();
    let back = load_checkpoint(&p).unwrap();
    assert_eq!(back.config(), m.config());
    assert!(back.params().iter().zip(m.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(std::fs::read(&p).unwrap()[..7], *b"NOMAD1\n");
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let bytes = encode(&small_model(1));
    let corrupt = |b: &[u8]| matches!(decode(b), Err(Error::CorruptCheckpoint(_)));
    assert!(corrupt(&bytes[..bytes.len() - 3]));
    assert!(corrupt(&bytes[..9]));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(corrupt(&magic));
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(corrupt(&nan));

    let len = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[11..11 + len]).unwrap();
    let count = small_model(1).params().len();
    let edited = header.replace(&format!("\"parameter_count\":{count}"), &format!("\"parameter_count\":{}", count + 1));
    assert_ne!(edited, header);
    let mut mismatch = bytes[..7].to_vec();
    mismatch.extend_from_slice(&(edited.len() as u32).to_le_bytes());
    mismatch.extend_from_slice(edited.as_bytes());
    mismatch.extend_from_slice(&bytes[11 + len..]);
    assert!(corrupt(&mismatch));
}

#[test]
fn manifest_round_trip_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("manifest.csv");
    let c = DegradationCondition::new(Family::CodecOpusLike, 2).unwrap();
    let rows = vec![
        ManifestRow::clean("clean/a.wav".into(), "a".into()),
        ManifestRow::degraded("degraded/a/x.wav".into(), "a".into(), &c, 0.734_512_345_678_9),
    ];
    tables::write_manifest(&p, &rows).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("clip_path,source_id,family,level_index,level_param,nsim\n"));
    assert!(!text.contains('\r'));
    assert!(text.contains("clean/a.wav,a,clean,0,0.0,1.0\n"), "{text}");
    assert_eq!(tables::read_manifest(&p).unwrap(), rows);

    std::fs::write(&p, "clip,source_id\nx,y\n").unwrap();
    assert!(matches!(tables::read_manifest(&p), Err(Error::Table { .. })));
}

#[test]
fn command_encoder_round_trip_and_failures() {
    let w = Waveform::new((0..3200).map(|n| 0.3 * (n as f64 * 0.1).sin()).collect(), 16000).unwrap().quantized_pcm16();
    let copy = CommandEncoder::new("cp {in} {out}").unwrap();
    assert_eq!(copy.encode(&w, 32.0).unwrap(), w);
    let failing = CommandEncoder::new("sh -c \"exit 3\"").unwrap();
    assert!(matches!(failing.encode(&w, 32.0), Err(nomad_core::Error::EncoderFailed(_))));
    let missing = CommandEncoder::new("definitely-not-an-encoder-binary {in} {out}").unwrap();
    assert_eq!(missing.encode(&w, 32.0), Err(nomad_core::Error::MissingEncoder));
}
