use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selfaug::io::{
    read_enrollment, read_segment, write_enrollment, write_segment, write_segment_jsonl,
    EnrollmentMeta,
};
use selfaug::{Embedding, EnrollTag, FrameLabel, SegmentFrames};

fn random_segment(rng: &mut ChaCha8Rng, id: u32) -> SegmentFrames {
    let dim = rng.random_range(1..=48);
    let t = rng.random_range(0..=50);
    let embeddings = (0..t)
        .map(|_| {
            let v = (0..dim)
                .map(|_| f64::from(rng.random_range(-8.0f32..8.0)))
                .collect();
            Embedding::new(v).unwrap()
        })
        .collect();
    let activity = (0..t)
        .map(|_| f64::from(rng.random_range(0.0f32..=1.0)))
        .collect();
    let labels = rng.random_bool(0.5).then(|| {
        (0..t)
            .map(|_| FrameLabel::ALL[rng.random_range(0..3)])
            .collect()
    });
    SegmentFrames::new(id, embeddings, activity, labels).unwrap()
}

fn same_content(a: &SegmentFrames, b: &SegmentFrames) -> bool {
    a.embeddings() == b.embeddings() && a.activity() == b.activity() && a.labels() == b.labels()
}

#[test]
fn thousand_segments_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..1000 {
        let seg = random_segment(&mut rng, i);
        let bin = dir.path().join(format!("s{i}.emb"));
        let jsonl = dir.path().join(format!("s{i}.jsonl"));
        write_segment(&seg, &bin).unwrap();
        write_segment_jsonl(&seg, &jsonl).unwrap();
        assert!(
            same_content(&seg, &read_segment(&bin).unwrap()),
            "binary segment {i}"
        );
        if !seg.is_empty() {
            assert!(
                same_content(&seg, &read_segment(&jsonl).unwrap()),
                "jsonl segment {i}"
            );
        }
    }
}

#[test]
fn enrollment_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enroll.enr");
    let e = Embedding::new(vec![0.5, -0.25, 3.0]).unwrap();
    let meta = EnrollmentMeta {
        tag: Some(EnrollTag::HalfSecond),
        source: "simulator".into(),
        dim: 3,
        seed: Some(7),
    };
    write_enrollment(&e, &meta, &path).unwrap();
    assert_eq!(read_enrollment(&path).unwrap(), e);
    assert_eq!(selfaug::io::read_enrollment_meta(&path).unwrap(), meta);
}

#[test]
fn corrupt_file_reports_path_code_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.emb");
    std::fs::write(&path, b"EMB2\x01\x00").unwrap();
    let err = read_segment(&path).unwrap_err();
    assert_eq!(err.code(), "BadMagic");
    let msg = err.to_string();
    assert!(msg.contains("bad.emb") && msg.contains("offset 0"), "{msg}");
}
