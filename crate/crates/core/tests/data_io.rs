//! Dataset generation, TSV files and IDX loading.

use abil_core::tasks::{
    gen_sequences, load_idx, read_examples, write_examples, Counts, DigitSource, SyntheticDigitGen,
    TaskId,
};

fn source(seed: u64) -> DigitSource {
    DigitSource::Synthetic(SyntheticDigitGen::new(10, 8, 0.3, seed))
}

const COUNTS: Counts = Counts {
    train: 20,
    val: 5,
    test: 5,
};

#[test]
fn generation_is_deterministic() {
    for task in TaskId::ALL {
        let a = gen_sequences(&source(3), task, COUNTS, 2..=4, 9).unwrap();
        let b = gen_sequences(&source(3), task, COUNTS, 2..=4, 9).unwrap();
        assert_eq!((a.train, a.val, a.test), (b.train, b.val, b.test));
        let c = gen_sequences(&source(3), task, COUNTS, 2..=4, 10).unwrap();
        let d = gen_sequences(&source(3), task, COUNTS, 2..=4, 9).unwrap();
        assert_ne!(c.train, d.train);
    }
}

#[test]
fn generated_lengths_and_digits_are_in_range() {
    let ds = gen_sequences(&source(1), TaskId::Product, COUNTS, 1..=5, 2).unwrap();
    for e in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        let truth = e.truth.as_ref().unwrap();
        assert!((1..=5).contains(&e.input.len()));
        assert_eq!(truth.len(), e.input.len());
        assert!(truth.iter().all(|d| (1..10).contains(d)));
        assert!(e.input.iter().all(|x| x.len() == 8));
    }
}

#[test]
fn tsv_round_trip_for_every_task() {
    let dir = tempfile::tempdir().unwrap();
    for task in TaskId::ALL {
        let ds = gen_sequences(&source(5), task, COUNTS, 1..=4, 1).unwrap();
        let path = dir.path().join(format!("{task}.tsv"));
        write_examples(&path, task, &ds.train).unwrap();
        let (read_task, read) = read_examples(&path).unwrap();
        assert_eq!(read_task, task);
        assert_eq!(read, ds.train);
    }
}

#[test]
fn malformed_tsv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    std::fs::write(&path, "sum\t2\t0.1,0.2\t3\t1,2\n").unwrap();
    assert!(read_examples(&path).is_err());
    std::fs::write(&path, "sum\t1\t0.1\t3\t3\nproduct\t1\t0.1\t3\t3\n").unwrap();
    assert!(read_examples(&path).is_err());
}

fn idx_images(images: &[[u8; 4]]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0000_0803u32, images.len() as u32, 2, 2] {
        out.extend(v.to_be_bytes());
    }
    images.iter().for_each(|im| out.extend(im));
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0000_0801u32, labels.len() as u32] {
        out.extend(v.to_be_bytes());
    }
    out.extend(labels);
    out
}

#[test]
fn idx_files_feed_sequence_generation() {
    let dir = tempfile::tempdir().unwrap();
    let images: Vec<[u8; 4]> = (0..20u8).map(|i| [i * 10, 255, 0, i]).collect();
    let labels: Vec<u8> = (0..20u8).map(|i| i % 10).collect();
    let (ip, lp) = (dir.path().join("img.idx"), dir.path().join("lab.idx"));
    std::fs::write(&ip, idx_images(&images)).unwrap();
    std::fs::write(&lp, idx_labels(&labels)).unwrap();
    let items = load_idx(&ip, &lp).unwrap();
    assert_eq!(items.len(), 20);
    assert_eq!(items[3].0, vec![30.0 / 255.0, 1.0, 0.0, 3.0 / 255.0]);
    assert_eq!(items[13].1, 3);
    let src = DigitSource::from_labeled(items, 10);
    let ds = gen_sequences(&src, TaskId::Sum, COUNTS, 2..=3, 4).unwrap();
    for e in &ds.train {
        for (x, d) in e.input.iter().zip(e.truth.as_ref().unwrap()) {
            assert_eq!((x[3] * 255.0).round() as i64 % 10, *d);
        }
    }
    std::fs::write(&lp, idx_labels(&labels[..19])).unwrap();
    assert!(load_idx(&ip, &lp).is_err());
}
