//! Metrics on a 20-query, 200-judgment fixture against values produced by
//! pytrec_eval (trec_eval 9.0.x) on the same files.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use wvset::evaluation::{compute_metrics, Qrels};
use wvset::run::read_run;

fn fixture(name: &str) -> BufReader<File> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/metrics").join(name);
    BufReader::new(File::open(p).unwrap())
}

const REF_MAP: f64 = 0.5048144078144079;
const REF_GMAP: f64 = 0.27492194953057275;
const REF_P5: f64 = 0.43;
const REF_RECALL: f64 = 0.5826785714285714;
const REF_AP: [(&str, f64); 20] = [
    ("101", 0.6984126984126983),
    ("102", 0.6666666666666666),
    ("103", 0.475),
    ("104", 1.0),
    ("105", 0.3333333333333333),
    ("106", 0.41666666666666663),
    ("107", 0.5),
    ("108", 0.75),
    ("109", 0.8),
    ("110", 0.75),
    ("111", 0.4),
    ("112", 0.0),
    ("113", 0.375),
    ("114", 0.07333333333333333),
    ("115", 0.7435897435897436),
    ("116", 0.5),
    ("117", 0.35714285714285715),
    ("118", 0.2571428571428571),
    ("119", 0.625),
    ("120", 0.375),
];

#[test]
fn matches_reference_tool() {
    let qrels = Qrels::read(fixture("qrels.txt")).unwrap();
    assert_eq!(qrels.judgments.values().map(|m| m.len()).sum::<usize>(), 200);
    let run = read_run(fixture("run.txt")).unwrap();
    let r = compute_metrics(&run, &qrels);
    assert_eq!(r.evaluated_query_count, 20);
    assert_eq!(r.skipped, vec!["999".to_string()]);
    assert!((r.map - REF_MAP).abs() < 1e-4, "map {}", r.map);
    assert!((r.gmap - REF_GMAP).abs() < 1e-4, "gmap {}", r.gmap);
    assert!((r.p_at_5 - REF_P5).abs() < 1e-4, "P@5 {}", r.p_at_5);
    assert!((r.recall_at_1000 - REF_RECALL).abs() < 1e-4, "recall {}", r.recall_at_1000);
    for ((q, ap), m) in REF_AP.iter().zip(&r.per_query) {
        assert_eq!(*q, m.query_id);
        assert!((ap - m.ap).abs() < 1e-9, "query {q}: {} vs {ap}", m.ap);
    }
}
