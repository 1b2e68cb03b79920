use std::fs;

use serde_json::Value;
use wdplab::io::*;
use wdplab_core::gnn::GnnModel;
use wdplab_core::graph::build_graph;
use wdplab_core::samples::{LabeledInstance, SampleSource, TrainingSample};
use wdplab_core::{Allocation, AuctionInstance, Bid};

fn fig1() -> AuctionInstance {
    AuctionInstance::new(
        "fig1",
        &[6, 3, 4],
        vec![
            Bid::new(vec![2, 0, 0], 1.0),
            Bid::new(vec![2, 2, 1], 5.0),
            Bid::new(vec![0, 1, 1], 2.0),
            Bid::new(vec![0, 1, 4], 3.0),
        ],
    )
}

#[test]
fn instance_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    write_instance(&path, &fig1()).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["name"], "fig1");
    assert_eq!(v["items"][1]["units"], 3);
    assert_eq!(v["bids"][1]["demand"], serde_json::json!([2, 2, 1]));
    assert_eq!(v["bids"][1]["price"], 5.0);
    assert_eq!(read_instance(&path).unwrap(), fig1());
}

#[test]
fn invalid_instances_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"name":"x","items":[{"units":2}],"bids":[{"demand":[3],"price":1}]}"#).unwrap();
    let err = format!("{:#}", read_instance(&path).unwrap_err());
    assert!(err.contains("requests 3 units"), "{err}");
    fs::write(&path, r#"{"name":"x","items":[{"units":2}]"#).unwrap();
    assert!(read_instance(&path).is_err());
}

#[test]
fn allocation_uses_zero_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let mut file = AllocationFile::new(&fig1(), &Allocation::from_bits(&[1, 1, 1, 0])).unwrap();
    assert_eq!(file.revenue, 8.0);
    file.proven_optimal = Some(true);
    write_allocation(&path, &file).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["decisions"], serde_json::json!([1, 1, 1, 0]));
    assert!(v.get("gnn_calls").is_none());
    assert_eq!(read_allocation(&path).unwrap(), file);

    let bad = AllocationFile { decisions: vec![2], ..file };
    assert!(bad.allocation().is_err());
}

#[test]
fn label_round_trip_and_feasibility_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.json");
    let labeled = LabeledInstance { instance: fig1(), allocation: Allocation::from_bits(&[1, 1, 1, 0]), optimal: true };
    write_label(&path, &labeled).unwrap();
    assert_eq!(read_label(&path).unwrap(), labeled);

    let infeasible = LabeledInstance { allocation: Allocation::from_bits(&[1, 1, 1, 1]), ..labeled };
    write_label(&path, &infeasible).unwrap();
    assert!(read_label(&path).is_err());
}

#[test]
fn dataset_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let samples = vec![
        TrainingSample { state: fig1(), label: 1, source: SampleSource::Optimal },
        TrainingSample { state: fig1(), label: 2, source: SampleSource::Suboptimal },
    ];
    write_dataset(&path, &samples).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(v["label_index"], 2);
    assert_eq!(v["source"], "suboptimal");
    assert_eq!(v["instance"]["name"], "fig1");
    assert_eq!(read_dataset(&path).unwrap(), samples);

    fs::write(&path, r#"{"instance":{"name":"x","items":[{"units":1}],"bids":[{"demand":[1],"price":1}]},"label_index":3,"source":"optimal"}"#).unwrap();
    assert!(read_dataset(&path).is_err());
}

#[test]
fn model_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let model = GnnModel::new(16, 21);
    save_model(&path, &model).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let g = build_graph(&fig1()).normalize();
    let (a, b) = (model.forward(&g).unwrap(), loaded.forward(&g).unwrap());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));

    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["layers"][0]["name"], "bid_embed.0");

    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(load_model(&path).is_err());
    fs::write(&path, text.replacen("\"version\": 1", "\"version\": 2", 1)).unwrap();
    let err = format!("{:#}", load_model(&path).unwrap_err());
    assert!(err.contains("version"), "{err}");
}
