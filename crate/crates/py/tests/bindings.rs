use commgraph_py::{hits_at_n, mrr, roc_auc, synth_dataset, PyDataset};

fn row(s: &str, p: &str, c: &str) -> (String, String, String) {
    (s.into(), p.into(), c.into())
}

#[test]
fn dataset_from_tuples_drops_repeated_test_rows() {
    let ds = PyDataset::new(
        vec![row("10.0.0.1", "tcp/502", "10.0.0.2"), row("10.0.0.2", "udp/53", "10.0.0.3")],
        vec![row("10.0.0.2", "tcp/502", "10.0.0.1"), row("10.0.0.1", "udp/53", "10.0.0.3")],
    )
    .unwrap();
    assert_eq!((ds.num_ips(), ds.num_relations()), (3, 2));
    assert_eq!(ds.test_triplets(), vec![row("10.0.0.1", "udp/53", "10.0.0.3")]);
    assert!(PyDataset::new(vec![], vec![]).is_err());
}

#[test]
fn synth_matches_desk_scale() {
    let ds = synth_dataset(7, None).unwrap();
    assert_eq!(ds.num_ips(), 60);
    assert_eq!(ds.train_triplets().len(), ds.inner.train().len());
}

#[test]
fn metric_wrappers() {
    assert_eq!(roc_auc(vec![2.0, 3.0], vec![1.0]).unwrap(), 1.0);
    assert!(roc_auc(vec![], vec![1.0]).is_err());
    assert_eq!(mrr(vec![1.0, 4.0]).unwrap(), 0.625);
    assert_eq!(hits_at_n(vec![1.0, 1.5, 3.0], 1).unwrap(), 1.0 / 3.0);
    assert!(mrr(vec![0.5]).is_err());
}
