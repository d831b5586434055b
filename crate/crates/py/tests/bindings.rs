use cellfree::{hierarchical_cluster, log_sum_exp, preset_names, se_from_sinr, PyExperiment, PyNetwork, PySimConfig};

fn two_user_network() -> PyNetwork {
    let beta = vec![vec![1e-10, 2e-11], vec![3e-11, 4e-10]];
    PyNetwork::new(beta, vec![0, 0], 1, None, 1, None).unwrap()
}

#[test]
fn network_runs_controllers() {
    let net = two_user_network();
    let full = net.f_ppc();
    assert_eq!(full, vec![0.1, 0.1]);
    let (q, objectives, stop) = net.wsrm_ppc(None).unwrap();
    assert_eq!(q.len(), 2);
    assert!(objectives.windows(2).all(|w| w[1] >= w[0]));
    assert!(!stop.is_empty());
    let lam = PySimConfig::new(None).unwrap().inner.solver.lambda;
    assert!(net.lse(q.clone(), lam).unwrap() >= net.lse(full, lam).unwrap());
    assert_eq!(net.grad_sinr(0, q.clone()).unwrap().len(), 2);
    assert!(net.sinr(vec![0.1]).is_err());
    assert!(net.grad_sinr(5, q).is_err());
}

#[test]
fn network_rejects_bad_shapes() {
    assert!(PyNetwork::new(vec![vec![1e-10]], vec![0, 0], 1, None, 1, None).is_err());
    assert!(PyNetwork::new(vec![vec![1e-10]], vec![3], 2, None, 1, None).is_err());
    assert!(PyNetwork::new(vec![vec![1e-10]], vec![0], 1, Some(vec![vec![4]]), 1, None).is_err());
    assert!(PyNetwork::new(vec![vec![1e-10]], vec![0], 1, Some(vec![vec![]]), 1, None).is_err());
}

#[test]
fn small_experiment_runs() {
    let mut cfg = PySimConfig::new(Some("[network]\nnum_aps = 8\nnum_users = 3\npilot_length = 2\n")).unwrap();
    cfg.inner.solver.lambda = 5.0;
    let exp = PyExperiment::new("tiny".into(), Some(cfg), Some(vec!["wsrm".into(), "f".into()]), None, None, 4, 3)
        .unwrap();
    assert_eq!(exp.labels(), vec!["wsrm-ppc", "f-ppc"]);
    let set = cellfree_core::harness::monte_carlo(&exp.inner, Some(1)).unwrap();
    assert_eq!(set.series[0].samples.len(), 12);
    assert!(PyExperiment::new("x".into(), None, Some(vec!["nope".into()]), None, None, 1, 1).is_err());
    assert!(PyExperiment::preset("missing").is_err());
}

#[test]
fn free_functions() {
    assert_eq!(preset_names(), vec!["fig2-k15", "fig2-k30", "fig3a", "fig3b"]);
    assert_eq!(se_from_sinr(1.0, 10, 200).unwrap(), 0.95);
    assert!((log_sum_exp(vec![1.0, 2.0], 10.0).unwrap() - 2.0000045).abs() < 1e-7);
    let d = vec![
        vec![0.0, 0.1, 0.9, 0.9],
        vec![0.1, 0.0, 0.9, 0.9],
        vec![0.9, 0.9, 0.0, 0.1],
        vec![0.9, 0.9, 0.1, 0.0],
    ];
    let (partition, merges) = hierarchical_cluster(d, 0.5, "average").unwrap();
    assert_eq!(partition, vec![vec![0, 1], vec![2, 3]]);
    assert_eq!(merges.len(), 3);
    assert!(hierarchical_cluster(vec![vec![0.0, 2.0], vec![2.0, 0.0]], 0.5, "average").is_err());
}
