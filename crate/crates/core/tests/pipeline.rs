//! End-to-end checks through the public API: codes, channels, datasets,
//! baselines and analysis.

use mudsim::analysis::{compute_metrics, coverage_bound, coverage_mc, flops_dnn};
use mudsim::baselines::{ls_bomp, stomp, StompConfig};
use mudsim::channel::{macro_pathloss_db, InfKind, InfScenario};
use mudsim::codes::{
    assign_phase_rotations, build_factor_graph, build_mother_constellation, build_scma_codebook, load_code_set,
    save_code_set, select_musa_sequences, CodeSet,
};
use mudsim::datagen::{generate_dataset, load_dataset, save_dataset, unstack_features_smv, ActivityModel, GenerationConfig};
use mudsim::linalg::CMatrix;
use mudsim::Complex;

fn musa_phi() -> (CodeSet, CMatrix<f64>) {
    let set = CodeSet::Musa(select_musa_sequences(14, 21, 0.6, 1).unwrap());
    let phi = set.signatures(0);
    (set, phi)
}

#[test]
fn musa_code_file_round_trip() {
    let (set, phi) = musa_phi();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("codes.nmcs");
    save_code_set(&path, &set).unwrap();
    let file = load_code_set(&path).unwrap();
    assert!(file.is_musa());
    assert_eq!((file.k, file.n), (14, 21));
    assert_eq!(file.signatures(0), phi);
    assert!(phi.mutual_coherence() <= 0.6 + 1e-12);
}

#[test]
fn scma_pilot_matrix_is_sparse_and_exact() {
    let graph = build_factor_graph(6, 8, 3).unwrap();
    graph.validate(3).unwrap();
    let rotated = assign_phase_rotations(&graph, 4).unwrap();
    rotated.validate().unwrap();
    let cb = build_scma_codebook(&rotated, &build_mother_constellation(4, 3).unwrap()).unwrap();
    assert_eq!(cb.identity_error(), 0.0);
    let phi = CodeSet::Scma(cb).signatures::<f64>(0);
    assert_eq!((phi.rows(), phi.cols()), (6, 8));
    for j in 0..8 {
        let nz = phi.column(j).iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nz, 3, "column {j}");
    }
}

#[test]
fn dataset_generation_is_reproducible_and_persists() {
    let (_, phi) = musa_phi();
    let cfg = GenerationConfig { samples: 500, seed: 9, ..Default::default() };
    let a = generate_dataset(&phi, &cfg).unwrap();
    let b = generate_dataset(&phi, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config_hash, cfg.hash(&phi));
    for i in 0..a.samples {
        let n = a.labels_of(i).iter().filter(|&&l| l == 1).count();
        assert!((1..=2).contains(&n));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.nmud");
    save_dataset(&path, &a).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), a);

    let other = GenerationConfig { seed: 10, ..cfg };
    assert_ne!(generate_dataset(&phi, &other).unwrap().features, a.features);
}

#[test]
fn baselines_recover_noiseless_supports() {
    let (_, phi) = musa_phi();
    let cfg = GenerationConfig {
        samples: 300,
        activity: ActivityModel::FixedN(2),
        noiseless: true,
        seed: 4,
        ..Default::default()
    };
    let d = generate_dataset(&phi, &cfg).unwrap();
    let (mut st, mut ls) = (Vec::new(), Vec::new());
    for i in 0..d.samples {
        let x: Vec<f64> = d.features_of(i).iter().map(|&v| f64::from(v)).collect();
        let y: Vec<Complex<f64>> = unstack_features_smv(&x).unwrap();
        let known = StompConfig { n_known: Some(2), ..Default::default() };
        st.extend(stomp(&y, &phi, &known).unwrap().indicator(21));
        ls.extend(ls_bomp(&y, &phi, 2, 1).unwrap().indicator(21));
    }
    for pred in [st, ls] {
        let m = compute_metrics(&pred, &d.labels).unwrap();
        let recall = m.recall.unwrap();
        assert!(recall >= 0.99, "recall {recall}");
        assert!((recall + m.misdetection.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.total(), 300 * 21);
    }
}

#[test]
fn channel_reference_values() {
    assert!((macro_pathloss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
    for kind in InfKind::ALL {
        let s = InfScenario::new(kind);
        let mut prev = f64::INFINITY;
        for step in 0..50 {
            let r2d = s.r2d_min + (s.r2d_max - s.r2d_min) * step as f64 / 49.0;
            let r3d = s.r3d(r2d);
            assert!(s.pathloss_nlos_db(r3d).unwrap() >= s.pathloss_los_db(r3d).unwrap());
            let p = s.los_probability(r2d).unwrap();
            assert!(p > 0.0 && p <= 1.0 && p < prev);
            prev = p;
        }
    }
}

#[test]
fn analysis_tools_agree() {
    let f = flops_dnn(4, 128, 14, 21, 1).unwrap();
    assert_eq!(f.closed_form, f.component_sum());
    for alpha in [1, 5, 20, 40] {
        let b = coverage_bound(7, 3, alpha).unwrap();
        let mc = coverage_mc(7, 3, alpha, 10_000, 3).unwrap();
        assert!(mc.estimate() <= b.bound + 3.0 * mc.adjusted_stderr(), "alpha {alpha}");
    }
}
