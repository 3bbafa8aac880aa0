use std::io::Write;
use std::time::Duration;

use proptest::prelude::*;

use bigmeans::bench::{run_bench, Algorithm, BenchConfig};
use bigmeans::bigmeans::StepParams;
use bigmeans::competitive::{run_competitive, CompetitiveConfig, Execution};
use bigmeans::ingest::{load, synth_blobs, IngestSpec};
use bigmeans::{evaluate_objective, DataMatrix};

fn write_csv(data: &DataMatrix) -> tempfile::NamedTempFile {
    let mut file = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    writeln!(file, "x,y").unwrap();
    for row in data.iter_rows() {
        writeln!(file, "{},{}", row[0], row[1]).unwrap();
    }
    file.flush().unwrap();
    file
}

#[test]
fn csv_round_trip_then_cluster() {
    let (data, truth) = synth_blobs(3000, 2, 3, 0.5, 3).unwrap();
    let file = write_csv(&data);
    let mut spec = IngestSpec::new(file.path());
    spec.skip_header = true;
    let loaded = load(&spec).unwrap();
    assert_eq!(loaded, data);

    let mut cfg = CompetitiveConfig::new(3, 3, 100, 400, 3, 9);
    cfg.passes_per_epoch = 5;
    let result = run_competitive(&loaded, &cfg).unwrap();
    let found = evaluate_objective(&result.centroids, &loaded).unwrap();
    let planted = evaluate_objective(&truth, &loaded).unwrap();
    assert!(found <= planted * 1.05, "{found} vs planted {planted}");
    assert_eq!(result.assignment.len(), 3000);
}

#[test]
fn worker_traces_decrease_within_epochs() {
    let (data, _) = synth_blobs(5000, 3, 5, 1.0, 4).unwrap();
    let mut cfg = CompetitiveConfig::new(5, 4, 200, 800, 4, 2);
    cfg.passes_per_epoch = 6;
    let result = run_competitive(&data, &cfg).unwrap();
    for trace in &result.traces {
        assert!(!trace.is_empty());
        for w in trace.events.windows(2) {
            assert!(w[1].elapsed > w[0].elapsed);
            if w[1].segment == w[0].segment {
                assert!(w[1].objective <= w[0].objective);
            }
        }
    }
    assert_eq!(result.epochs_done, vec![4; 4]);
}

#[test]
fn bench_summaries_are_ordered() {
    let (data, _) = synth_blobs(4000, 2, 4, 1.0, 5).unwrap();
    let cfg = BenchConfig {
        dataset: "blobs".into(),
        algorithms: vec![Algorithm::Competitive, Algorithm::Bigmeans, Algorithm::Kmeans],
        n_exec: 4,
        k: 4,
        sample_size: 300,
        s_min: 150,
        s_max: 600,
        workers: 2,
        passes_per_epoch: 3,
        epochs: 2,
        bigmeans_samples: None,
        time_budget: Some(Duration::from_secs(30)),
        step: StepParams::default(),
        seed: 1,
        f_star: None,
        success_tol: 0.1,
    };
    let report = run_bench(&data, &cfg).unwrap();
    assert_eq!(report.algorithms.len(), 3);
    for a in &report.algorithms {
        assert_eq!(a.runs.len(), 4);
        assert!(a.epsilon.min <= a.epsilon.median && a.epsilon.median <= a.epsilon.max);
        assert!(a.elapsed.min <= a.elapsed.median && a.elapsed.median <= a.elapsed.max);
        assert!(a.epsilon.min >= -1e-9, "f* is the best observed objective");
    }
    assert!(report.table().contains("#Succ"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parallel_and_sequential_agree(seed in any::<u64>(), workers in 1usize..5, k in 1usize..5) {
        let (data, _) = synth_blobs(2000, 2, 3, 1.0, 8).unwrap();
        let mut cfg = CompetitiveConfig::new(k, workers, 50, 200, 3, seed);
        cfg.passes_per_epoch = 4;
        let parallel = run_competitive(&data, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let sequential = run_competitive(&data, &cfg).unwrap();

        prop_assert_eq!(parallel.centroids.as_slice(), sequential.centroids.as_slice());
        prop_assert_eq!(&parallel.assignment, &sequential.assignment);
        prop_assert_eq!(parallel.s_opt, sequential.s_opt);
        let (mut a, mut b) = (parallel.log.clone(), sequential.log.clone());
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }
}
