//! Replays the fuzz corpora and random inputs through every parser entry point.

use std::fs;
use std::path::PathBuf;

use dualbasis::bench::{parse_records_csv, write_records_csv, ExperimentConfig};
use dualbasis::kernels::KernelSpec;
use dualbasis::linalg::matrix_market::{read_matrix_market, to_matrix_market_string};
use dualbasis::pointset::io::{decode_kdb1, encode_kdb1, parse_points_csv};
use proptest::prelude::*;

fn points_csv(data: &[u8]) {
    let Some((&flag, body)) = data.split_first() else { return };
    if let Ok(cloud) = parse_points_csv(body, flag & 1 == 1) {
        assert!(cloud.coords.iter().all(|v| v.is_finite()));
        let _ = cloud.into_sites(None);
    }
}

fn kdb1(data: &[u8]) {
    if let Ok(cloud) = decode_kdb1(data) {
        if let Ok(sites) = cloud.clone().into_sites(None) {
            assert_eq!(decode_kdb1(&encode_kdb1(&sites)).unwrap(), cloud);
        }
    }
}

fn matrix_market(data: &[u8]) {
    if let Ok(m) = read_matrix_market(data) {
        let again = read_matrix_market(to_matrix_market_string(&m).as_bytes()).unwrap();
        assert_eq!(again.nnz(), m.nnz());
    }
}

fn kernel_spec(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<KernelSpec>() {
        for r in [0.0, 1e-3, 0.5, 2.0, 1e3] {
            assert!(spec.eval(r).is_finite());
        }
        let again: KernelSpec = spec.to_string().parse().unwrap();
        assert_eq!(again.family(), spec.family());
    }
}

fn experiment_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        assert!(!cfg.sweep.is_empty() && cfg.n > 0);
    }
}

fn records_csv(data: &[u8]) {
    if let Ok(records) = parse_records_csv(data) {
        let mut out = Vec::new();
        write_records_csv(&records, &mut out).unwrap();
        assert_eq!(parse_records_csv(out.as_slice()).unwrap().len(), records.len());
    }
}

const TARGETS: [(&str, fn(&[u8])); 6] = [
    ("points_csv", points_csv),
    ("kdb1", kdb1),
    ("matrix_market", matrix_market),
    ("kernel_spec", kernel_spec),
    ("experiment_config", experiment_config),
    ("records_csv", records_csv),
];

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut seeds: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    seeds.sort();
    seeds
}

#[test]
fn corpus_seeds_are_handled() {
    for (name, run) in TARGETS {
        let seeds = corpus(name);
        assert!(!seeds.is_empty(), "no seeds for {name}");
        for seed in &seeds {
            run(seed);
        }
    }
}

#[test]
fn valid_seeds_parse() {
    assert!(ExperimentConfig::from_toml_str(&String::from_utf8(corpus("experiment_config")[0].clone()).unwrap()).is_ok());
    for seed in corpus("records_csv") {
        assert!(parse_records_csv(seed.as_slice()).is_ok());
    }
    let kdb_ok = corpus("kdb1").iter().filter(|s| decode_kdb1(s).is_ok()).count();
    assert_eq!(kdb_ok, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parsers_never_panic_on_bytes(data in proptest::collection::vec(any::<u8>(), 0..256)) {
        for (_, run) in TARGETS {
            run(&data);
        }
    }

    #[test]
    fn parsers_never_panic_on_mutated_seeds(target in 0usize..6, pick in any::<usize>(), flips in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
        let (name, run) = TARGETS[target];
        let seeds = corpus(name);
        let mut data = seeds[pick % seeds.len()].clone();
        for (pos, byte) in flips {
            if !data.is_empty() {
                let i = pos % data.len();
                data[i] = byte;
            }
        }
        run(&data);
    }

    #[test]
    fn kernel_spec_text_never_panics(family in "(matern|gaussian|matern_general|matern_half)", nu in "[-0-9.eE+infa]{0,8}", delta in "[-0-9.eE+]{0,8}") {
        kernel_spec(format!("{family}:{nu}:{delta}").as_bytes());
    }
}
