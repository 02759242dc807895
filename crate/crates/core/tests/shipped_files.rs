use std::fs;
use std::path::PathBuf;

use fedaia::data::CsvSchema;
use fedaia::experiments::{DatasetSpec, ExperimentConfig};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toml_files(dir: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(root().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    out.sort();
    out
}

#[test]
fn shipped_schemas_parse() {
    let files = toml_files("schemas");
    assert!(files.len() >= 2);
    for p in files {
        CsvSchema::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn shipped_configs_validate_and_point_at_shipped_schemas() {
    let files = toml_files("configs");
    assert!(files.len() >= 4);
    for p in files {
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        if let DatasetSpec::Csv { schema, .. } = &cfg.dataset {
            assert!(schema.exists(), "{} names a missing schema", p.display());
        }
    }
}
