//! Dataset resolution: known names map to bundled CSV files, anything
//! else is treated as a path. Header rows are sniffed from the first
//! line, matching how the bundled files are laid out.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rooted_loss::dataset::{load_delimited, one_vs_all, Dataset, LoadSchema};

pub const KNOWN_DATASETS: [&str; 4] = ["wine", "ionosphere", "specheart", "madelon"];

fn sniff_header(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .with_context(|| format!("{} is empty", path.display()))?;
    let token = first.split(',').next().unwrap_or("").trim();
    Ok(token.parse::<f64>().is_err())
}

/// Loads a dataset by bundled name or by explicit CSV path.
pub fn resolve(name_or_path: &str, data_dir: &Path) -> Result<Dataset> {
    let path: PathBuf = if KNOWN_DATASETS.contains(&name_or_path) {
        data_dir.join(format!("{name_or_path}.csv"))
    } else if Path::new(name_or_path).exists() {
        name_or_path.into()
    } else {
        bail!(
            "unknown dataset {name_or_path:?}: not a file, and not one of {}",
            KNOWN_DATASETS.join(", ")
        );
    };
    let schema = LoadSchema {
        has_header: sniff_header(&path)?,
        ..LoadSchema::default()
    };
    let data = load_delimited(&path, &schema)?;
    Ok(data)
}

/// Expands a dataset into binary margin tasks: a binary set is one task,
/// a multiclass set becomes one one-vs-all task per class.
pub fn margin_tasks(data: &Dataset) -> Result<Vec<Dataset>> {
    if data.num_classes() == 2 {
        Ok(vec![data.clone()])
    } else {
        Ok(one_vs_all(data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
    }

    #[test]
    fn bundled_names_resolve() {
        let wine = resolve("wine", &data_dir()).unwrap();
        assert_eq!((wine.n(), wine.dim(), wine.num_classes()), (178, 13, 3));
        assert_eq!(margin_tasks(&wine).unwrap().len(), 3);

        let iono = resolve("ionosphere", &data_dir()).unwrap();
        assert_eq!((iono.n(), iono.dim(), iono.num_classes()), (351, 34, 2));
        assert_eq!(margin_tasks(&iono).unwrap().len(), 1);
    }

    #[test]
    fn unknown_name_is_an_error() {
        let err = resolve("no-such-set", &data_dir()).unwrap_err();
        assert!(err.to_string().contains("no-such-set"));
    }

    #[test]
    fn explicit_path_loads() {
        let path = data_dir().join("specheart.csv");
        let d = resolve(path.to_str().unwrap(), Path::new("/nonexistent")).unwrap();
        assert_eq!((d.n(), d.dim()), (267, 44));
    }
}
