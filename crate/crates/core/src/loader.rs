//! File loading with import-path resolution and per-path memoization.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::cdsl::{link_component, parse_cdsl, LinkedComponent};
use crate::diag::{Diagnostic, Diagnostics};
use crate::idsl::{parse_idsl, resolve_idsl, IdslModule};

/// A resolved IDSL module together with the file it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedModule {
    pub path: PathBuf,
    pub module: IdslModule,
}

pub trait IdslLoader {
    /// Loads, parses and resolves the IDSL file named by `import`, as written
    /// in a CDSL file located in `base_dir`.
    fn load_idsl(&self, import: &str, base_dir: &Path) -> Result<Arc<ImportedModule>, Diagnostics>;
}

pub trait ComponentLoader {
    /// Loads and links the CDSL file `path`, relative to `base_dir`.
    fn load_component(&self, path: &str, base_dir: &Path) -> Result<Arc<LoadedComponent>, Diagnostics>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedComponent {
    pub path: PathBuf,
    pub linked: LinkedComponent,
}

/// Filesystem-backed loader for every DSL.
///
/// Relative paths are tried against the including file's directory first,
/// then against each search path in order; the first existing file wins.
/// Results, including failures, are cached per canonical path, so one
/// workspace can be shared between threads.
#[derive(Debug, Default)]
pub struct Workspace {
    search_paths: Vec<PathBuf>,
    idsl_cache: Mutex<HashMap<PathBuf, Result<Arc<ImportedModule>, Diagnostics>>>,
    cdsl_cache: Mutex<HashMap<PathBuf, Result<Arc<LoadedComponent>, Diagnostics>>>,
}

/// Environment variable holding extra import search paths.
pub const SEARCH_PATH_ENV: &str = "COMPDSL_PATH";

impl Workspace {
    pub fn new(search_paths: Vec<PathBuf>) -> Self {
        Workspace { search_paths, ..Default::default() }
    }

    /// Search paths taken from `COMPDSL_PATH`, split with the platform's
    /// path-list separator.
    pub fn from_env() -> Self {
        let paths = std::env::var_os(SEARCH_PATH_ENV)
            .map(|v| std::env::split_paths(&v).filter(|p| !p.as_os_str().is_empty()).collect())
            .unwrap_or_default();
        Workspace::new(paths)
    }

    pub fn search_paths(&self) -> &[PathBuf] {
        &self.search_paths
    }

    pub fn resolve(&self, path: &str, base_dir: &Path) -> Option<PathBuf> {
        let candidate = Path::new(path);
        if candidate.is_absolute() {
            return candidate.is_file().then(|| candidate.to_path_buf());
        }
        std::iter::once(base_dir)
            .chain(self.search_paths.iter().map(PathBuf::as_path))
            .map(|dir| dir.join(candidate))
            .find(|p| p.is_file())
    }

    fn locate(&self, path: &str, base_dir: &Path) -> Result<PathBuf, Diagnostics> {
        let found = self.resolve(path, base_dir).ok_or_else(|| {
            Diagnostics::from(Diagnostic::error("file-not-found", format!("cannot find {path}")).in_file(path))
        })?;
        Ok(found.canonicalize().unwrap_or(found))
    }
}

fn read(path: &Path) -> Result<String, Diagnostics> {
    std::fs::read_to_string(path).map_err(|e| {
        Diagnostic::error("io", format!("cannot read {}: {e}", path.display()))
            .in_file(&path.display().to_string())
            .into()
    })
}

impl IdslLoader for Workspace {
    fn load_idsl(&self, import: &str, base_dir: &Path) -> Result<Arc<ImportedModule>, Diagnostics> {
        let path = self.locate(import, base_dir)?;
        if let Some(hit) = self.idsl_cache.lock().expect("idsl cache poisoned").get(&path) {
            return hit.clone();
        }
        let loaded = read(&path).and_then(|text| {
            let module = resolve_idsl(parse_idsl(&text, &path.display().to_string())?)?;
            Ok(Arc::new(ImportedModule { path: path.clone(), module }))
        });
        self.idsl_cache.lock().expect("idsl cache poisoned").insert(path, loaded.clone());
        loaded
    }
}

impl ComponentLoader for Workspace {
    fn load_component(&self, path: &str, base_dir: &Path) -> Result<Arc<LoadedComponent>, Diagnostics> {
        let full = self.locate(path, base_dir)?;
        if let Some(hit) = self.cdsl_cache.lock().expect("cdsl cache poisoned").get(&full) {
            return hit.clone();
        }
        let loaded = read(&full).and_then(|text| {
            let model = parse_cdsl(&text, &full.display().to_string())?;
            let dir = full.parent().unwrap_or(Path::new("."));
            let linked = link_component(&model, dir, self)?;
            Ok(Arc::new(LoadedComponent { path: full.clone(), linked }))
        });
        self.cdsl_cache.lock().expect("cdsl cache poisoned").insert(full, loaded.clone());
        loaded
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn relative_dir_wins_over_search_path() {
        let here = tempfile::tempdir().unwrap();
        let lib = tempfile::tempdir().unwrap();
        fs::write(here.path().join("A.idsl"), "module Local { };").unwrap();
        fs::write(lib.path().join("A.idsl"), "module Lib { };").unwrap();
        fs::write(lib.path().join("B.idsl"), "module OnlyLib { };").unwrap();
        let ws = Workspace::new(vec![lib.path().to_path_buf()]);
        assert_eq!(ws.load_idsl("A.idsl", here.path()).unwrap().module.name, "Local");
        assert_eq!(ws.load_idsl("B.idsl", here.path()).unwrap().module.name, "OnlyLib");
        assert!(ws.load_idsl("C.idsl", here.path()).is_err());
    }

    #[test]
    fn loads_are_memoized() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("A.idsl");
        fs::write(&file, "module A { };").unwrap();
        let ws = Workspace::default();
        let first = ws.load_idsl("A.idsl", dir.path()).unwrap();
        fs::write(&file, "module Changed { };").unwrap();
        let second = ws.load_idsl("A.idsl", dir.path()).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
    }

    #[test]
    fn component_links_through_workspace() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("Mouth.idsl"), "module Mouth { interface Mouth { void open(); }; };").unwrap();
        fs::write(
            dir.path().join("C.cdsl"),
            r#"import "Mouth.idsl"; component C { communications { requires Mouth; }; };"#,
        )
        .unwrap();
        let ws = Workspace::default();
        let c = ws.load_component("C.cdsl", dir.path()).unwrap();
        assert_eq!(c.linked.model.requires[0].module.as_deref(), Some("Mouth"));
    }
}
