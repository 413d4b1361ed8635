use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use compdsl_core::cdsl::{parse_cdsl, print_cdsl};
use compdsl_core::ddsl::{parse_ddsl, print_ddsl};
use compdsl_core::idsl::{parse_idsl, print_idsl, resolve_idsl};
use compdsl_core::pdsl::{parse_pdsl, print_pdsl};

fn fixtures(kind: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == kind))
        .collect();
    files.sort();
    assert!(files.len() >= 20, "{kind}: only {} fixtures", files.len());
    files
}

/// parse -> print -> parse must give an equal AST, and printing is a fixpoint.
fn check<T: PartialEq + std::fmt::Debug, E: std::fmt::Debug>(
    kind: &str,
    parse: impl Fn(&str, &str) -> Result<T, E>,
    print: impl Fn(&T) -> String,
) {
    for path in fixtures(kind) {
        let name = path.display().to_string();
        let text = fs::read_to_string(&path).unwrap();
        let first = parse(&text, &name).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        let printed = print(&first);
        let second = parse(&printed, &name).unwrap_or_else(|e| panic!("{name} reprint: {e:?}\n{printed}"));
        assert_eq!(first, second, "{name}");
        assert_eq!(print(&second), printed, "{name}: printer is not a fixpoint");
    }
}

#[test]
fn idsl_fixtures_round_trip() {
    check("idsl", |t, o| parse_idsl(t, o).and_then(resolve_idsl), print_idsl);
}

#[test]
fn cdsl_fixtures_round_trip() {
    check("cdsl", parse_cdsl, print_cdsl);
}

#[test]
fn pdsl_fixtures_round_trip() {
    check("pdsl", parse_pdsl, print_pdsl);
}

#[test]
fn ddsl_fixtures_round_trip() {
    check("ddsl", parse_ddsl, print_ddsl);
}

#[test]
fn whole_suite_is_fast() {
    let start = Instant::now();
    check("idsl", parse_idsl, print_idsl);
    check("cdsl", parse_cdsl, print_cdsl);
    check("pdsl", parse_pdsl, print_pdsl);
    check("ddsl", parse_ddsl, print_ddsl);
    assert!(start.elapsed().as_secs_f64() < 5.0);
}
