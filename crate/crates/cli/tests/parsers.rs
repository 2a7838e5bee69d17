use mrf_cli::artifacts::{parse_map, parse_timing};
use mrf_cli::RunConfig;
use proptest::prelude::*;
use std::path::PathBuf;

fn corpus(target: &str, file: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fuzz", "corpus", target, file].iter().collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn checked_in_seeds_parse() {
    RunConfig::from_toml_str(&corpus("run_config", "minimal.toml")).unwrap();
    let map = parse_map(&corpus("map_csv", "two_by_two.csv"), "seed").unwrap();
    assert_eq!((map.width, map.height), (2, 2));
    assert_eq!(map.t1, vec![800.0, 1600.0, 0.0, 4000.0]);
    assert_eq!(parse_timing(&corpus("timing_csv", "two_stages.csv"), "seed").unwrap().len(), 2);
}

#[test]
fn duplicate_map_pixels_are_rejected() {
    let err = parse_map(&corpus("map_csv", "duplicate_pixel.csv"), "seed").unwrap_err();
    assert!(err.to_string().contains("full image"), "{err}");
    let dup = "x,y,t1,t2,similarity\n0,0,1,1,1\n1,0,1,1,1\n0,0,1,1,1\n0,1,1,1,1\n";
    assert!(parse_map(dup, "dup").unwrap_err().to_string().contains("twice"));
}

#[test]
fn huge_map_coordinates_do_not_overflow() {
    let text = format!("x,y,t1,t2,similarity\n{},{},1,1,1\n", usize::MAX, usize::MAX);
    assert!(parse_map(&text, "huge").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn run_config_never_panics(text in "\\PC{0,200}") {
        let _ = RunConfig::from_toml_str(&text);
    }

    #[test]
    fn map_parser_never_panics(rows in proptest::collection::vec(("[0-9]{1,3}", "[0-9]{1,3}", "[-0-9.e]{0,6}"), 0..16)) {
        let body: String = rows.iter().map(|(x, y, v)| format!("{x},{y},{v},{v},{v}\n")).collect();
        if let Ok(map) = parse_map(&format!("x,y,t1,t2,similarity\n{body}"), "prop") {
            prop_assert_eq!(map.t1.len(), map.width * map.height);
        }
    }

    #[test]
    fn timing_parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_timing(&text, "prop");
        let _ = parse_timing(&format!("stage,atoms,frames,cold_start_seconds,wall_seconds,seconds_per_atom\n{text}"), "prop");
    }
}
