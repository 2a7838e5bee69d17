use mrf_core::bloch::SliceProfile;
use mrf_core::gan::{ConditionMap, GanModel};
use mrf_core::matching::PhantomSpec;
use mrf_core::nn::{init_mlp, read_mlp_checkpoint, write_mlp_checkpoint, Activation, AdamState};
use mrf_core::{Dictionary, GridSpec, SequenceParams, TissueParams};
use proptest::prelude::*;
use std::path::PathBuf;
use std::sync::OnceLock;

fn small_dictionary() -> Dictionary {
    let params = vec![TissueParams::new(800.0, 60.0).unwrap(), TissueParams::new(1600.0, 100.0).unwrap()];
    let atoms = vec![1.0, 0.0, 0.0, 0.6, 0.8, 0.0];
    Dictionary::new(3, atoms, params).unwrap()
}

fn gan_bytes() -> &'static [u8] {
    static BYTES: OnceLock<Vec<u8>> = OnceLock::new();
    BYTES.get_or_init(|| {
        let params = [TissueParams::new(800.0, 60.0).unwrap(), TissueParams::new(1600.0, 100.0).unwrap()];
        let conditions = ConditionMap::fit(&params, false).unwrap();
        GanModel::new(4, 2, conditions, 1.0, 3).unwrap().to_bytes()
    })
}

fn mlp_bytes() -> Vec<u8> {
    let mlp = init_mlp(&[3, 4, 2], Activation::Tanh, 5).unwrap();
    let mut buf = Vec::new();
    write_mlp_checkpoint(&mut buf, &mlp, &AdamState::new(&mlp)).unwrap();
    buf
}

/// Applies (offset, byte) edits and an optional truncation to a valid buffer.
fn mutate(mut bytes: Vec<u8>, edits: &[(usize, u8)], cut: Option<usize>) -> Vec<u8> {
    for &(at, b) in edits {
        let n = bytes.len();
        bytes[at % n] = b;
    }
    if let Some(c) = cut {
        bytes.truncate(c % (bytes.len() + 1));
    }
    bytes
}

fn corpus(target: &str, file: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fuzz", "corpus", target, file].iter().collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn checked_in_seeds_parse() {
    GridSpec::from_toml_str(&corpus("grid_toml", "coarse.toml")).unwrap();
    assert!(GridSpec::from_toml_str(&corpus("grid_toml", "oversized.toml")).is_err());
    assert_eq!(SequenceParams::from_csv_str(&corpus("sequence_csv", "three_frames.csv"), 2.0, true, 20.64).unwrap().n_frames(), 3);
    SliceProfile::from_csv_str(&corpus("profile_csv", "triangle.csv")).unwrap();
    let spec = PhantomSpec::from_toml_str(&corpus("phantom_toml", "small.toml")).unwrap();
    assert_eq!((spec.width, spec.height), (8, 8));
}

#[test]
fn dictionary_round_trips_and_rejects_truncation() {
    let d = small_dictionary();
    let bytes = d.to_mrfd_bytes();
    assert_eq!(Dictionary::from_mrfd_bytes(&bytes).unwrap(), d);
    for cut in 0..bytes.len() {
        assert!(Dictionary::from_mrfd_bytes(&bytes[..cut]).is_err(), "accepted {cut} bytes");
    }
}

#[test]
fn oversized_phantom_is_rejected() {
    let text = "width = 100000\nheight = 100000\n[[regions]]\nshape = \"disc\"\ncx = 1.0\ncy = 1.0\nradius = 1.0\nt1_ms = 800.0\nt2_ms = 60.0\n";
    assert!(PhantomSpec::from_toml_str(text).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mrfd_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = Dictionary::from_mrfd_bytes(&bytes);
        let mut prefixed = b"MRFD".to_vec();
        prefixed.extend(&bytes);
        let _ = Dictionary::from_mrfd_bytes(&prefixed);
    }

    #[test]
    fn mutated_mrfd_never_panics(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6), cut in proptest::option::of(any::<usize>())) {
        let _ = Dictionary::from_mrfd_bytes(&mutate(small_dictionary().to_mrfd_bytes(), &edits, cut));
    }

    #[test]
    fn mutated_mlp_checkpoint_never_panics(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6), cut in proptest::option::of(any::<usize>())) {
        let _ = read_mlp_checkpoint(&mutate(mlp_bytes(), &edits, cut));
    }

    #[test]
    fn mutated_gan_checkpoint_never_panics(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6), cut in proptest::option::of(any::<usize>())) {
        let _ = GanModel::from_bytes(&mutate(gan_bytes().to_vec(), &edits, cut));
    }

    #[test]
    fn text_parsers_never_panic(text in "\\PC{0,200}") {
        let _ = GridSpec::from_toml_str(&text);
        let _ = PhantomSpec::from_toml_str(&text);
        let _ = SliceProfile::from_csv_str(&text);
        let _ = SequenceParams::from_csv_str(&text, 2.0, true, 20.64);
    }

    #[test]
    fn csv_shaped_input_never_panics(rows in proptest::collection::vec(("[-+0-9.eE]{0,8}", "[-+0-9.eEinfNa]{0,8}"), 0..20)) {
        let body: String = rows.iter().map(|(a, b)| format!("{a},{b}\n")).collect();
        let _ = SliceProfile::from_csv_str(&format!("position,fa_scale\n{body}"));
        let _ = SequenceParams::from_csv_str(&format!("flip_angle_deg,tr_ms\n{body}"), 2.0, true, 20.64);
    }

    #[test]
    fn grid_segments_never_panic(start in -1e12f64..1e12, end in -1e12f64..1e12, step in -10.0f64..1e6) {
        let text = format!("[[t1_segments]]\nstart = {start:?}\nend = {end:?}\nstep = {step:?}\n\n[[t2_segments]]\nstart = 10.0\nend = 20.0\nstep = 10.0\n");
        let _ = GridSpec::from_toml_str(&text);
    }
}
