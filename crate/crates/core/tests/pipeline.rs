use std::fs;
use std::path::Path;

use clap::Parser;
use tempfile::TempDir;

use quadjump::cli::{run, Cli, EXIT_UNSUCCESSFUL};
use quadjump::error::Error;
use quadjump::motion_library::{load_trajectory, Library, LibraryIndex, Query};
use quadjump::srb_model::RobotParams;

fn invoke(args: &[&str]) -> (i32, String) {
    let cli = Cli::try_parse_from(std::iter::once("quadjump").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let code = run(&cli, &mut out).unwrap();
    (code, String::from_utf8(out).unwrap())
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn plan_is_feasible_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let (code, text) = invoke(&["plan", "--seed", "1", "--out", a.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("feasible, energy"));
    let (code, _) = invoke(&["plan", "--seed", "1", "--jobs", "2", "-q", "--out", b.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(read_all(&a), read_all(&b));

    let traj = load_trajectory(&a.join("trajectory.bin")).unwrap();
    assert!(traj.energy > 0.0);
    let t3 = traj.duration();
    assert!(t3 > 0.0 && t3 < 0.35 + 0.22 + 0.3 + 1e-9);
    let csv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    let best: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn closed_window_is_reported_infeasible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[planner]\nmax_generations = 40\npopulation = 30\n");
    let out = tmp.path().join("p");
    let (code, text) = invoke(&[
        "plan",
        "--config",
        &cfg,
        "--window",
        "0.15,0.3,0.31,0.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_UNSUCCESSFUL);
    assert!(text.contains("infeasible, worst level L"), "{text}");
    assert!(!out.join("trajectory.bin").exists());
}

#[test]
fn library_build_select_validate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[library]\ncount = 3\nmotions = [\"front\", \"left\", \"yaw_spin\"]\nground_probability = 0.0\nwindow_probability = 0.0\n");
    let lib_dir = tmp.path().join("lib");
    let lib = lib_dir.to_str().unwrap();
    let (code, text) = invoke(&["build-library", "--config", &cfg, "--seed", "4", "--out", lib]);
    assert_eq!(code, 0, "{text}");

    let library = Library::open(&lib_dir).unwrap();
    assert!(library.index.is_sorted());
    assert!(!library.index.entries.is_empty());
    library.verify(&RobotParams::default()).unwrap();

    let entry = library.index.entries[0].clone();
    let (hit, _) = library.select(&Query::new(entry.target_pos, entry.target_rot)).unwrap();
    assert_eq!(hit.file, entry.file);
    let pos = entry.target_pos.map(|v| format!("{v:e}")).join(",");
    let rot = format!("{:e}", entry.target_rot);
    let (code, text) = invoke(&["select", "--library", lib, "--position", &pos, "--rotation", &rot]);
    assert_eq!(code, 0);
    assert!(text.starts_with(&entry.file), "{text}");

    let (code, text) = invoke(&["validate", "--library", lib, "--file", &entry.file]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("constraints satisfied, rollout success"));

    // index survives a save/load round trip
    let yaml = library.index.to_yaml().unwrap();
    assert_eq!(LibraryIndex::from_yaml(&yaml).unwrap(), library.index);

    // a flipped byte is caught on load
    let path = library.path_of(&entry);
    let mut bytes = fs::read(&path).unwrap();
    bytes[40] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(library.load(&entry), Err(Error::Corrupt { .. })));
}

#[test]
fn export_writes_monotone_histories() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[planner]\nmax_generations = 60\npopulation = 40\n");
    let out = tmp.path().join("conv");
    let (code, _) = invoke(&["export-convergence", "--config", &cfg, "--seed", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let files = read_all(&out);
    assert_eq!(files.len(), 3);
    for (name, bytes) in files {
        let text = String::from_utf8(bytes).unwrap();
        let best: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(best.len(), 61, "{name}");
        assert!(best.windows(2).all(|w| w[1] <= w[0]), "{name}");
    }
}

#[test]
fn bad_inputs_are_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[planner]\npopulation = 2\n");
    let cli = Cli::try_parse_from(["quadjump", "plan", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]).unwrap();
    assert!(run(&cli, &mut Vec::new()).is_err());
    let bad = write_config(tmp.path(), "not toml [");
    let cli = Cli::try_parse_from(["quadjump", "--config", &bad, "--print-config"]).unwrap();
    assert!(run(&cli, &mut Vec::new()).is_err());
    let cli = Cli::try_parse_from(["quadjump", "validate", "--trajectory", "/nonexistent.bin"]).unwrap();
    assert!(run(&cli, &mut Vec::new()).is_err());
}
