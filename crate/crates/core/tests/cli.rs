mod common;

use std::path::Path;
use std::process::{Command, Output};

use cst_core::integrity::IntegrityFlags;
use cst_core::phantom::{spec_for_flags, PhantomSpec};
use cst_core::pipeline::{render_phantom_spec, run_phantom, RunManifest};

fn cstkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstkit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn dice_of_identical_and_empty_masks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cstkit(&["phantom", "--output", "p"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("overlap = true"));

    let o = cstkit(&["dice", "p/cst.nii.gz", "p/cst.nii.gz"], d);
    assert_eq!(stdout(&o).trim(), "1.0000");

    // an all-zero prediction: threshold above every voxel value
    let o = cstkit(
        &[
            "dice",
            "p/cst.nii.gz",
            "p/haematoma.nii.gz",
            "--threshold",
            "5",
        ],
        d,
    );
    assert_eq!(stdout(&o).trim(), "1.0000", "both empty");

    let spec = PhantomSpec::default();
    let p = cst_core::phantom::generate_phantom(&spec).unwrap();
    let (c, h, both) = common::brute_counts(&p.cst, &p.haematoma);
    let o = cstkit(&["dice", "p/cst.nii.gz", "p/haematoma.nii.gz"], d);
    assert_eq!(
        stdout(&o).trim(),
        format!("{:.4}", 2.0 * both as f64 / (c + h) as f64)
    );

    let o = cstkit(&["dice", "p/cst.nii.gz", "missing.nii"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dice_of_empty_prediction_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = cst_core::phantom::generate_phantom(&PhantomSpec::default()).unwrap();
    p.cst.write(d.join("truth.nii")).unwrap();
    cst_core::mask::MaskVolume::empty(p.cst.header().clone())
        .write(d.join("pred.nii"))
        .unwrap();
    let o = cstkit(&["dice", "pred.nii", "truth.nii"], d);
    assert_eq!(stdout(&o).trim(), "0.0000");
}

#[test]
fn phantom_spec_file_with_gap_reports_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = PhantomSpec {
        gap_slices_right: vec![10, 11],
        ..PhantomSpec::default()
    };
    std::fs::write(d.join("spec.txt"), render_phantom_spec(&spec)).unwrap();
    let o = cstkit(&["phantom", "--spec", "spec.txt", "--output", "a"], d);
    assert!(stdout(&o).contains("split = true"));
    let o2 = cstkit(&["phantom", "--spec", "spec.txt", "--output", "b"], d);
    assert!(o2.status.success());
    for f in ["cst.nii.gz", "haematoma.nii.gz", "truth.txt"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap()
        );
    }

    std::fs::write(d.join("bad.txt"), "haematoma_center = 16 16 40\n").unwrap();
    let o = cstkit(&["phantom", "--spec", "bad.txt", "--output", "c"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr)
        .to_lowercase()
        .contains("geometry"));
}

/// Three scenarios: haematoma clear of the tract, haematoma on the tract,
/// and a severed tract without overlap.
#[test]
fn integrity_over_three_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases = [("A", false, false), ("B", true, false), ("C", false, true)];
    let mut subjects = Vec::new();
    for (id, overlap, split) in cases {
        let spec = spec_for_flags(IntegrityFlags { overlap, split }, 40 + id.len() as u64);
        run_phantom(&spec, &d.join(id)).unwrap();
        subjects.push((
            id.to_string(),
            format!("{id}/cst.nii.gz"),
            format!("{id}/haematoma.nii.gz"),
        ));
    }
    std::fs::write(
        d.join("m.txt"),
        RunManifest::render(&subjects, None, Some("manual")),
    )
    .unwrap();
    let o = cstkit(&["integrity", "m.txt", "--output", "out", "--jobs", "2"], d);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(d.join("out/integrity.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let got: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r[0], r[1], r[3])).collect();
    assert_eq!(
        got,
        vec![
            ("A", "false", "false"),
            ("B", "true", "false"),
            ("C", "false", "true")
        ]
    );
    assert!(csv.contains("# connectivity: 26"));
    assert!(csv.contains("# haematoma_source: manual"));
    assert!(d.join("out/integrity.json").exists());
}

#[test]
fn integrity_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut subjects = Vec::new();
    for i in 0..10 {
        let id = format!("S{i:02}");
        let spec = spec_for_flags(
            IntegrityFlags {
                overlap: i % 2 == 0,
                split: i % 3 == 0,
            },
            i,
        );
        run_phantom(&spec, &d.join(&id)).unwrap();
        subjects.push((
            id.clone(),
            format!("{id}/cst.nii.gz"),
            format!("{id}/haematoma.nii.gz"),
        ));
    }
    std::fs::write(d.join("S04/cst.nii.gz"), b"not a nifti file").unwrap();
    std::fs::write(d.join("m.txt"), RunManifest::render(&subjects, None, None)).unwrap();

    let o = cstkit(&["integrity", "m.txt", "--output", "out"], d);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.join("out/integrity.csv")).unwrap();
    let data: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(data.len(), 9);
    assert!(!csv.contains("S04"));
    assert!(std::fs::read_to_string(d.join("out/failures.txt"))
        .unwrap()
        .starts_with("S04:"));

    let o = cstkit(&["integrity", "m.txt", "--output", "out2", "--strict"], d);
    assert_eq!(o.status.code(), Some(2));

    // every subject broken
    for i in 0..10 {
        std::fs::write(d.join(format!("S{i:02}/cst.nii.gz")), b"x").unwrap();
    }
    let o = cstkit(&["integrity", "m.txt", "--output", "out3"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.txt"), "# nothing\n").unwrap();
    assert_eq!(
        cstkit(&["integrity", "empty.txt"], d).status.code(),
        Some(1)
    );
    assert_eq!(
        cstkit(&["integrity", "empty.txt", "--connectivity", "8"], d)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(cstkit(&["bogus"], d).status.code(), Some(1));
    assert_eq!(cstkit(&["--help"], d).status.code(), Some(0));
}

#[test]
fn cohort_sim_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cstkit(
        &["cohort-sim", "--n", "60", "--seed", "9", "--output", "sim"],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cstkit(&["integrity", "sim/manifest.txt", "--output", "out"], d);
    assert!(o.status.success());

    // flags measured from the written masks equal the intended ones
    let truth = std::fs::read_to_string(d.join("sim/truth_flags.csv")).unwrap();
    let measured = std::fs::read_to_string(d.join("out/integrity.csv")).unwrap();
    let m: Vec<String> = measured
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{},{}", f[0], f[1], f[3])
        })
        .collect();
    let t: Vec<&str> = truth.lines().skip(1).collect();
    assert_eq!(m, t);

    let o = cstkit(
        &[
            "analyze",
            "--records",
            "sim/records.csv",
            "--integrity",
            "out/integrity.csv",
            "--output",
            "rep",
            "--joint",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reg = std::fs::read_to_string(d.join("rep/regression.txt")).unwrap();
    assert!(reg.contains("β Coefficient [95% CI]"));
    assert!(reg.contains("Joint models"));
    assert!(reg.contains("# se_type: classical OLS"));
    for f in ["cohort_table.txt", "cohort_table.csv", "regression.csv"] {
        let text = std::fs::read_to_string(d.join("rep").join(f)).unwrap();
        assert!(text.starts_with("# tool: cstkit"), "{f}");
        assert!(text.contains("# quantile_convention: type-7"), "{f}");
    }
}
