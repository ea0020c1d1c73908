use std::path::Path;
use std::process::{Command, Output};

use pointup::io::report::data_rows;
use pointup::io::{format_xyz, read_xyz};
use pointup::pipeline::{sample_pair, SyntheticShape};

fn pointup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointup")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--unit", "proedgeshuffle", "--ratio", "4", "--k", "16", "--seed", "1", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pointup(&args)
}

#[test]
fn train_writes_checkpoint_and_one_loss_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), &["--steps", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("model.puxp").is_file());
    let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 200);
    let text = stdout(&o);
    let config_at = text.find("# resolved config").unwrap();
    assert!(config_at < text.find("loss:").unwrap());
    for key in ["unit.kind=proedgeshuffle", "unit.k=16", "train.seed=1", "train.lr=0.001", "unit.regression=edgeconv_before"] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = pointup(&["train", "--unit", "proedgeshuffle", "--ratio", "3", "--steps", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ratio must be a power of 2"), "{}", stderr(&o));

    assert_eq!(pointup(&["train", "--unit", "branch", "--out", "x", "--bogus"]).status.code(), Some(2));
    assert_eq!(pointup(&["train", "--unit", "warp", "--out", "x"]).status.code(), Some(2));
    assert_eq!(pointup(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = pointup(&["train", "--unit", "single_mlp", "--steps", "50", "--lr", "1e300", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn upsample_quadruples_points_and_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), &["--steps", "2"]).status.success());
    let model = dir.path().join("model.puxp");
    let s = sample_pair(&SyntheticShape::Sphere { radius: 1.0 }, 256, 1, 7).unwrap();
    let input = dir.path().join("in.xyz");
    std::fs::write(&input, format_xyz(&s.input)).unwrap();
    let out = dir.path().join("out.xyz");
    let o = pointup(&["upsample", "--model", model.to_str().unwrap(), "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_xyz(&out).unwrap().len(), 1024);

    let empty = dir.path().join("empty.xyz");
    std::fs::write(&empty, "").unwrap();
    let o = pointup(&["upsample", "--model", model.to_str().unwrap(), "--input", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let missing = pointup(&["upsample", "--model", "/nonexistent.puxp", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn eval_of_identical_clouds_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.xyz");
    std::fs::write(&a, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    let mesh = dir.path().join("m.off");
    std::fs::write(&mesh, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
    let csv_path = dir.path().join("r.csv");
    let o = pointup(&["eval", "--pred", a.to_str().unwrap(), "--gt", a.to_str().unwrap(), "--mesh", mesh.to_str().unwrap(), "--out", csv_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.contains("# cd:") && csv.contains("# hd:") && csv.contains("# p2f:"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1..4], &["0", "0", "0"]);
}

#[test]
fn compare_two_units_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(
        &cfg,
        "compare.units=branch,nodeshuffle\ncompare.seeds=1,2\nunit.ratio=2\nunit.k=4\nbackbone.width=8\n\
         train.steps=3\ndata.n=16\ndata.shapes=sphere,torus\n",
    )
    .unwrap();
    let out = dir.path().join("t.csv");
    let o = pointup(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&std::fs::read_to_string(&out).unwrap()).into_iter().map(|r| r.join(",")).collect::<Vec<_>>();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("edgeconv_stack,branch,") && rows[1].starts_with("edgeconv_stack,nodeshuffle,"));

    std::fs::write(&cfg, "compare.units=branch\nunit.ratio=2\nunit.kindd=x\n").unwrap();
    let o = pointup(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unit.kindd"));
}

#[test]
fn check_commands_pass_and_replay() {
    let o = pointup(&["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failures"));
    let o = pointup(&["gradcheck", "--case", "unit.proedgeshuffle", "--seed", "9"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1 cases"));
    assert_eq!(pointup(&["gradcheck", "--case", "no.such"]).status.code(), Some(2));

    let o = pointup(&["knncheck", "--clouds", "20", "--graphs", "10"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("expand_index"));
}
