//! File formats and end-to-end runs of the `sciss` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use sciss::dataset::{parse_dataset, write_dataset, Dataset};
use sciss::report::{read_reports, write_reports, ReportFile};
use sciss::summary::SummaryFile;
use sciss::CliError;
use sciss_core::pipeline::{fit_methods, Method, PipelineConfig};
use sciss_core::sim::{generate, SimConfig};
use sciss_core::SurrogateFamily;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sciss() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sciss"))
}

#[test]
fn parses_labeled_and_unlabeled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "d.csv",
        "x2,y1,x1,y2,w1\n0.5,1,2.0,0,-1\n1.5,,3.0,,0.25\n",
    );
    let d = parse_dataset(&p).unwrap();
    assert_eq!(d.q, 2);
    assert_eq!(d.labeled.len(), 1);
    assert_eq!(d.unlabeled.len(), 1);
    let s = &d.labeled[0];
    assert!(s.y.get(0) && !s.y.get(1));
    assert_eq!(s.x, vec![2.0, 0.5]);
    assert_eq!(s.w, vec![1.0, -1.0]);
    assert_eq!(d.unlabeled[0].w, vec![1.0, 0.25]);
}

#[test]
fn partial_outcome_row_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "y1,y2,x1\n1,0,0.1\n1,,0.2\n");
    match parse_dataset(&p) {
        Err(CliError::Parse { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("partial"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("y1,y3,x1\n1,0,0\n", "numbered"),
        ("y1,z1\n1,0\n", "unrecognized"),
        ("y1,x1\n2,0\n", "0, 1 or empty"),
        ("y1,x1\n1,abc\n", "expected a number"),
        ("y1,x1\n,0.5\n", "labeled sample is empty"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("bad{i}.csv"), text);
        let err = parse_dataset(&p).unwrap_err();
        assert!(err.to_string().contains(needle), "{err}");
        assert_eq!(err.exit_code(), 1);
    }
    let header: Vec<String> = (1..=16).map(|j| format!("y{j}")).collect();
    let p = write(dir.path(), "wide.csv", &format!("{}\n", header.join(",")));
    assert!(parse_dataset(&p).unwrap_err().to_string().contains("cap of 15"));
}

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig::preset("gauss-c2").unwrap();
    cfg.big_n = 300;
    let (labeled, unlabeled) = generate(&cfg, 0).unwrap();
    let data = Dataset { q: 3, labeled, unlabeled };
    let p = dir.path().join("rt.csv");
    write_dataset(&p, &data).unwrap();
    assert_eq!(parse_dataset(&p).unwrap(), data);
}

#[test]
fn report_round_trip_preserves_every_number() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig::preset("pois-c1").unwrap();
    cfg.big_n = 1000;
    let (l, u) = generate(&cfg, 1).unwrap();
    let pcfg = PipelineConfig {
        methods: vec![Method::Sl, Method::ScissPos, Method::Intr, Method::Ensemble],
        intr_base: sciss_core::pipeline::IntrBase::Pos,
        ..PipelineConfig::default()
    }
    .with_families(vec![SurrogateFamily::Poisson; 3]);
    let fit = fit_methods(&l, &u, 3, &pcfg).unwrap();
    let p = dir.path().join("r.json");
    write_reports(&p, &fit.reports).unwrap();
    let back = read_reports(&p).unwrap();
    assert_eq!(back.len(), fit.reports.len());
    for (a, b) in fit.reports.iter().zip(&back) {
        assert_eq!(a.method, b.method);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.se, b.se);
        assert_eq!(a.ci_low, b.ci_low);
        assert_eq!(a.ci_high, b.ci_high);
        assert_eq!(a.diagnostics, b.diagnostics);
        assert!(b.influence.is_none());
    }
}

#[test]
fn unknown_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = ReportFile {
        schema_version: 99,
        reports: vec![],
    };
    let p = dir.path().join("v.json");
    fs::write(&p, serde_json::to_string(&file).unwrap()).unwrap();
    assert!(matches!(read_reports(&p), Err(CliError::SchemaVersion { found: 99, .. })));
}

#[test]
fn generate_fit_and_contrast_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    for (rep, out) in [(0, "a.json"), (1, "b.json")] {
        let st = sciss()
            .args(["generate", "--preset", "gauss-c1", "--unlabeled", "2000", "--rep", &rep.to_string(), "--out"])
            .arg(&data)
            .status()
            .unwrap();
        assert!(st.success());
        let o = sciss()
            .args(["fit", "--method", "sl,sciss-aug,sciss-pos,ensemble,dr,intr", "--family", "gaussian,gaussian,gaussian"])
            .args(["--intr-pair", "1,2", "--data"])
            .arg(&data)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        for tag in ["SL", "SCISS-Aug", "SCISS-PoS", "ES", "DR", "INTR"] {
            assert!(text.contains(&format!("{tag} (n = 200)")), "{text}");
        }
    }
    let o = sciss()
        .arg("contrast")
        .arg(dir.path().join("a.json"))
        .arg(dir.path().join("b.json"))
        .args(["--edge", "1,2", "--method", "sciss-pos"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("p = "));

    // Several reports per file and no --method is ambiguous.
    let o = sciss()
        .arg("contrast")
        .arg(dir.path().join("a.json"))
        .arg(dir.path().join("b.json"))
        .args(["--edge", "1,2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes_separate_input_from_estimation_failures() {
    let dir = tempfile::tempdir().unwrap();
    // Node 1 is always on, so its logistic regression has no finite solution.
    let mut text = String::from("y1,y2,x1,x2\n");
    for i in 0..40 {
        text.push_str(&format!("1,{},{}.0,0.5\n", i % 2, i % 3));
    }
    text.push_str(",,1.0,0.0\n");
    let p = write(dir.path(), "sep.csv", &text);
    let o = sciss().args(["fit", "--data"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = sciss().args(["fit", "--data"]).arg(dir.path().join("missing.csv")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = sciss().args(["simulate", "--preset", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gauss-c1"));
}

#[test]
fn simulation_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("s{threads}.json"));
        let o = sciss()
            .env("SCISS_THREADS", threads)
            .args(["simulate", "--preset", "gauss-c2", "--reps", "12", "--unlabeled", "1000", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let table = String::from_utf8(o.stdout).unwrap();
        assert!(table.contains("Bias") && table.contains("θ12"));
        outs.push(fs::read_to_string(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let s: SummaryFile = serde_json::from_str(&outs[0]).unwrap();
    assert_eq!((s.reps, s.seed), (12, 7));
    let methods: Vec<&str> = s.methods.iter().map(|m| m.method.as_str()).collect();
    assert_eq!(methods, ["SL", "SCISS-Aug", "SCISS-PoS", "DR", "ES"]);
}

#[test]
fn single_replication_has_no_monte_carlo_se() {
    let o = sciss()
        .args(["simulate", "--preset", "anchor", "--reps", "1", "--unlabeled", "1000"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fewer than two replications"));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("θ12") && l.contains(" - ")));
}

#[test]
fn invalid_thread_count_is_a_configuration_error() {
    let o = sciss()
        .env("SCISS_THREADS", "zero")
        .args(["simulate", "--preset", "gauss-c1", "--reps", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SCISS_THREADS"));
}
