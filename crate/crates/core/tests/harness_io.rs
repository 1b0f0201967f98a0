use std::path::Path;

use lisee::harness::{aggregate, emit_outputs, run_scenario, AggregateRow, Scenario, AGGREGATE_HEADER, RAW_HEADER};

fn tiny(methods: &str) -> Scenario {
    format!(
        "m = 2\nk = 2\nn = 4\nb = 1\nsigma2_dbm = -20\np_c_dbm = 20\nsweep.p_budget_dbm = -10, 0\nmethods = {methods}\ntrials = 4\nmaster_seed = 11\n"
    )
    .parse()
    .unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn empty_outputs_are_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny("relay");
    let paths = emit_outputs(&scenario, &[], &[], dir.path()).unwrap();
    for (p, h) in [(&paths.raw, RAW_HEADER.join(",")), (&paths.aggregate, AGGREGATE_HEADER.join(","))] {
        assert_eq!(std::fs::read_to_string(p).unwrap(), format!("{h}\n"));
    }
    assert_eq!(std::fs::read_to_string(&paths.plot).unwrap().lines().count(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.manifest).unwrap()).unwrap();
    assert_eq!(manifest["rows"], 0);
    assert_eq!(manifest["master_seed"], 11);
}

#[test]
fn column_order_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny("lis-1bit");
    let rows = run_scenario(&scenario, Some(1)).unwrap();
    let paths = emit_outputs(&scenario, &rows, &aggregate(&rows), dir.path()).unwrap();
    assert_eq!(header(&paths.raw), "method,sweep,trial,seed,ee,sum_rate,total_power,feasible,iters,wall_ms");
    assert_eq!(header(&paths.aggregate), "method,sweep,mean_ee,stderr_ee,mean_rate,stderr_rate,feas_rate,trials");
    assert_eq!(header(&paths.plot), "method,metric,x,y,y_stderr");
}

#[test]
fn aggregate_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny("lis-1bit, relay");
    let rows = run_scenario(&scenario, Some(2)).unwrap();
    let aggregates = aggregate(&rows);
    let paths = emit_outputs(&scenario, &rows, &aggregates, dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(&paths.aggregate).unwrap();
    let parsed: Vec<AggregateRow> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let f = |i: usize| r[i].parse::<f64>().unwrap();
            AggregateRow {
                method: r[0].to_string(),
                sweep: f(1),
                mean_ee: f(2),
                stderr_ee: f(3),
                mean_rate: f(4),
                stderr_rate: f(5),
                feas_rate: f(6),
                trials: r[7].parse().unwrap(),
            }
        })
        .collect();
    assert_eq!(parsed.len(), aggregates.len());
    for (a, b) in parsed.iter().zip(&aggregates) {
        assert_eq!(a.method, b.method);
        for (x, y) in [
            (a.sweep, b.sweep),
            (a.mean_ee, b.mean_ee),
            (a.stderr_ee, b.stderr_ee),
            (a.mean_rate, b.mean_rate),
            (a.stderr_rate, b.stderr_rate),
            (a.feas_rate, b.feas_rate),
        ] {
            assert!(x == y || (x.is_nan() && y.is_nan()), "{x} vs {y}");
        }
        assert_eq!(a.trials, b.trials);
    }
}

#[test]
fn paired_rows_respect_oracle() {
    let scenario = tiny("lis-1bit, exhaustive");
    let rows = run_scenario(&scenario, None).unwrap();
    let (alt, ex) = rows.split_at(rows.len() / 2);
    for (a, e) in alt.iter().zip(ex) {
        assert_eq!((a.seed, a.sweep_index, a.trial), (e.seed, e.sweep_index, e.trial));
        assert!(a.ee <= e.ee + 1e-9, "{a:?} vs {e:?}");
    }
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_outputs(&tiny("relay"), &[], &[], &blocker.join("out")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        Scenario::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 4);
}
