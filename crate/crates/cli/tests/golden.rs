use intervene_cli::{run_experiment, ExperimentConfig, ExperimentKind};

fn csv_of(kind: ExperimentKind) -> String {
    let out = run_experiment(&ExperimentConfig::new(kind), None).unwrap();
    assert_eq!(out.tables.len(), 1);
    out.tables[0].table.to_csv()
}

#[test]
fn table2_defaults_match_golden() {
    assert_eq!(csv_of(ExperimentKind::Table2), include_str!("golden/table2.csv"));
}

#[test]
fn fig3_defaults_match_golden() {
    assert_eq!(csv_of(ExperimentKind::Fig3), include_str!("golden/fig3.csv"));
}

#[test]
fn fig3_top_cap_is_flat() {
    let csv = include_str!("golden/fig3.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).filter(|r: &Vec<&str>| r[0] == "2.5").collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[2] == "inf" && r[3] == rows[0][3]));
}
