use sail_harness::plot::{build_plots, emit_plots};
use sail_harness::results::read_csv;
use sail_harness::{HarnessError, ResultRow};

const TABLE: &[u8] = include_bytes!("fixtures/table1.csv");

fn rows(budgets: &[usize]) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for &b in budgets {
        for seed in 0..10 {
            out.push(ResultRow {
                task: "pick_place".into(),
                strategy: "mcts".into(),
                budget: b,
                retrieval: "SIMILARITY".into(),
                feedback: "STEP_LEVEL".into(),
                seed,
                success: seed < b as u64,
                best_reward: 0.5,
                nodes_expanded: b,
                wall_time_s: 0.0,
            });
        }
    }
    out
}

fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter_map(|l| l.split("<polyline points=\"").nth(1))
        .map(|rest| {
            rest.split('"')
                .next()
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn one_plot_per_task_plus_average() {
    let plots = build_plots(&rows(&[1, 6])).unwrap();
    let names: Vec<&str> = plots.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["pick_place.svg", "average.svg"]);
    for (_, svg) in &plots {
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let lines = polylines(svg);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 2);
    }
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = emit_plots(&rows(&[1, 6, 15]), &dir.path().join("a")).unwrap();
    let b = emit_plots(&rows(&[1, 6, 15]), &dir.path().join("b")).unwrap();
    assert_eq!(a.len(), b.len());
    for (pa, pb) in a.iter().zip(&b) {
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }
}

#[test]
fn a_single_budget_is_insufficient() {
    assert!(matches!(
        build_plots(&rows(&[15])),
        Err(HarnessError::InsufficientData(_))
    ));
}

#[test]
fn table_search_curve_stays_above_single_rollout() {
    let plots = build_plots(&read_csv(TABLE).unwrap()).unwrap();
    assert_eq!(plots.len(), 7);
    let (_, avg) = plots.iter().find(|(n, _)| n == "average.svg").unwrap();
    // Baselines are dashed horizontal lines; find the single-rollout one by
    // its legend colour. Smaller y is a higher rate.
    let attr = |line: &str, name: &str| -> String {
        line.split(&format!("{name}=\"")).nth(1).unwrap().split('"').next().unwrap().to_string()
    };
    let legend = avg.lines().find(|l| l.contains(">single SIMILARITY STEP_LEVEL<")).unwrap();
    let color = attr(legend, "stroke");
    let single_y: f64 = avg
        .lines()
        .find(|l| l.contains("stroke-dasharray") && attr(l, "stroke") == color)
        .map(|l| attr(l, "y1").parse().unwrap())
        .unwrap();
    // 0.25 on a 320 px tall plot area starting at y = 30.
    assert!((single_y - 270.0).abs() < 0.01, "{single_y}");
    let curves = polylines(avg);
    let mcts = curves.iter().find(|c| c.len() == 4).expect("mcts curve over 4 budgets");
    assert!(mcts.iter().all(|&(_, y)| y <= single_y));
    assert!(mcts.windows(2).all(|w| w[1].1 <= w[0].1));
}
