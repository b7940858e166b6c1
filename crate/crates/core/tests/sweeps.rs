use approx::assert_abs_diff_eq;
use zps_core::conditioning::LossBudget;
use zps_core::sweeps::{run_sweep, summarize, Engines, SweepPlan, SweepVariable};
use zps_core::{ExperimentConfig, StateSpec, SweepSpec, Table};

fn grid(n: usize, max: f64) -> Vec<f64> {
    (0..=n).map(|i| max * i as f64 / n as f64).collect()
}

fn plan(
    variable: SweepVariable,
    grid: Vec<f64>,
    engines: Engines,
    states: Vec<StateSpec>,
) -> SweepPlan {
    SweepPlan {
        variable,
        grid,
        engines,
        states,
        eta1_max: None,
        waist: None,
    }
}

fn r_sweep(
    state: StateSpec,
    budget: LossBudget,
    engines: Engines,
    n_pulses: u64,
) -> (SweepSpec, Table) {
    let base = ExperimentConfig::new(state, 0.0, budget, n_pulses).unwrap();
    let spec = SweepSpec::new(
        base,
        plan(SweepVariable::Reflectance, grid(20, 1.0), engines, vec![]),
    )
    .unwrap();
    let table = run_sweep(&spec).unwrap();
    (spec, table)
}

fn col(t: &Table, name: &str) -> Vec<Option<f64>> {
    t.column(name)
        .unwrap_or_else(|| panic!("missing column {name}"))
}

const SMSV: StateSpec = StateSpec::Smsv {
    pair_prob: 1e-4,
    cutoff: None,
};
const HERALDED: StateSpec = StateSpec::Heralded { beta: 0.38 };

#[test]
fn lossy_smsv_endpoint() {
    let (spec, t) = r_sweep(SMSV, LossBudget::reference_setup(), Engines::Analytic, 1);
    let k = col(&t, "K_analytic");
    let end = k.last().unwrap().unwrap();
    assert!((end - 0.861).abs() <= 0.005, "{end}");
    let closed = col(&t, "K_closed_form").last().unwrap().unwrap();
    assert_abs_diff_eq!(closed, 1.0 - 0.5 * 0.86 * 0.32, epsilon = 1e-12);
    let s = summarize(&spec, &t).unwrap();
    assert_abs_diff_eq!(s.k_min.unwrap(), end, epsilon = 1e-15);
    assert_abs_diff_eq!(s.k_max.unwrap(), 1.0, epsilon = 1e-12);
    // K falls monotonically across the grid.
    let ks: Vec<f64> = k.into_iter().flatten().collect();
    assert!(ks.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn heralded_single_photon_excess() {
    let (spec, t) = r_sweep(
        HERALDED,
        LossBudget::reference_setup(),
        Engines::Analytic,
        1,
    );
    let end = col(&t, "K_analytic").last().unwrap().unwrap();
    assert_abs_diff_eq!(end, 1.0 / (1.0 - 0.38 * 0.86 * 0.32), epsilon = 1e-10);
    let s = summarize(&spec, &t).unwrap();
    assert!(s.slope_at_zero.unwrap() > 0.0);

    let base = ExperimentConfig::new(HERALDED, 0.99, LossBudget::reference_setup(), 1).unwrap();
    assert!((base.analytic_k().unwrap() - 1.115).abs() < 1e-3);
}

#[test]
fn coherent_row_is_flat() {
    let (_, t) = r_sweep(
        StateSpec::Coherent {
            mean: 1.0,
            cutoff: None,
        },
        LossBudget::reference_setup(),
        Engines::Analytic,
        1,
    );
    for (a, c) in col(&t, "K_analytic").iter().zip(col(&t, "K_closed_form")) {
        assert_abs_diff_eq!(a.unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.unwrap(), 1.0, epsilon = 1e-15);
    }
}

#[test]
fn analytic_matches_closed_forms() {
    for state in [SMSV, HERALDED] {
        let (_, t) = r_sweep(state, LossBudget::reference_setup(), Engines::Analytic, 1);
        for (a, c) in col(&t, "K_analytic").iter().zip(col(&t, "K_closed_form")) {
            let (a, c) = (a.unwrap(), c.unwrap());
            // The two-term squeezed state deviates from the weak-pump
            // closed form at order pair_prob.
            assert!((a - c).abs() < 1e-3, "{a} vs {c}");
        }
    }
}

#[test]
fn eta_sweep_reaches_unity() {
    let base = ExperimentConfig::new(SMSV, 0.5, LossBudget::reference_setup(), 1).unwrap();
    let etas: Vec<f64> = (0..=8).rev().map(|i| 0.04 * i as f64).collect();
    let spec = SweepSpec::new(
        base.clone(),
        plan(
            SweepVariable::Eta1,
            etas,
            Engines::Analytic,
            vec![SMSV, HERALDED],
        ),
    )
    .unwrap();
    let t = run_sweep(&spec).unwrap();
    for label in ["smsv", "heralded"] {
        let k: Vec<f64> = col(&t, &format!("K_{label}"))
            .into_iter()
            .flatten()
            .collect();
        assert_eq!(k.len(), 9);
        let dev: Vec<f64> = k.iter().map(|k| (k - 1.0).abs()).collect();
        assert!(dev.windows(2).all(|w| w[1] < w[0]), "{label}: {dev:?}");
        assert_abs_diff_eq!(*k.last().unwrap(), 1.0, epsilon = 1e-12);
    }
    // First grid point equals the reflectance sweep at R = 0.5.
    let mut r_base = base;
    r_base.reflectance = zps_core::Reflectance::new(0.5).unwrap();
    let first = col(&t, "K_smsv")[0].unwrap();
    assert_abs_diff_eq!(first, r_base.analytic_k().unwrap(), epsilon = 1e-12);
    assert_eq!(col(&t, "eta1_normalized")[0], Some(1.0));
}

#[test]
fn displacement_sweep_maps_to_efficiency() {
    let base = ExperimentConfig::new(HERALDED, 0.5, LossBudget::reference_setup(), 1).unwrap();
    let mut p = plan(
        SweepVariable::Displacement,
        vec![0.0, 0.5, 1.0, 2.0],
        Engines::Analytic,
        vec![],
    );
    p.waist = Some(1.0);
    let spec = SweepSpec::new(base, p).unwrap();
    let t = run_sweep(&spec).unwrap();
    let eta = col(&t, "eta1");
    assert_abs_diff_eq!(eta[0].unwrap(), 0.32, epsilon = 1e-15);
    assert_abs_diff_eq!(eta[3].unwrap(), 0.32 * (-8.0f64).exp(), epsilon = 1e-15);
    let k: Vec<f64> = col(&t, "K_heralded").into_iter().flatten().collect();
    assert!(k.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn monte_carlo_rows_agree() {
    let mut budget = LossBudget::reference_setup();
    budget.eta2 = 0.28;
    let base = ExperimentConfig::new(HERALDED, 0.0, budget, 1_000_000).unwrap();
    let spec = SweepSpec::new(
        base,
        plan(
            SweepVariable::Reflectance,
            vec![0.1, 0.5, 0.9],
            Engines::Both,
            vec![],
        ),
    )
    .unwrap();
    let t = run_sweep(&spec).unwrap();
    assert!(
        t.mc_disagreements().is_empty(),
        "{:?}",
        t.mc_disagreements()
    );
    assert!(col(&t, "K_mc").iter().all(Option::is_some));
    let again = run_sweep(&spec).unwrap();
    assert_eq!(t, again);
}

#[test]
fn table_serializations() {
    let (_, t) = r_sweep(SMSV, LossBudget::reference_setup(), Engines::Analytic, 1);
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "R,K_analytic,K_closed_form,K_click,K_mc,K_mc_stderr,herald_prob"
    );
    assert_eq!(lines.count(), 21);
    let json = t.to_json();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows[0]["K_mc"].is_null());
    assert_eq!(rows[0]["R"], 0.0);
}
