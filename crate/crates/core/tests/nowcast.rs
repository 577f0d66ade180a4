//! End-to-end checks of the pseudo-real-time nowcasting harness.

mod common;

use common::{pooled_rmsfe_profile, single_split_gap, PROFILE_SLACK};
use ridgecast::bridge::{
    build_week_design, compare_variants, nowcast_recursive, DesignOptions, NowcastConfig, ReleaseCalendar, Variant,
};
use ridgecast::dataset::{Panel, Quarter, Series};
use ridgecast::synthetic::{synthetic_panel, SyntheticPanelConfig};

fn panel_with(cfg: SyntheticPanelConfig) -> Panel {
    synthetic_panel(&cfg).unwrap().panel
}

fn replace_values(s: &Series, f: impl Fn(f64) -> f64) -> Series {
    let values = s.values().iter().map(|(p, v)| (*p, f(*v))).collect();
    Series::new(s.id.clone(), s.group, s.frequency, s.release_week, values).unwrap()
}

#[test]
fn constant_target_is_nowcast_exactly() {
    let base = panel_with(SyntheticPanelConfig {
        quarters: 40,
        n_alt: 6,
        ..SyntheticPanelConfig::default()
    });
    let panel = Panel::new(replace_values(&base.target, |_| 0.7), base.predictors.clone()).unwrap();
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let cfg = NowcastConfig::new(base.quarter_range.0.offset(30));
    for v in Variant::ALL {
        let run = nowcast_recursive(&panel, &cal, v, &cfg).unwrap();
        for (k, r) in run.per_week_rmsfe.iter().enumerate() {
            assert!(*r < 1e-6, "{v} week {}: {r}", run.weeks[k]);
        }
    }
}

#[test]
fn pooled_error_profile_falls_with_the_week() {
    let rmsfe = pooled_rmsfe_profile();
    for w in 1..13 {
        assert!(rmsfe[w] <= PROFILE_SLACK * rmsfe[w - 1], "week {} -> {}: {rmsfe:?}", w, w + 1);
    }
    assert!(rmsfe[12] < rmsfe[0], "{rmsfe:?}");
}

#[test]
fn single_split_matches_a_hand_built_bridge_regression() {
    let gap = single_split_gap();
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn alternative_data_wins_when_officials_are_irrelevant() {
    let cfg = SyntheticPanelConfig {
        survey_beta: 0.0,
        ip_beta: 0.0,
        ..SyntheticPanelConfig::default()
    };
    let panel = panel_with(cfg.clone());
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let table = compare_variants(
        &panel,
        &cal,
        &[Variant::AltOnlyScreened, Variant::OfficialsOnly],
        &NowcastConfig::new(cfg.start.offset(40)),
    )
    .unwrap();
    let wins = (0..13).filter(|&c| table.value(0, c) < table.value(1, c)).count();
    assert!(wins >= 11, "alt-only better in {wins}/13 weeks\n{}", table.to_text());
}

#[test]
fn table_shapes_and_duplicate_rows() {
    let cfg = SyntheticPanelConfig {
        quarters: 24,
        n_alt: 5,
        ..SyntheticPanelConfig::default()
    };
    let panel = panel_with(cfg.clone());
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let ncfg = NowcastConfig::new(cfg.start.offset(18));

    let one = compare_variants(&panel, &cal, &[Variant::RidgeAfterSelection], &ncfg).unwrap();
    assert_eq!(one.runs.len(), 1);
    assert_eq!(one.column_minima(), vec![0; 13]);

    let twice = compare_variants(&panel, &cal, &[Variant::FullNoScreen, Variant::FullNoScreen], &ncfg).unwrap();
    assert_eq!(twice.runs[0].per_week_rmsfe, twice.runs[1].per_week_rmsfe);

    let mut single_week = ncfg.clone();
    single_week.weeks = vec![5];
    let t = compare_variants(&panel, &cal, &Variant::STANDARD, &single_week).unwrap();
    assert!(t.runs.iter().all(|r| r.per_week_rmsfe.len() == 1 && r.nowcasts.ncols() == 1));
    assert_eq!(t.column_minima().len(), 1);
}

#[test]
fn constant_survey_enters_the_week_13_design_as_its_level() {
    let base = panel_with(SyntheticPanelConfig {
        quarters: 12,
        n_alt: 3,
        ..SyntheticPanelConfig::default()
    });
    let predictors = base
        .predictors
        .iter()
        .map(|s| if s.id == "survey" { replace_values(s, |_| 2.5) } else { s.clone() })
        .collect();
    let panel = Panel::new(base.target.clone(), predictors).unwrap();
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let quarters: Vec<Quarter> = panel.quarters().collect();
    let d = build_week_design(&panel, &cal, 13, &quarters, DesignOptions::default()).unwrap();
    let col = d.columns.iter().position(|c| c.name() == "survey").unwrap();
    assert!(d.x.column(col).iter().all(|v| *v == 2.5));
}
