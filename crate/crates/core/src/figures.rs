//! Data behind the six figures, one row type per CSV.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::branch::{continue_branch_with, ContinuationOptions, Sign};
use crate::curve::{
    critical_portrait, find_c_of_n_with, j_value, sweep_alpha_with, C_WINDOW, DEFAULT_STEP,
    DEFAULT_WINDOW,
};
use crate::error::Result;
use crate::io::{write_csv, Header};
use crate::radial::{a_star, ShootingParams, SolverSettings};
use crate::spectral::n_k;
use crate::variational::diagnostics;

/// `lo, lo + step, ..., hi`, built from integer multiples to stay exact.
fn n_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=m).map(|i| lo + step * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig1Row {
    pub k: u32,
    pub sign: Sign,
    pub s: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    pub f_at_zero: f64,
    pub mu: f64,
    pub zero_count: usize,
}

pub fn fig1(k_max: u32, opts: &ContinuationOptions) -> Result<Vec<Fig1Row>> {
    let arcs: Vec<(u32, Sign)> = (2..=k_max)
        .filter(|&k| n_k(k) < opts.n_window.1)
        .flat_map(|k| [(k, Sign::Plus), (k, Sign::Minus)])
        .collect();
    let traced: Vec<Result<Vec<Fig1Row>>> = arcs
        .par_iter()
        .map(|&(k, sign)| {
            let arc = continue_branch_with(k, sign, opts)?;
            Ok(arc
                .points
                .iter()
                .map(|p| Fig1Row {
                    k,
                    sign,
                    s: p.arclength_s,
                    n: p.n,
                    a: p.a,
                    f_at_zero: p.f_at_zero,
                    mu: p.mu,
                    zero_count: p.zero_count,
                })
                .collect())
        })
        .collect();
    Ok(traced.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    pub alpha: f64,
}

/// `α(a)` on the default window for each `N`.
pub fn fig2(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig2Row>> {
    let mut rows = Vec::new();
    for &n in ns {
        let curve = sweep_alpha_with(n, DEFAULT_WINDOW, DEFAULT_STEP, settings)?;
        rows.extend(curve.samples.iter().map(|s| Fig2Row {
            n,
            a: s.a,
            alpha: s.alpha,
        }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig3Row {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    #[serde(rename = "alpha_minus_2N")]
    pub alpha_minus_2n: f64,
}

pub fn fig3(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig3Row>> {
    Ok(fig2(ns, settings)?
        .into_iter()
        .map(|r| Fig3Row {
            n: r.n,
            a: r.a,
            alpha_minus_2n: r.alpha - 2.0 * r.n,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig4Row {
    #[serde(rename = "N")]
    pub n: f64,
    pub critical_a: f64,
    #[serde(rename = "critical_value_over_4N")]
    pub critical_value_over_4n: f64,
}

pub fn fig4(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig4Row>> {
    let per_n: Vec<Result<Vec<Fig4Row>>> = ns
        .par_iter()
        .map(|&n| {
            let portrait = critical_portrait(&sweep_alpha_with(
                n,
                DEFAULT_WINDOW,
                DEFAULT_STEP,
                settings,
            )?)?;
            let mut pts = portrait.critical_points;
            pts.sort_by(|x, y| x.a.total_cmp(&y.a));
            Ok(pts
                .iter()
                .map(|p| Fig4Row {
                    n,
                    critical_a: p.a,
                    critical_value_over_4n: p.c / (4.0 * n),
                })
                .collect())
        })
        .collect();
    Ok(per_n.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig5JRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig5CRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub c_of_n: f64,
    pub a_star: f64,
}

pub fn fig5_j(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig5JRow>> {
    let grid = n_grid(C_WINDOW.0, C_WINDOW.1, DEFAULT_STEP);
    let pairs: Vec<(f64, f64)> = ns
        .iter()
        .flat_map(|&n| grid.iter().map(move |&a| (n, a)))
        .collect();
    let rows: Vec<Result<Fig5JRow>> = pairs
        .par_iter()
        .map(|&(n, a)| {
            Ok(Fig5JRow {
                n,
                a,
                j: j_value(n, a, settings).map_err(|e| e.at_sample(a))?,
            })
        })
        .collect();
    rows.into_iter().collect()
}

pub fn fig5_c(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig5CRow>> {
    let rows: Vec<Result<Fig5CRow>> = ns
        .par_iter()
        .map(|&n| {
            Ok(Fig5CRow {
                n,
                c_of_n: find_c_of_n_with(n, settings)?,
                a_star: a_star(n),
            })
        })
        .collect();
    rows.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig6Row {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "J_at_astar")]
    pub j_at_astar: f64,
    #[serde(rename = "K_at_astar")]
    pub k_at_astar: f64,
}

pub fn fig6(ns: &[f64], settings: &SolverSettings) -> Result<Vec<Fig6Row>> {
    let rows: Vec<Result<Fig6Row>> = ns
        .par_iter()
        .map(|&n| {
            let d = diagnostics(ShootingParams::explicit(n), settings)
                .map_err(|e| e.at_sample(a_star(n)))?;
            Ok(Fig6Row {
                n,
                j_at_astar: d.j_value,
                k_at_astar: d.k_value,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Parameter grids for the six figures.
#[derive(Debug, Clone)]
pub struct FigureGrids {
    pub fig1_k_max: u32,
    pub fig1_options: ContinuationOptions,
    pub fig2_ns: Vec<f64>,
    pub fig3_ns: Vec<f64>,
    pub fig4_ns: Vec<f64>,
    pub fig5_j_ns: Vec<f64>,
    pub fig5_c_ns: Vec<f64>,
    pub fig6_ns: Vec<f64>,
}

impl Default for FigureGrids {
    fn default() -> Self {
        let mut fig2_ns = vec![25.0];
        fig2_ns.extend((1..=12).map(f64::from));
        let mut fig3_ns: Vec<f64> = (2..=5).map(n_k).collect();
        fig3_ns.extend((0..10).map(|i| 1.0 + 2.0 * i as f64));
        Self {
            fig1_k_max: 5,
            fig1_options: ContinuationOptions::default(),
            fig2_ns,
            fig3_ns,
            fig4_ns: n_grid(1.25, 20.0, 0.25),
            fig5_j_ns: (0..6).map(|i| 1.0 + 2.0 * i as f64).collect(),
            fig5_c_ns: n_grid(0.5, 30.0, 0.5),
            fig6_ns: n_grid(0.5, 30.0, 0.1),
        }
    }
}

/// Write `fig1.csv` to `fig6.csv` (and `fig5_c.csv`) under `out_dir`.
pub fn write_figures(
    out_dir: &Path,
    grids: &FigureGrids,
    settings: &SolverSettings,
) -> Result<Vec<(PathBuf, usize)>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let header = |name: &str| Header::new(format!("figures {name}"), settings);
    let list = |ns: &[f64]| {
        ns.iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };

    let rows = fig1(grids.fig1_k_max, &grids.fig1_options)?;
    let (lo, hi) = grids.fig1_options.n_window;
    let h = Header::new("figures fig1", &grids.fig1_options.settings)
        .with("k_max", grids.fig1_k_max)
        .with("N_window", format!("{lo} {hi}"))
        .with("max_points", grids.fig1_options.max_points);
    let path = out_dir.join("fig1.csv");
    write_csv(&path, &h, &rows)?;
    written.push((path, rows.len()));

    let rows = fig2(&grids.fig2_ns, settings)?;
    let path = out_dir.join("fig2.csv");
    write_csv(
        &path,
        &header("fig2").with("N", list(&grids.fig2_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));

    let rows = fig3(&grids.fig3_ns, settings)?;
    let path = out_dir.join("fig3.csv");
    write_csv(
        &path,
        &header("fig3").with("N", list(&grids.fig3_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));

    let rows = fig4(&grids.fig4_ns, settings)?;
    let path = out_dir.join("fig4.csv");
    write_csv(
        &path,
        &header("fig4").with("N", list(&grids.fig4_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));

    let rows = fig5_j(&grids.fig5_j_ns, settings)?;
    let path = out_dir.join("fig5.csv");
    write_csv(
        &path,
        &header("fig5").with("N", list(&grids.fig5_j_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));

    let rows = fig5_c(&grids.fig5_c_ns, settings)?;
    let path = out_dir.join("fig5_c.csv");
    write_csv(
        &path,
        &header("fig5_c").with("N", list(&grids.fig5_c_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));

    let rows = fig6(&grids.fig6_ns, settings)?;
    let path = out_dir.join("fig6.csv");
    write_csv(
        &path,
        &header("fig6").with("N", list(&grids.fig6_ns)),
        &rows,
    )?;
    written.push((path, rows.len()));
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_exact() {
        let g = n_grid(0.5, 30.0, 0.5);
        assert_eq!(g.len(), 60);
        assert_eq!(*g.last().unwrap(), 30.0);
        let d = FigureGrids::default();
        assert_eq!(d.fig3_ns[..4], [4.0, 10.0, 18.0, 28.0]);
        assert_eq!(*d.fig3_ns.last().unwrap(), 19.0);
    }

    #[test]
    fn fig6_is_zero_at_odd_levels() {
        let rows = fig6(&[10.0], &SolverSettings::default()).unwrap();
        assert!(rows[0].j_at_astar.abs() < 1e-6);
    }
}
