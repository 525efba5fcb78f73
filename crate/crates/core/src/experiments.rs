//! Window-size sweeps and random hyperparameter search.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{windows_for_missions, Mission, SampleWindow, WindowSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluation_windows, rmse, speed_error, apply_method, Method};
use crate::geometry::BeamGeometry;
use crate::models::{build_model, train_with_progress, BeamRegressor, ModelSpec, TrainedModel};

pub const SEARCH_LEARNING_RATES: [f64; 3] = [1e-5, 5e-5, 1e-4];
pub const SEARCH_HIDDEN_SIZES: [usize; 4] = [100, 250, 500, 750];
pub const SEARCH_LSTM_OUTPUTS: [usize; 2] = [5, 7];
pub const DEFAULT_SEARCH_DRAWS: usize = 15;

/// Trains `spec` on the training missions.
pub fn train_on_missions(
    spec: &ModelSpec,
    train: &[Mission],
    seed: u64,
    geom: &BeamGeometry,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainedModel> {
    let windows = windows_for_missions(
        train,
        &WindowSpec {
            window_size: spec.window_size,
            missing: spec.missing,
        },
        geom,
    )?;
    train_with_progress(build_model(spec, seed)?, &windows, progress)
}

/// Missing-beam RMSE and speed error of a regressor on prepared windows.
pub fn score(model: &dyn BeamRegressor, windows: &[SampleWindow], geom: &BeamGeometry) -> Result<(f64, f64)> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    let mut reference = Vec::new();
    let mut estimate = Vec::new();
    for w in windows {
        let (filled, v) = apply_method(Method::MissBeamNet, w, geom, 1, Some(model))?;
        truth.extend(w.target.iter().copied());
        pred.extend(filled.expect("models fill beams").ordered());
        reference.push(geom.ls_velocity(&w.current_full())?);
        estimate.push(v);
    }
    Ok((rmse(&truth, &pred)?, speed_error(&reference, &estimate)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub window_size: usize,
    pub beam_rmse: f64,
    pub speed_error: f64,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweep {
    pub missing: crate::beams::BeamSet,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    /// Window size with the lowest missing-beam RMSE.
    pub best_window: usize,
}

/// Trains one model per window size and scores each on the same test
/// epochs (those with at least `max(windows)` past epochs).
pub fn window_sweep(
    base: &ModelSpec,
    windows: &[usize],
    train: &[Mission],
    test: &[Mission],
    seed: u64,
    geom: &BeamGeometry,
    progress: &mut dyn FnMut(usize, usize, f64),
) -> Result<WindowSweep> {
    if windows.is_empty() || windows.contains(&0) {
        return Err(Error::InvalidSpec("window sweep needs positive window sizes".into()));
    }
    let largest = *windows.iter().max().expect("non-empty");
    let test_windows = evaluation_windows(test, base.missing, largest, geom)?;
    if test_windows.is_empty() {
        return Err(Error::Evaluation(format!("no test epoch has {largest} epochs of history")));
    }
    let mut points = Vec::with_capacity(windows.len());
    for &n in windows {
        let mut spec = base.clone();
        spec.window_size = n;
        let model = train_on_missions(&spec, train, seed, geom, &mut |e, l| progress(n, e, l))?;
        let (beam_rmse, speed) = score(&model, &test_windows, geom)?;
        points.push(SweepPoint {
            window_size: n,
            beam_rmse,
            speed_error: speed,
            final_loss: model.loss_history.last().copied(),
        });
    }
    let best_window = points
        .iter()
        .min_by(|a, b| a.beam_rmse.total_cmp(&b.beam_rmse))
        .map(|p| p.window_size)
        .expect("non-empty");
    Ok(WindowSweep {
        missing: base.missing,
        seed,
        points,
        best_window,
    })
}

impl WindowSweep {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window_size", "beam_rmse", "speed_error", "final_loss", "best"])?;
        for p in &self.points {
            w.write_record([
                p.window_size.to_string(),
                p.beam_rmse.to_string(),
                p.speed_error.to_string(),
                p.final_loss.map(|l| l.to_string()).unwrap_or_default(),
                u8::from(p.window_size == self.best_window).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// RMSE against window size as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        let xs: Vec<f64> = self.points.iter().map(|p| p.window_size as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.beam_rmse).collect();
        line_chart_svg(
            &format!("Missing beam {} RMSE against window size", self.missing.tag()),
            "Window size",
            "RMSE [m/s]",
            &xs,
            &ys,
        )
    }
}

/// One grid point of the hyperparameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub lstm_output_size: usize,
}

/// The full 24-point grid in a fixed order.
pub fn search_grid() -> Vec<HyperParams> {
    let mut grid = Vec::new();
    for &learning_rate in &SEARCH_LEARNING_RATES {
        for &hidden_size in &SEARCH_HIDDEN_SIZES {
            for &lstm_output_size in &SEARCH_LSTM_OUTPUTS {
                grid.push(HyperParams {
                    learning_rate,
                    hidden_size,
                    lstm_output_size,
                });
            }
        }
    }
    grid
}

/// `draws` distinct grid points chosen with a seeded generator.
pub fn draw_hyperparams(draws: usize, seed: u64) -> Result<Vec<HyperParams>> {
    let grid = search_grid();
    if draws == 0 || draws > grid.len() {
        return Err(Error::InvalidSpec(format!(
            "draws must be between 1 and {}, got {draws}",
            grid.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, grid.len(), draws).into_iter().map(|i| grid[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub params: HyperParams,
    pub beam_rmse: f64,
    pub speed_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSearch {
    pub missing: crate::beams::BeamSet,
    pub seed: u64,
    pub results: Vec<SearchResult>,
    /// Index into `results` of the lowest missing-beam RMSE.
    pub best: usize,
}

/// Random search; every draw uses the same initialization seed.
pub fn hyperparameter_search(
    base: &ModelSpec,
    draws: usize,
    train: &[Mission],
    test: &[Mission],
    seed: u64,
    geom: &BeamGeometry,
    progress: &mut dyn FnMut(usize, usize, f64),
) -> Result<HyperSearch> {
    let picks = draw_hyperparams(draws, seed)?;
    let test_windows = evaluation_windows(test, base.missing, base.window_size, geom)?;
    if test_windows.is_empty() {
        return Err(Error::Evaluation("no test windows for the search".into()));
    }
    let mut results = Vec::with_capacity(draws);
    for (k, params) in picks.into_iter().enumerate() {
        let mut spec = base.clone();
        spec.learning_rate = params.learning_rate;
        spec.hidden_size = params.hidden_size;
        spec.lstm_output_size = params.lstm_output_size;
        let model = train_on_missions(&spec, train, seed, geom, &mut |e, l| progress(k, e, l))?;
        let (beam_rmse, speed) = score(&model, &test_windows, geom)?;
        results.push(SearchResult {
            params,
            beam_rmse,
            speed_error: speed,
        });
    }
    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.beam_rmse.total_cmp(&b.1.beam_rmse))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(HyperSearch {
        missing: base.missing,
        seed,
        results,
        best,
    })
}

impl HyperSearch {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "draw",
            "learning_rate",
            "hidden_size",
            "lstm_output_size",
            "beam_rmse",
            "speed_error",
            "best",
        ])?;
        for (k, r) in self.results.iter().enumerate() {
            w.write_record([
                k.to_string(),
                r.params.learning_rate.to_string(),
                r.params.hidden_size.to_string(),
                r.params.lstm_output_size.to_string(),
                r.beam_rmse.to_string(),
                r.speed_error.to_string(),
                u8::from(k == self.best).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimal line chart with markers and labelled axes.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 80.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    let _ = writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#, H - B);
    for &x in xs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            px(x),
            H - B + 18.0,
            x
        );
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.4}</text>"#,
            L - 6.0,
            py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (L + W - R) / 2.0,
        H - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (T + H - B) / 2.0,
        (T + H - B) / 2.0,
        escape(y_label)
    );
    let path: Vec<String> = xs.iter().zip(ys).map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="steelblue"/>"#, px(x), py(y));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
