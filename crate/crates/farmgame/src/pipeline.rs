//! The full analysis: trajectories, Isomap, elbow and K-means, archetype
//! labels, decision-time statistics, power-law fits and treatment
//! sensitivity. `write_outputs` turns the result into CSV and SVG files.

use std::fs;
use std::io;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use farmgame_core::agents::Archetype;
use farmgame_core::clustering::{
    elbow_select, kmeans, label_archetypes, ArchetypeLabeling, ClusteringError, ClusteringResult, ElbowResult,
    KMeansOptions, DEFAULT_SLOPE_THRESHOLD,
};
use farmgame_core::embedding::{isomap_with, Disconnected, Embedding, EmbeddingError, IsomapOptions, DEFAULT_NEIGHBORS};
use farmgame_core::game::{Factor, Level, SessionLog, Treatment};
use farmgame_core::metrics::{
    group_time_stats, round_latencies, round_median_curve, round_medians, summarize, time_table, trajectory,
    treatment_table, GroupTimeStats, MetricsError, PlayerSummary, RiskTrajectory, RoundCurve, TimeTable,
};
use farmgame_core::stats::{fit_power_law, sensitivity, Condition, PowerLawFit, SensitivityReport, StatsError, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

use crate::plot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub neighbors: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub slope_threshold: f64,
    pub alpha: f64,
    pub disconnected: Disconnected,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let km = KMeansOptions::default();
        AnalysisOptions {
            neighbors: DEFAULT_NEIGHBORS,
            k_min: 1,
            k_max: 10,
            seed: 0,
            restarts: km.restarts,
            max_iter: km.max_iter,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            disconnected: Disconnected::Error,
        }
    }
}

impl AnalysisOptions {
    pub fn k_range(&self) -> RangeInclusive<usize> {
        self.k_min..=self.k_max
    }

    pub fn kmeans(&self) -> KMeansOptions {
        KMeansOptions {
            max_iter: self.max_iter,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("{n} sessions are too few for k = {k} neighbors; need at least k + 1")]
    TooFewSessions { n: usize, k: usize },
    #[error("K range {0}..={1} is invalid")]
    KRange(usize, usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub trajectories: Vec<RiskTrajectory>,
    pub summaries: Vec<PlayerSummary>,
    pub embedding: Embedding,
    pub components: usize,
    pub elbow: ElbowResult,
    pub clustering: ClusteringResult,
    pub labeling: ArchetypeLabeling,
    pub time: TimeTable,
    pub group_time: Vec<GroupTimeStats>,
    pub curves: Vec<RoundCurve>,
    pub fits: Vec<Result<PowerLawFit, StatsError>>,
    pub treatment_means: Vec<f64>,
    pub sensitivity: Vec<SensitivityReport>,
}

impl Analysis {
    pub fn group_name(&self, cluster: usize) -> String {
        match self.labeling.labels.get(cluster).copied().flatten() {
            Some(a) => a.name().to_string(),
            None => format!("cluster{cluster}"),
        }
    }

    pub fn label_of(&self, player: usize) -> Option<Archetype> {
        self.labeling.labels[self.clustering.assignment[player]]
    }
}

pub fn analyze(sessions: &[SessionLog], options: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let n = sessions.len();
    if n <= options.neighbors {
        return Err(AnalysisError::TooFewSessions { n, k: options.neighbors });
    }
    if options.k_min == 0 || options.k_min > options.k_max || options.k_max > n {
        return Err(AnalysisError::KRange(options.k_min, options.k_max));
    }
    let trajectories = sessions.iter().map(trajectory).collect::<Result<Vec<_>, _>>()?;
    let summaries = sessions.iter().map(summarize).collect::<Result<Vec<_>, _>>()?;
    let vectors: Vec<&[f64]> = trajectories.iter().map(|t| t.rho.as_slice()).collect();
    let iso = isomap_with(
        &vectors,
        IsomapOptions {
            neighbors: options.neighbors,
            dims: 2,
            disconnected: options.disconnected,
        },
    )?;
    let elbow = elbow_select(&iso.embedding.coords, options.k_range(), options.seed, options.kmeans())?;
    let clustering = elbow.selected_fit().clone();
    let rho: Vec<Vec<f64>> = trajectories.iter().map(|t| t.rho.clone()).collect();
    let labeling = label_archetypes(&clustering, &rho, options.slope_threshold)?;

    let time = time_table(sessions)?;
    let group_time = group_time_stats(&time, &clustering.assignment, clustering.k)?;
    let latencies = sessions.iter().map(round_latencies).collect::<Result<Vec<_>, _>>()?;
    let curves = round_median_curve(&latencies, &clustering.assignment)?;
    let fits = curves.iter().map(|c| fit_power_law(&c.fit_points())).collect();

    let table = treatment_table(sessions)?;
    let treatment_means = table.means()?;
    let mut reports = vec![sensitivity(&table, None, options.alpha)?];
    for level in [Level::Low, Level::High] {
        let condition = Condition {
            factor: Factor::ContagionRate,
            level,
        };
        reports.push(sensitivity(&table, Some(condition), options.alpha)?);
    }
    Ok(Analysis {
        trajectories,
        summaries,
        embedding: iso.embedding,
        components: iso.components,
        elbow,
        clustering,
        labeling,
        time,
        group_time,
        curves,
        fits,
        treatment_means,
        sensitivity: reports,
    })
}

/// Re-cluster at a fixed K, bypassing the elbow (for diagnostics).
pub fn cluster_at(analysis: &Analysis, k: usize, options: &AnalysisOptions) -> Result<ClusteringResult, ClusteringError> {
    kmeans(&analysis.embedding.coords, k, options.seed, options.kmeans())
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Six significant digits.
fn pval(p: f64) -> String {
    format!("{p:.5e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn condition_name(c: Option<Condition>) -> String {
    match c {
        None => "all".into(),
        Some(c) => format!("{}={}", c.factor.name(), level_name(c.factor, c.level)),
    }
}

fn level_name(f: Factor, l: Level) -> &'static str {
    let (lo, hi) = f.level_names();
    match l {
        Level::Low => lo,
        Level::High => hi,
    }
}

fn csv_file(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

/// Write every table and plot into `dir`. Returns the paths written.
pub fn write_outputs(a: &Analysis, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let ids: Vec<&str> = a.trajectories.iter().map(|t| t.player_id.as_str()).collect();

    let mut header = vec!["player_id".to_string()];
    header.extend((1..=32).map(|r| format!("r{r}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.push(csv_file(
        dir,
        "trajectories.csv",
        &header_refs,
        a.trajectories.iter().map(|t| {
            let mut row = vec![t.player_id.clone()];
            row.extend(t.rho.iter().map(|v| num(*v)));
            row
        }),
    )?);

    out.push(csv_file(
        dir,
        "embedding.csv",
        &["player_id", "x", "y"],
        ids.iter().enumerate().map(|(i, id)| {
            let p = a.embedding.coords.row(i);
            vec![id.to_string(), num(p[0]), num(p[1])]
        }),
    )?);

    out.push(csv_file(
        dir,
        "clusters.csv",
        &["player_id", "cluster", "label"],
        ids.iter().enumerate().map(|(i, id)| {
            let c = a.clustering.assignment[i];
            let label = a.label_of(i).map(|l| l.name().to_string()).unwrap_or_default();
            vec![id.to_string(), c.to_string(), label]
        }),
    )?);

    out.push(csv_file(
        dir,
        "distortion_curve.csv",
        &["k", "distortion", "selected"],
        a.elbow
            .curve
            .iter()
            .map(|(k, d)| vec![k.to_string(), num(*d), (*k == a.elbow.selected).to_string()]),
    )?);

    out.push(csv_file(
        dir,
        "summaries.csv",
        &["player_id", "cluster", "label", "session_profit", "mean_rho", "infections"],
        a.summaries.iter().enumerate().map(|(i, s)| {
            vec![
                s.player_id.clone(),
                a.clustering.assignment[i].to_string(),
                a.label_of(i).map(|l| l.name().to_string()).unwrap_or_default(),
                s.session_profit.to_string(),
                num(s.mean_rho),
                s.infection_count.to_string(),
            ]
        }),
    )?);

    out.push(csv_file(
        dir,
        "clusters_summary.csv",
        &["cluster", "label", "players", "median_rho", "slope_per_round"],
        (0..a.clustering.k).map(|c| {
            vec![
                c.to_string(),
                a.group_name(c),
                a.clustering.cluster_sizes()[c].to_string(),
                num(a.labeling.medians[c]),
                num(a.labeling.slopes[c]),
            ]
        }),
    )?);

    let mut rm_rows = Vec::new();
    for c in 0..a.clustering.k {
        let members: Vec<&RiskTrajectory> = a
            .trajectories
            .iter()
            .zip(&a.clustering.assignment)
            .filter(|(_, &g)| g == c)
            .map(|(t, _)| t)
            .collect();
        let med = round_medians(&members);
        let curve = a.curves.iter().find(|cv| cv.group == c);
        for (r, m) in med.iter().enumerate() {
            let lat = curve.and_then(|cv| cv.medians_ms.get(r).copied());
            rm_rows.push(vec![c.to_string(), a.group_name(c), (r + 1).to_string(), num(*m), opt(lat)]);
        }
    }
    out.push(csv_file(
        dir,
        "round_medians.csv",
        &["cluster", "label", "round", "median_rho", "median_latency_ms"],
        rm_rows,
    )?);

    out.push(csv_file(
        dir,
        "time_stats.csv",
        &[
            "cluster",
            "label",
            "players",
            "treatment_mean_ms",
            "treatment_std_ms",
            "median_difference_ms",
            "median_z",
        ],
        a.group_time.iter().map(|g| {
            vec![
                g.group.to_string(),
                a.group_name(g.group),
                g.players.to_string(),
                num(g.treatment_mean_ms),
                num(g.treatment_std_ms),
                num(g.median_difference),
                opt(g.median_z),
            ]
        }),
    )?);

    out.push(csv_file(
        dir,
        "fits.csv",
        &["cluster", "label", "players", "a", "k", "r2"],
        a.curves.iter().zip(&a.fits).map(|(c, f)| {
            let (pa, pk, r2) = match f {
                Ok(f) => (num(f.a), num(f.k), num(f.r2)),
                Err(_) => Default::default(),
            };
            vec![c.group.to_string(), a.group_name(c.group), c.players.to_string(), pa, pk, r2]
        }),
    )?);

    let mut tm_header = vec!["treatment".to_string()];
    tm_header.extend(Factor::ALL.iter().map(|f| f.name().to_string()));
    tm_header.push("mean_rho".into());
    let tm_refs: Vec<&str> = tm_header.iter().map(String::as_str).collect();
    out.push(csv_file(
        dir,
        "treatment_means.csv",
        &tm_refs,
        Treatment::all().map(|t| {
            let mut row = vec![t.index().to_string()];
            row.extend(Factor::ALL.iter().map(|f| {
                let level = if t.is_high(*f) { Level::High } else { Level::Low };
                level_name(*f, level).to_string()
            }));
            row.push(num(a.treatment_means[t.index() as usize]));
            row
        }),
    )?);

    let mut s_rows = Vec::new();
    for report in &a.sensitivity {
        for c in &report.comparisons {
            s_rows.push(vec![
                condition_name(report.condition),
                c.factor.name().to_string(),
                c.low_values.len().to_string(),
                c.high_values.len().to_string(),
                num(c.low_mean),
                num(c.high_mean),
                num(c.test.u),
                pval(c.test.p_two_sided),
                match c.test.method {
                    farmgame_core::stats::RankTestMethod::ExactDp => "exact".into(),
                    farmgame_core::stats::RankTestMethod::NormalApprox => "normal".into(),
                },
                c.significant.to_string(),
            ]);
        }
    }
    out.push(csv_file(
        dir,
        "sensitivity.csv",
        &["condition", "factor", "n_low", "n_high", "low_mean", "high_mean", "u", "p", "method", "significant"],
        s_rows,
    )?);

    for (name, svg) in plots(a) {
        let path = dir.join(name);
        fs::write(&path, svg)?;
        out.push(path);
    }
    Ok(out)
}

fn plots(a: &Analysis) -> Vec<(&'static str, String)> {
    let names: Vec<String> = (0..a.clustering.k).map(|c| a.group_name(c)).collect();
    let points: Vec<(f64, f64, usize)> = (0..a.embedding.coords.rows())
        .map(|i| {
            let p = a.embedding.coords.row(i);
            (p[0], p[1], a.clustering.assignment[i])
        })
        .collect();
    let scatter = plot::scatter("Isomap embedding", "component 1", "component 2", &points, &names);

    let mut rho_series = Vec::new();
    for c in 0..a.clustering.k {
        let members: Vec<&RiskTrajectory> = a
            .trajectories
            .iter()
            .zip(&a.clustering.assignment)
            .filter(|(_, &g)| g == c)
            .map(|(t, _)| t)
            .collect();
        let med = round_medians(&members);
        rho_series.push(plot::Series {
            name: names[c].clone(),
            points: med.iter().enumerate().map(|(r, m)| ((r + 1) as f64, *m)).collect(),
            dashed: false,
        });
    }
    let rho = plot::lines("Median ρ by round", "round", "median ρ", &rho_series, false);

    let mut time_series = Vec::new();
    for (curve, fit) in a.curves.iter().zip(&a.fits) {
        let pts = curve.fit_points();
        time_series.push(plot::Series {
            name: names[curve.group].clone(),
            points: pts.clone(),
            dashed: false,
        });
        if let Ok(f) = fit {
            time_series.push(plot::Series {
                name: format!("{} fit", names[curve.group]),
                points: pts.iter().map(|(t, _)| (*t, f.eval(*t))).collect(),
                dashed: true,
            });
        }
    }
    let time = plot::lines("Median time per round", "round", "seconds", &time_series, true);

    let bars: Vec<plot::Bar> = a.sensitivity[0]
        .comparisons
        .iter()
        .map(|c| plot::Bar {
            name: c.factor.name().to_string(),
            low: c.low_mean,
            high: c.high_mean,
            marked: c.significant,
        })
        .collect();
    let factors = plot::bars("Mean ρ by factor level", "mean ρ", &bars);
    vec![
        ("embedding.svg", scatter),
        ("rho_by_round.svg", rho),
        ("time_loglog.svg", time),
        ("factor_bars.svg", factors),
    ]
}
