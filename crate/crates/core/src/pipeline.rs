//! End-to-end runs: ingest, ratios, effect scores, then the selected
//! detectors on the scores. The command-line front end is a thin shell over
//! these functions.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boxplot::{box_detect, BoxMethod};
use crate::concordance::{build_matrix, ConcordanceMatrix};
use crate::dbscan::{dbscan_detect, sorted_knn_curve, DbscanParams, DEFAULT_GS};
use crate::error::{Error, Result};
use crate::hb::{hb_detect, HBParams, PercentileMode};
use crate::iforest::{fit_forest, iforest_detect, ForestParams, DEFAULT_NTREES, DEFAULT_U0};
use crate::ingest::{compute_ratios, load_panel, RatioSet};
use crate::knn::{knn_detect, knn_distances, ScoreKind, Threshold, DEFAULT_KS};
use crate::report::{format_f64, DetectionResult, ParamValue, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hb,
    Sabp,
    Boxplot,
    Iforest,
    Dbscan,
    KnnDist,
    KnnWeight,
    All,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hb" => Method::Hb,
            "sabp" => Method::Sabp,
            "boxplot" => Method::Boxplot,
            "iforest" => Method::Iforest,
            "dbscan" => Method::Dbscan,
            "knn-dist" => Method::KnnDist,
            "knn-weight" => Method::KnnWeight,
            "all" => Method::All,
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown method `{other}` (expected hb, sabp, boxplot, iforest, dbscan, knn-dist, knn-weight or all)"
                )))
            }
        })
    }
}

/// Every tunable of a run. Keys accepted by [`RunConfig::set`] are listed in
/// [`RunConfig::KEYS`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub id_col: String,
    pub t1_col: String,
    pub t2_col: String,
    pub method: Method,
    pub hb: HBParams,
    /// Standard boxplot width.
    pub box_c: f64,
    pub q: Option<usize>,
    pub ntrees: usize,
    /// `None` draws a seed from system entropy at run time.
    pub seed: Option<u64>,
    pub max_depth: Option<usize>,
    pub u0: f64,
    pub delta: Option<f64>,
    pub gs: Vec<usize>,
    pub ks: Vec<usize>,
    pub epsilon: Option<f64>,
    pub threshold: Option<f64>,
    /// `k` for the sorted distance curve; defaults to `g - 1`.
    pub curve_k: Option<usize>,
    /// Run detectors on raw ratios instead of effect scores.
    pub on_ratios: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            id_col: "id".into(),
            t1_col: "y1".into(),
            t2_col: "y2".into(),
            method: Method::All,
            hb: HBParams::default(),
            box_c: 1.5,
            q: None,
            ntrees: DEFAULT_NTREES,
            seed: None,
            max_depth: None,
            u0: DEFAULT_U0,
            delta: None,
            gs: DEFAULT_GS.to_vec(),
            ks: DEFAULT_KS.to_vec(),
            epsilon: None,
            threshold: None,
            curve_k: None,
            on_ratios: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParam(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let items: Vec<usize> = value
        .split(',')
        .map(|v| parse(key, v))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::InvalidParam(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidParam(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "input", "id", "t1", "t2", "method", "U", "C", "A", "percentile_mode", "c", "q", "ntrees",
        "seed", "max_depth", "u0", "delta", "g", "k", "epsilon", "threshold", "curve_k", "on_ratios",
    ];

    /// Sets one key from its textual value. Lists (`g`, `k`) are
    /// comma-separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "id" => self.id_col = value.to_string(),
            "t1" => self.t1_col = value.to_string(),
            "t2" => self.t2_col = value.to_string(),
            "method" => self.method = value.trim().parse()?,
            "U" | "hb_u" => self.hb.u = parse(key, value)?,
            "C" | "hb_c" => self.hb.c = parse(key, value)?,
            "A" | "hb_a" => self.hb.a = parse(key, value)?,
            "percentile_mode" => self.hb.percentile_mode = value.trim().parse::<PercentileMode>()?,
            "c" | "box_c" => self.box_c = parse(key, value)?,
            "q" => self.q = Some(parse(key, value)?),
            "ntrees" => self.ntrees = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "max_depth" => self.max_depth = Some(parse(key, value)?),
            "u0" => self.u0 = parse(key, value)?,
            "delta" => self.delta = Some(parse(key, value)?),
            "g" => self.gs = parse_list(key, value)?,
            "k" => self.ks = parse_list(key, value)?,
            "epsilon" => self.epsilon = Some(parse(key, value)?),
            "threshold" => self.threshold = Some(parse(key, value)?),
            "curve_k" => self.curve_k = Some(parse(key, value)?),
            "on_ratios" => self.on_ratios = parse_bool(key, value)?,
            other => return Err(Error::InvalidParam(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    fn knn_threshold(&self) -> Result<Threshold> {
        match (self.threshold, self.epsilon) {
            (Some(_), Some(_)) => Err(Error::InvalidParam(
                "give at most one of `threshold` and `epsilon`".into(),
            )),
            (Some(t), None) => Ok(Threshold::Value(t)),
            (None, Some(e)) => Ok(Threshold::Epsilon(e)),
            (None, None) => Ok(Threshold::None),
        }
    }

    fn wants(&self, m: Method) -> bool {
        self.method == m || self.method == Method::All
    }

    /// Range checks that need no data.
    pub fn validate(&self) -> Result<()> {
        self.hb.validate()?;
        if !(self.box_c.is_finite() && self.box_c > 0.0) {
            return Err(Error::InvalidParam(format!("boxplot c must be positive, got {}", self.box_c)));
        }
        if !(self.u0 > 0.0 && self.u0 < 1.0) {
            return Err(Error::InvalidParam(format!("u0 must lie in (0, 1), got {}", self.u0)));
        }
        if self.ntrees == 0 {
            return Err(Error::InvalidParam("ntrees must be at least 1".into()));
        }
        if let Some(q) = self.q {
            if q < 2 {
                return Err(Error::QTooSmall(q));
            }
        }
        if let Some(d) = self.delta {
            DbscanParams { delta: d, g: 2 }.validate()?;
        }
        if self.gs.iter().any(|&g| g < 2) {
            return Err(Error::InvalidParam("every g must be at least 2".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidParam("every k must be at least 1".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidParam(format!("epsilon must lie in (0, 1], got {e}")));
            }
        }
        self.knn_threshold()?;
        if self.method == Method::Dbscan && self.delta.is_none() {
            return Err(Error::InvalidParam(
                "dbscan needs an explicit delta; run `curve` first and pick delta at the jump of the sorted distances".into(),
            ));
        }
        Ok(())
    }

    fn forest(&self, seed: u64) -> ForestParams {
        ForestParams {
            q: self.q,
            ntrees: self.ntrees,
            seed,
            max_depth: self.max_depth,
        }
    }
}

/// Reads the configured panel and forms ratios.
pub fn load_ratios(cfg: &RunConfig) -> Result<RatioSet> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("no input file given".into()))?;
    let pairs = load_panel(path, &cfg.id_col, &cfg.t1_col, &cfg.t2_col)?;
    compute_ratios(&pairs)
}

fn resolve_seed(cfg: &RunConfig, notes: &mut Vec<String>) -> u64 {
    cfg.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        notes.push(format!("seed drawn from system entropy: {seed}"));
        seed
    })
}

fn finish(mut r: DetectionResult, input: &str, on_ratios: bool, ratios: &RatioSet) -> DetectionResult {
    for s in &mut r.scores {
        if s.name == "x" {
            s.name = input.to_string();
        }
    }
    if r.score == "x" {
        r.score = input.to_string();
    }
    r.input = input.to_string();
    r.params.insert("on_ratios".into(), ParamValue::Bool(on_ratios));
    r.exclusions = ratios.excluded.clone();
    r
}

/// Runs the configured detectors over an already-formed ratio set.
pub fn run_detect(cfg: &RunConfig, ratios: &RatioSet) -> Result<Report> {
    cfg.validate()?;
    let mut notes = Vec::new();
    let hb = hb_detect(ratios, &cfg.hb)?;
    let units = hb.units.clone();
    let (input, x) = if cfg.on_ratios {
        notes.push("detectors other than hb ran on raw ratios (--on-ratios), not on effect scores".into());
        ("ratio", ratios.ratios())
    } else {
        ("E", hb.series("E").expect("hb emits E").to_vec())
    };

    let mut results = Vec::new();
    if cfg.wants(Method::Hb) {
        results.push(finish(hb.clone(), "E", false, ratios));
    }
    if cfg.wants(Method::Sabp) {
        let r = box_detect(&units, &x, BoxMethod::Adjusted)?;
        results.push(finish(r, input, cfg.on_ratios, ratios));
    }
    if cfg.wants(Method::Boxplot) {
        let r = box_detect(&units, &x, BoxMethod::Standard { c: cfg.box_c })?;
        results.push(finish(r, input, cfg.on_ratios, ratios));
    }
    if cfg.wants(Method::Iforest) {
        let seed = resolve_seed(cfg, &mut notes);
        let r = iforest_detect(&units, &x, &cfg.forest(seed), cfg.u0)?;
        results.push(finish(r, input, cfg.on_ratios, ratios));
    }
    let threshold = cfg.knn_threshold()?;
    for kind in [ScoreKind::Distance, ScoreKind::Weight] {
        let m = if kind == ScoreKind::Distance { Method::KnnDist } else { Method::KnnWeight };
        if cfg.wants(m) {
            for &k in &cfg.ks {
                let r = knn_detect(&units, &x, k, kind, threshold)?;
                results.push(finish(r, input, cfg.on_ratios, ratios));
            }
        }
    }
    if cfg.wants(Method::Dbscan) {
        match cfg.delta {
            Some(delta) => {
                for &g in &cfg.gs {
                    let r = dbscan_detect(&units, &x, &DbscanParams { delta, g })?;
                    results.push(finish(r, input, cfg.on_ratios, ratios));
                }
            }
            None => notes.push("dbscan skipped: no delta given; run `curve` and set delta".into()),
        }
    }

    let mut report = Report::new(results);
    report.notes = notes;
    Ok(report)
}

/// Pairwise tau-b between |E|, the isolation score and the k-NN scores.
/// Returns the matrix and any notes (such as an entropy-drawn seed).
pub fn run_compare(cfg: &RunConfig, ratios: &RatioSet) -> Result<(ConcordanceMatrix, Vec<String>)> {
    let mut c = cfg.clone();
    c.method = Method::All;
    c.validate()?;
    let mut notes = Vec::new();
    let hb = hb_detect(ratios, &cfg.hb)?;
    let e = hb.series("E").expect("hb emits E").to_vec();
    let x = if cfg.on_ratios { ratios.ratios() } else { e.clone() };
    let seed = resolve_seed(cfg, &mut notes);
    let forest = fit_forest(&x, &cfg.forest(seed))?;
    let mut scores = vec![("|E|".to_string(), e), ("IF".to_string(), forest.score(&x).u)];
    let knn = cfg
        .ks
        .iter()
        .map(|&k| knn_distances(&x, k))
        .collect::<Result<Vec<_>>>()?;
    for s in &knn {
        scores.push((format!("{}-NN-dist", s.k), s.dist.clone()));
    }
    for s in &knn {
        scores.push((format!("{}-NN-weight", s.k), s.weight.clone()));
    }
    Ok((build_matrix(&scores, &["|E|"])?, notes))
}

/// Sorted `k`-NN distances of the detector input, with `k = curve_k` or
/// `g - 1` for the first configured `g`.
pub fn run_curve(cfg: &RunConfig, ratios: &RatioSet) -> Result<(usize, Vec<(usize, f64)>)> {
    cfg.hb.validate()?;
    let k = match cfg.curve_k {
        Some(k) => k,
        None => cfg.gs.first().copied().unwrap_or(DEFAULT_GS[0]).saturating_sub(1),
    };
    let hb = hb_detect(ratios, &cfg.hb)?;
    let x = if cfg.on_ratios {
        ratios.ratios()
    } else {
        hb.series("E").expect("hb emits E").to_vec()
    };
    Ok((k, sorted_knn_curve(&x, k)?))
}

pub fn curve_csv(k: usize, curve: &[(usize, f64)]) -> String {
    let mut out = format!("rank,knn_dist_{k}\n");
    for (rank, d) in curve {
        out.push_str(&format!("{rank},{}\n", format_f64(*d)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn firms() -> RatioSet {
        RatioSet::from_positive_pairs(synthetic::firms_like(1)).unwrap()
    }

    #[test]
    fn config_keys() {
        let mut c = RunConfig::default();
        c.set("C", "5").unwrap();
        c.set("c", "3").unwrap();
        c.set("g", "6, 11").unwrap();
        c.set("percentile_mode", "deciles").unwrap();
        c.set("on_ratios", "true").unwrap();
        c.set("method", "knn-weight").unwrap();
        assert_eq!((c.hb.c, c.box_c), (5.0, 3.0));
        assert_eq!(c.gs, vec![6, 11]);
        assert_eq!(c.hb.percentile_mode, PercentileMode::Deciles);
        assert!(c.on_ratios);
        assert_eq!(c.method, Method::KnnWeight);
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("k", "5,x").is_err());
        for key in RunConfig::KEYS {
            let mut c = RunConfig::default();
            let v = match *key {
                "method" => "hb",
                "percentile_mode" => "quartiles",
                "on_ratios" => "false",
                "g" | "k" => "5",
                "u0" | "epsilon" => "0.5",
                _ => "3",
            };
            c.set(key, v).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn dbscan_requires_delta() {
        let c = RunConfig {
            method: Method::Dbscan,
            ..RunConfig::default()
        };
        let err = run_detect(&c, &firms()).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("curve"));
    }

    #[test]
    fn all_methods_on_scores() {
        let c = RunConfig {
            seed: Some(42),
            ntrees: 50,
            delta: Some(5.0),
            ..RunConfig::default()
        };
        let report = run_detect(&c, &firms()).unwrap();
        let methods: Vec<&str> = report.results.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            methods,
            vec![
                "hb", "sabp", "boxplot", "iforest", "knn-dist", "knn-dist", "knn-dist", "knn-weight",
                "knn-weight", "knn-weight", "dbscan", "dbscan", "dbscan"
            ]
        );
        for r in &report.results {
            assert_eq!(r.input, "E");
            assert_eq!(r.replay(), r.flagged, "{}", r.method);
            assert_eq!(r.units.len(), 509);
        }
        assert!(report.notes.is_empty());
        let again = run_detect(&c, &firms()).unwrap();
        assert_eq!(crate::report::to_json(&report), crate::report::to_json(&again));
    }

    #[test]
    fn missing_seed_is_recorded() {
        let c = RunConfig {
            method: Method::Iforest,
            ntrees: 5,
            ..RunConfig::default()
        };
        let report = run_detect(&c, &firms()).unwrap();
        let seed = match &report.results[0].params["seed"] {
            ParamValue::UInt(s) => *s,
            other => panic!("{other:?}"),
        };
        assert_eq!(report.notes, vec![format!("seed drawn from system entropy: {seed}")]);
    }

    #[test]
    fn on_ratios_is_marked() {
        let c = RunConfig {
            method: Method::Sabp,
            on_ratios: true,
            ..RunConfig::default()
        };
        let report = run_detect(&c, &firms()).unwrap();
        assert_eq!(report.results[0].input, "ratio");
        assert_eq!(report.results[0].params["on_ratios"], ParamValue::Bool(true));
        assert!(report.results[0].series("ratio").is_some());
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn compare_layout() {
        let c = RunConfig {
            seed: Some(7),
            ntrees: 50,
            ..RunConfig::default()
        };
        let (m, _) = run_compare(&c, &firms()).unwrap();
        assert_eq!(m.labels, crate::concordance::COMPARISON_LABELS.to_vec());
        assert_eq!(m.tau.len(), 8);
        let (again, _) = run_compare(&c, &firms()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn curve_defaults_to_g_minus_one() {
        let c = RunConfig {
            gs: vec![11],
            ..RunConfig::default()
        };
        let (k, curve) = run_curve(&c, &firms()).unwrap();
        assert_eq!(k, 10);
        assert_eq!(curve.len(), 509);
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        let csv = curve_csv(k, &curve);
        assert!(csv.starts_with("rank,knn_dist_10\n"));
        assert_eq!(csv.lines().count(), 510);
    }
}
