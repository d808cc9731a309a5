//! Driving-style features, PCA + k-means clustering into three styles and an
//! MLP recognizer that reproduces the clustering online.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::ingest::{Episode, SampleSet, Style};
use crate::numeric::mlp::{Activation, MlpParams};
use crate::numeric::params::zeros_like;
use crate::numeric::pca::{pca_fit_variance, Pca};
use crate::numeric::stats::{mean, std_dev};
use crate::numeric::{AdamWState, Matrix};
use crate::rng;

pub const MIN_FRAMES: usize = 20;
pub const N_FEATURES: usize = 6;
pub const N_STYLES: usize = 3;
pub const PCA_VARIANCE: f64 = 0.95;

/// Six summary statistics of one vehicle's speed and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleFeatures {
    pub v_mean: f64,
    pub a_mean: f64,
    pub v_std: f64,
    pub a_std: f64,
    pub v_max: f64,
    /// Largest |a|.
    pub a_max: f64,
}

impl StyleFeatures {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.v_mean, self.a_mean, self.v_std, self.a_std, self.v_max, self.a_max]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            v_mean: a[0],
            a_mean: a[1],
            v_std: a[2],
            a_std: a[3],
            v_max: a[4],
            a_max: a[5],
        }
    }
}

pub fn extract_features(v: &[f64], a: &[f64]) -> Result<StyleFeatures> {
    if v.len() < MIN_FRAMES || a.len() != v.len() {
        return Err(Error::Domain(format!(
            "style features need at least {MIN_FRAMES} frames of speed and acceleration, got {}/{}",
            v.len(),
            a.len()
        )));
    }
    Ok(StyleFeatures {
        v_mean: mean(v),
        a_mean: mean(a),
        v_std: std_dev(v),
        a_std: std_dev(a),
        v_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        a_max: a.iter().map(|x| x.abs()).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid; ties go to the lower index.
fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows {
        let d = sq_dist(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows;
    let mut centroids = Matrix::zeros(k, points.cols);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeansResult {
    let (n, d, k) = (points.rows, points.cols, centroids.rows);
    let mut assignments = vec![0; n];
    let mut history = Vec::new();
    for _ in 0..300 {
        let mut inertia = 0.0;
        for i in 0..n {
            let (c, dist) = nearest(points.row(i), &centroids);
            assignments[i] = c;
            inertia += dist;
        }
        history.push(inertia);
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for (s, x) in sums.row_mut(assignments[i]).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            let new: Vec<f64> = sums.row(c).iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, centroids.row(c)).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        if shift < 1e-8 {
            break;
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        let (c, dist) = nearest(points.row(i), &centroids);
        assignments[i] = c;
        inertia += dist;
    }
    history.push(inertia);
    KMeansResult {
        centroids,
        assignments,
        inertia,
        history,
    }
}

/// k-means with k-means++ seeding and `restarts` independent runs; the lowest
/// inertia wins, ties going to the earliest restart.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    if k == 0 || k > points.rows {
        return Err(Error::config(format!(
            "k-means needs 1 <= k <= rows, got k={k} with {} rows",
            points.rows
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng::derive(seed, 0x6b6d_0000 + r as u64);
        let run = lloyd(points, plus_plus_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Maps each of the three clusters to a style. The cluster with the highest
/// standardized `v_mean + a_std` is aggressive, the lowest conservative; equal
/// scores are ordered by `v_max`. `centroids` are in original feature units.
pub fn order_labels(centroids: &Matrix, feature_mean: &[f64], feature_std: &[f64]) -> Result<[Style; N_STYLES]> {
    if centroids.rows != N_STYLES || centroids.cols != N_FEATURES {
        return Err(Error::shape(format!(
            "style labelling expects {N_STYLES}x{N_FEATURES} centroids, got {}x{}",
            centroids.rows, centroids.cols
        )));
    }
    let z = |c: usize, f: usize| {
        let s = if feature_std[f] > 0.0 { feature_std[f] } else { 1.0 };
        (centroids.get(c, f) - feature_mean[f]) / s
    };
    let mut order: Vec<usize> = (0..N_STYLES).collect();
    // Descending score, then descending v_max, then cluster index for full determinism.
    order.sort_by(|&a, &b| {
        let (sa, sb) = (z(a, 0) + z(a, 3), z(b, 0) + z(b, 3));
        sb.total_cmp(&sa)
            .then(centroids.get(b, 4).total_cmp(&centroids.get(a, 4)))
            .then(a.cmp(&b))
    });
    let mut labels = [Style::Normal; N_STYLES];
    labels[order[0]] = Style::Aggressive;
    labels[order[1]] = Style::Normal;
    labels[order[2]] = Style::Conservative;
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerConfig {
    pub max_epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch: usize,
    /// Training stops once the mean cross-entropy drops below this.
    pub target_loss: f64,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            lr: 1e-3,
            weight_decay: 1e-3,
            batch: 32,
            target_loss: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerSummary {
    pub epochs: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    /// False when the epoch budget ran out before reaching the target loss;
    /// the weights returned are then the best seen.
    pub converged: bool,
}

fn cross_entropy(net: &MlpParams, x: &[[f64; N_FEATURES]], y: &[Style]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for (xi, yi) in x.iter().zip(y) {
        let p = net.predict(xi)?;
        loss -= p[yi.index()].max(1e-300).ln();
        correct += (argmax(&p) == yi.index()) as usize;
    }
    Ok((loss / x.len() as f64, correct as f64 / x.len() as f64))
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

/// Trains the 6-64-64-3 softmax recognizer on standardized features with
/// mini-batch AdamW and cross-entropy.
pub fn train_recognizer(
    x: &[[f64; N_FEATURES]],
    y: &[Style],
    seed: u64,
    cfg: &RecognizerConfig,
) -> Result<(MlpParams, RecognizerSummary)> {
    if x.len() != y.len() || x.len() < 30 {
        return Err(Error::config(format!(
            "recognizer needs at least 30 labelled examples (got {} features, {} labels)",
            x.len(),
            y.len()
        )));
    }
    let mut rng = rng::derive(seed, 0x5354_594c);
    let mut net = MlpParams::new(&[N_FEATURES, 64, 64, N_STYLES], Activation::Relu, Activation::Softmax, &mut rng)?;
    let mut opt = AdamWState::new(cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let (mut best_loss, mut best_acc) = cross_entropy(&net, x, y)?;
    let mut best = net.clone();
    let mut epochs = 0;
    while epochs < cfg.max_epochs && best_loss >= cfg.target_loss {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grads = zeros_like(&net);
            for &i in chunk {
                let (p, cache) = net.forward(&x[i])?;
                let mut g = vec![0.0; N_STYLES];
                g[y[i].index()] = -1.0 / (p[y[i].index()].max(1e-300) * chunk.len() as f64);
                net.backward_acc(&cache, &g, &mut grads)?;
            }
            opt.update(&mut net, &grads)?;
        }
        epochs += 1;
        let (loss, acc) = cross_entropy(&net, x, y)?;
        if loss < best_loss {
            best_loss = loss;
            best_acc = acc;
            best = net.clone();
        }
    }
    Ok((
        best,
        RecognizerSummary {
            epochs,
            loss: best_loss,
            train_accuracy: best_acc,
            converged: best_loss < cfg.target_loss,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleModel {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub pca: Pca,
    /// Cluster centres in PCA score space.
    pub centroids: Matrix,
    /// Style of each cluster.
    pub label_order: [Style; N_STYLES],
    pub recognizer: Option<MlpParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePrediction {
    pub label: Style,
    pub probabilities: [f64; N_STYLES],
}

impl StyleModel {
    pub fn standardize(&self, f: &StyleFeatures) -> Result<[f64; N_FEATURES]> {
        let raw = f.to_array();
        ensure_finite(&raw, || "style feature".to_string())?;
        let mut z = [0.0; N_FEATURES];
        for i in 0..N_FEATURES {
            let s = if self.feature_std[i] > 0.0 { self.feature_std[i] } else { 1.0 };
            z[i] = (raw[i] - self.feature_mean[i]) / s;
        }
        Ok(z)
    }

    /// Style of the nearest cluster centre.
    pub fn assign_cluster(&self, f: &StyleFeatures) -> Result<Style> {
        let scores = self.pca.transform(&self.standardize(f)?)?;
        Ok(self.label_order[nearest(&scores, &self.centroids).0])
    }

    /// Recognizer prediction. Falls back to a one-hot cluster assignment when no
    /// recognizer has been trained yet.
    pub fn predict(&self, f: &StyleFeatures) -> Result<StylePrediction> {
        let Some(net) = &self.recognizer else {
            let label = self.assign_cluster(f)?;
            let mut probabilities = [0.0; N_STYLES];
            probabilities[label.index()] = 1.0;
            return Ok(StylePrediction { label, probabilities });
        };
        let p = net.predict(&self.standardize(f)?)?;
        let probabilities = [p[0], p[1], p[2]];
        Ok(StylePrediction {
            label: Style::from_index(argmax(&p)).expect("three outputs"),
            probabilities,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOutput {
    pub model: StyleModel,
    /// Style of every input row.
    pub labels: Vec<Style>,
    pub kmeans: KMeansResult,
    /// PCA scores of every input row (the exported 2-D view uses the first two).
    pub scores: Vec<Vec<f64>>,
}

/// Standardize, project onto the components covering 95 % of the variance,
/// cluster into three groups and name them.
pub fn cluster_styles(features: &[StyleFeatures], seed: u64) -> Result<ClusterOutput> {
    if features.len() < N_STYLES {
        return Err(Error::config(format!(
            "need at least {N_STYLES} vehicles to cluster, got {}",
            features.len()
        )));
    }
    let rows: Vec<[f64; N_FEATURES]> = features.iter().map(StyleFeatures::to_array).collect();
    for r in &rows {
        ensure_finite(r, || "style feature".to_string())?;
    }
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let feature_mean: Vec<f64> = (0..N_FEATURES).map(|j| mean(&col(j))).collect();
    let feature_std: Vec<f64> = (0..N_FEATURES).map(|j| std_dev(&col(j))).collect();
    let mut model = StyleModel {
        feature_mean,
        feature_std,
        pca: Pca {
            mean: vec![],
            components: Matrix::zeros(0, 0),
            explained_variance: vec![],
            total_variance: 0.0,
        },
        centroids: Matrix::zeros(0, 0),
        label_order: [Style::Aggressive, Style::Normal, Style::Conservative],
        recognizer: None,
    };
    let z: Vec<Vec<f64>> = features
        .iter()
        .map(|f| model.standardize(f).map(|a| a.to_vec()))
        .collect::<Result<_>>()?;
    let zm = Matrix::from_rows(&z)?;
    model.pca = pca_fit_variance(&zm, PCA_VARIANCE)?;
    let scores: Vec<Vec<f64>> = z.iter().map(|r| model.pca.transform(r)).collect::<Result<_>>()?;
    let km = kmeans(&Matrix::from_rows(&scores)?, N_STYLES, seed, 10)?;
    // Back to original units for naming.
    let mut original = Matrix::zeros(N_STYLES, N_FEATURES);
    for c in 0..N_STYLES {
        let zc = model.pca.inverse_transform(km.centroids.row(c))?;
        for j in 0..N_FEATURES {
            original.set(c, j, zc[j] * model.feature_std[j] + model.feature_mean[j]);
        }
    }
    model.label_order = order_labels(&original, &model.feature_mean, &model.feature_std)?;
    model.centroids = km.centroids.clone();
    let labels = km.assignments.iter().map(|&c| model.label_order[c]).collect();
    Ok(ClusterOutput {
        model,
        labels,
        kmeans: km,
        scores,
    })
}

/// Style features of every distinct vehicle appearing in `episodes` (ego,
/// leader and T-Rear), in vehicle-id order. Tracks shorter than
/// `MIN_FRAMES` are skipped; when a vehicle appears several times its
/// longest track is used.
pub fn features_from_episodes(episodes: &[Episode]) -> Result<Vec<(u32, StyleFeatures)>> {
    let mut longest: std::collections::BTreeMap<u32, &crate::ingest::Trajectory> = Default::default();
    for ep in episodes {
        for t in [&ep.ego, &ep.lead, &ep.t_rear] {
            let e = longest.entry(t.vehicle_id).or_insert(t);
            if t.len() > e.len() {
                *e = t;
            }
        }
    }
    longest
        .into_iter()
        .filter(|(_, t)| t.len() >= MIN_FRAMES)
        .map(|(id, t)| Ok((id, extract_features(&t.v, &t.a)?)))
        .collect()
}

/// Sets the style of every sample from its T-Rear features. Samples with
/// all-zero auxiliary features (no usable T-Rear track) stay unlabelled.
/// Returns the number labelled.
pub fn label_samples(model: &StyleModel, set: &mut SampleSet) -> Result<usize> {
    let mut n = 0;
    for s in &mut set.samples {
        if s.aux.iter().all(|&v| v == 0.0) {
            s.style = None;
            continue;
        }
        let f = StyleFeatures::from_array(s.aux.map(|v| v as f64));
        s.style = Some(model.predict(&f)?.label);
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_and_alternating_features() {
        let f = extract_features(&[10.0; 25], &[0.0; 25]).unwrap();
        assert_eq!(f.to_array(), [10.0, 0.0, 0.0, 0.0, 10.0, 0.0]);
        let v: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 8.0 } else { 12.0 }).collect();
        let f = extract_features(&v, &[0.0; 20]).unwrap();
        assert_eq!((f.v_mean, f.v_max, f.v_std), (10.0, 12.0, 2.0));
        assert!(extract_features(&[1.0; 5], &[0.0; 5]).is_err());
    }

    #[test]
    fn features_match_brute_force() {
        let mut r = rng::seeded(2);
        let v: Vec<f64> = (0..100).map(|_| r.random_range(0.0..30.0)).collect();
        let a: Vec<f64> = (0..100).map(|_| r.random_range(-3.0..3.0)).collect();
        let f = extract_features(&v, &a).unwrap();
        let n = 100.0;
        let vm: f64 = v.iter().sum::<f64>() / n;
        let am: f64 = a.iter().sum::<f64>() / n;
        let vs = (v.iter().map(|x| x * x).sum::<f64>() / n - vm * vm).sqrt();
        let as_ = (a.iter().map(|x| x * x).sum::<f64>() / n - am * am).sqrt();
        let mut vsorted = v.clone();
        vsorted.sort_by(f64::total_cmp);
        let amax = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let want = [vm, am, vs, as_, vsorted[99], amax];
        for (g, w) in f.to_array().iter().zip(want) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    pub(crate) fn blobs(n_per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..n_per {
                rows.push(centre.iter().map(|m| m + noise.sample(&mut r)).collect::<Vec<f64>>());
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn kmeans_separates_blobs() {
        let (pts, truth) = blobs(50, 3);
        let km = kmeans(&pts, 3, 42, 10).unwrap();
        for c in 0..3 {
            let ids: Vec<usize> = (0..150).filter(|&i| truth[i] == c).map(|i| km.assignments[i]).collect();
            assert!(ids.iter().all(|&x| x == ids[0]));
        }
        assert!(km.inertia < 150.0 * 0.12 * 2.0);
        assert!(km.history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let (pts, _) = blobs(10, 4);
        let km = kmeans(&pts, 1, 0, 3).unwrap();
        for j in 0..2 {
            let m = pts.column(j).iter().sum::<f64>() / pts.rows as f64;
            assert!((km.centroids.get(0, j) - m).abs() < 1e-12);
        }
        assert!(matches!(kmeans(&pts, 31, 0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn kmeans_duplicated_data_same_centroids() {
        let (pts, _) = blobs(20, 5);
        let mut doubled = pts.data.clone();
        doubled.extend_from_slice(&pts.data);
        let pts2 = Matrix::from_vec(pts.rows * 2, 2, doubled).unwrap();
        let sort = |m: &Matrix| {
            let mut rows: Vec<Vec<f64>> = (0..m.rows).map(|r| m.row(r).to_vec()).collect();
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            rows
        };
        let a = sort(&kmeans(&pts, 3, 1, 10).unwrap().centroids);
        let b = sort(&kmeans(&pts2, 3, 1, 10).unwrap().centroids);
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    fn centroid_rows(vmeans: [f64; 3]) -> Matrix {
        let rows: Vec<Vec<f64>> = vmeans.iter().map(|&v| vec![v, 0.0, 1.0, 0.5, v + 3.0, 1.0]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn label_order_by_speed_score() {
        let mean = [11.0, 0.0, 1.0, 0.5, 14.0, 1.0];
        let std = [2.0, 1.0, 1.0, 0.2, 2.0, 1.0];
        assert_eq!(
            order_labels(&centroid_rows([14.0, 11.0, 8.0]), &mean, &std).unwrap(),
            [Style::Aggressive, Style::Normal, Style::Conservative]
        );
        assert_eq!(
            order_labels(&centroid_rows([8.0, 14.0, 11.0]), &mean, &std).unwrap(),
            [Style::Conservative, Style::Aggressive, Style::Normal]
        );
        // Equal scores: v_max decides.
        let mut tied = centroid_rows([11.0, 11.0, 8.0]);
        tied.set(1, 4, 20.0);
        assert_eq!(
            order_labels(&tied, &mean, &std).unwrap(),
            [Style::Normal, Style::Aggressive, Style::Conservative]
        );
    }

    #[test]
    fn recognizer_learns_single_class() {
        let mut r = rng::seeded(6);
        let x: Vec<[f64; 6]> = (0..40).map(|_| [0.0; 6].map(|_: f64| r.random_range(-1.0..1.0))).collect();
        let y = vec![Style::Normal; 40];
        let (net, summary) = train_recognizer(&x, &y, 1, &RecognizerConfig::default()).unwrap();
        assert!(summary.converged);
        let mut ce = 0.0;
        for xi in &x {
            let p = net.predict(xi).unwrap();
            assert!(p[1] > p[0] && p[1] > p[2]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            ce -= p[1].ln();
        }
        assert!(ce / x.len() as f64 <= RecognizerConfig::default().target_loss);
    }

    fn style_blobs(n_per: usize, seed: u64) -> Vec<StyleFeatures> {
        let mut r = rng::seeded(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut out = Vec::new();
        for (vm, astd) in [(16.0, 1.2), (12.0, 0.7), (8.0, 0.3)] {
            for _ in 0..n_per {
                let v = vm + noise.sample(&mut r);
                let s = astd + 0.1 * noise.sample(&mut r);
                out.push(StyleFeatures::from_array([v, 0.05 * noise.sample(&mut r), 1.0, s, v + 2.0, 3.0 * s]));
            }
        }
        out
    }

    #[test]
    fn clustering_names_styles_and_recognizer_agrees() {
        let feats = style_blobs(40, 9);
        let out = cluster_styles(&feats, 42).unwrap();
        assert_eq!(out.labels[0], Style::Aggressive);
        assert_eq!(out.labels[45], Style::Normal);
        assert_eq!(out.labels[100], Style::Conservative);
        let z: Vec<[f64; 6]> = feats.iter().map(|f| out.model.standardize(f).unwrap()).collect();
        let (net, _) = train_recognizer(&z, &out.labels, 3, &RecognizerConfig::default()).unwrap();
        let mut model = out.model.clone();
        model.recognizer = Some(net);
        let held_out = style_blobs(30, 77);
        let agree = held_out
            .iter()
            .filter(|f| model.predict(f).unwrap().label == model.assign_cluster(f).unwrap())
            .count();
        assert!(agree as f64 / held_out.len() as f64 >= 0.95);
        let p = model.predict(&held_out[0]).unwrap();
        assert!(p.probabilities.iter().all(|&v| v > 0.0));
        assert_eq!(p, model.predict(&held_out[0]).unwrap());
    }
}
