//! Inspection tools for the CNN classifier: document embeddings and their 2-D
//! projection, predictive regions, and gradient saliency.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::text::{EncodedDoc, Vocabulary, PAD_TOKEN};

/// Row `i` is the pooled pre-head vector of `docs[i]`.
pub fn doc_embeddings(model: &CnnModel, docs: &[EncodedDoc]) -> Result<Matrix> {
    let rows = docs
        .iter()
        .map(|d| Ok(model.forward(d)?.pooled))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, model.config().pooled_len()));
    }
    Matrix::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// `n × 2` coordinates.
    pub coords: Matrix,
    /// Principal directions as columns, `dim × 2`.
    pub components: Matrix,
    /// Variance captured by each component.
    pub variances: [f64; 2],
    pub mean: Vec<f64>,
}

/// PCA onto the top two principal components of the mean-centered rows.
/// Each component is signed so that its largest-magnitude loading is positive.
pub fn project_2d(embeddings: &Matrix) -> Result<Projection> {
    let (n, dim) = embeddings.shape();
    if n < 3 {
        return Err(Error::contract(format!("projection needs at least 3 points, got {n}")));
    }
    let mut mean = vec![0.0; dim];
    for r in 0..n {
        math::axpy(1.0 / n as f64, embeddings.row(r), &mut mean);
    }
    let centered = Matrix::from_fn(n, dim, |r, c| embeddings.get(r, c) - mean[c]);
    let cov = centered.transpose().matmul(&centered)?.scale(1.0 / (n - 1) as f64);
    let (values, vectors) = math::symmetric_eigen(&cov)?;
    let scale = values.first().copied().unwrap_or(0.0).abs().max(1.0);
    if values.first().is_none_or(|v| *v <= 1e-12 * scale) {
        return Err(Error::contract("embeddings have zero variance; nothing to project"));
    }
    let mut components = Matrix::zeros(dim, 2);
    for k in 0..2.min(dim) {
        let mut col = vectors.column_vec(k);
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.iter().enumerate() {
            components.set(r, k, *v);
        }
    }
    let coords = centered.matmul(&components)?;
    let variances = [values[0].max(0.0), values.get(1).copied().unwrap_or(0.0).max(0.0)];
    Ok(Projection {
        coords,
        components,
        variances,
        mean,
    })
}

/// Mean silhouette coefficient under Euclidean distance. Points in singleton
/// clusters contribute 0.
pub fn silhouette(points: &Matrix, labels: &[usize]) -> Result<f64> {
    let n = points.rows();
    if labels.len() != n {
        return Err(Error::contract(format!("{} labels for {n} points", labels.len())));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::contract("silhouette needs at least two clusters"));
    }
    let dist = |i: usize, j: usize| -> f64 {
        points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; classes.len()];
        let mut counts = vec![0usize; classes.len()];
        for j in 0..n {
            if i == j {
                continue;
            }
            let k = classes.binary_search(&labels[j]).expect("known class");
            sums[k] += dist(i, j);
            counts[k] += 1;
        }
        let own = classes.binary_search(&labels[i]).expect("known class");
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..classes.len())
            .filter(|&k| k != own && counts[k] > 0)
            .map(|k| sums[k] / counts[k] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionScore {
    pub doc_id: usize,
    /// Word offset of the region.
    pub start: usize,
    pub h: usize,
    /// Euclidean norm of the region's post-activation filter responses.
    pub norm: f64,
    pub text: Vec<String>,
}

/// Rank every region of every branch by the norm of its `n_f`-dimensional
/// feature-map column; ties go to the earlier position, then the smaller `h`.
pub fn predictive_regions(
    model: &CnnModel,
    doc: &EncodedDoc,
    doc_id: usize,
    vocab: &Vocabulary,
    top_n: usize,
) -> Result<Vec<RegionScore>> {
    let cache = model.forward(doc)?;
    let stride = model.config().stride;
    let mut regions = Vec::new();
    for (br, bc) in model.branches().iter().zip(&cache.branches) {
        let maps = &bc.conv.maps;
        for i in 0..maps.cols() {
            let norm = (0..maps.rows()).map(|f| maps.get(f, i).powi(2)).sum::<f64>().sqrt();
            let start = i * stride;
            let text = doc.indices[start..start + br.h]
                .iter()
                .map(|&t| vocab.token(t).unwrap_or(PAD_TOKEN).to_string())
                .collect();
            regions.push(RegionScore {
                doc_id,
                start,
                h: br.h,
                norm,
                text,
            });
        }
    }
    regions.sort_by(|a, b| b.norm.total_cmp(&a.norm).then(a.start.cmp(&b.start)).then(a.h.cmp(&b.h)));
    regions.truncate(top_n);
    Ok(regions)
}

/// Reduction of a `d`-dimensional input gradient to one score per word.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaliencyReduction {
    #[default]
    L2,
    MaxAbs,
}

impl std::str::FromStr for SaliencyReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(SaliencyReduction::L2),
            "max-abs" | "maxabs" => Ok(SaliencyReduction::MaxAbs),
            other => Err(Error::config(format!("unknown saliency reduction `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub doc_id: usize,
    /// One non-negative score per real (non-padding) word.
    pub scores: Vec<f64>,
    /// Raw gradient of the class score with respect to each embedding row.
    pub gradients: Matrix,
    pub predicted: usize,
    pub label: Option<usize>,
}

impl SaliencyMap {
    pub fn argmax(&self) -> Option<usize> {
        (!self.scores.is_empty()).then(|| math::argmax(&self.scores))
    }
}

/// Gradient of the predicted class's logit with respect to the document
/// matrix, from one backward pass. For a sigmoid head the class-0 score is
/// `−z`.
pub fn saliency(model: &CnnModel, doc: &EncodedDoc, doc_id: usize, reduction: SaliencyReduction) -> Result<SaliencyMap> {
    let cache = model.forward(doc)?;
    let predicted = cache.predicted();
    let d_logits = if model.config().classes == 1 {
        vec![if predicted == 1 { 1.0 } else { -1.0 }]
    } else {
        let mut d = vec![0.0; model.config().classes];
        d[predicted] = 1.0;
        d
    };
    let gradients = model.backward(&cache, &d_logits, None)?;
    let scores = (0..doc.len())
        .map(|t| {
            let row = gradients.row(t);
            match reduction {
                SaliencyReduction::L2 => math::l2_norm(row),
                SaliencyReduction::MaxAbs => row.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            }
        })
        .collect();
    Ok(SaliencyMap {
        doc_id,
        scores,
        gradients,
        predicted,
        label: doc.label,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV `doc_id,start,h,norm,text`.
pub fn write_regions_csv(mut w: impl Write, regions: &[RegionScore], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(w, "doc_id,start,h,norm,text")?;
    }
    for r in regions {
        writeln!(w, "{},{},{},{},{}", r.doc_id, r.start, r.h, r.norm, csv_field(&r.text.join(" ")))?;
    }
    Ok(())
}

/// CSV `doc_id,position,token,score`.
pub fn write_saliency_csv(mut w: impl Write, map: &SaliencyMap, tokens: &[String], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(w, "doc_id,position,token,score")?;
    }
    for (t, score) in map.scores.iter().enumerate() {
        let tok = tokens.get(t).map(String::as_str).unwrap_or("");
        writeln!(w, "{},{},{},{}", map.doc_id, t, csv_field(tok), score)?;
    }
    Ok(())
}
