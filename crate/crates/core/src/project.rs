//! Two-dimensional PCA of glyph embeddings, exported for plotting.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corpus::{Corpus, GlyphRef};
use crate::embed::{encode, EncoderParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGlyph {
    pub glyph: GlyphRef,
    pub x: f64,
    pub y: f64,
}

/// Coordinates of each row on the two leading principal axes of the
/// centered data. Each axis is oriented so its first nonzero loading is
/// positive; equal eigenvalues keep their lower index first.
pub fn pca_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    if rows.len() < 3 {
        return Err(Error::Config(format!(
            "projection needs at least 3 glyphs, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Format("embeddings differ in length".into()));
    }
    let n = rows.len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = x.transpose() * &x / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let first = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
            if first < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            v
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let p = |a: &[f64]| (0..dim).map(|j| x[(i, j)] * a[j]).sum::<f64>();
            let y = axes.get(1).map(|a| p(a)).unwrap_or(0.0);
            [p(&axes[0]), y]
        })
        .collect())
}

/// Encodes `refs` and projects them; rows keep the order of `refs`.
pub fn project_glyphs(
    encoder: &EncoderParams,
    corpus: &Corpus,
    refs: &[GlyphRef],
) -> Result<Vec<ProjectedGlyph>> {
    let rows: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| Ok(encode(encoder, corpus.resolve(r)?)?.into_vec()))
        .collect::<Result<_>>()?;
    let coords = pca_2d(&rows)?;
    Ok(refs
        .iter()
        .zip(coords)
        .map(|(g, [x, y])| ProjectedGlyph {
            glyph: g.clone(),
            x,
            y,
        })
        .collect())
}

/// `char_id,stage,variant,x,y`.
pub fn projection_csv(points: &[ProjectedGlyph]) -> String {
    let mut s = String::from("char_id,stage,variant,x,y\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{:.9},{:.9}\n",
            p.glyph.char_id,
            p.glyph.stage.name(),
            p.glyph.variant,
            p.x,
            p.y
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_rows() {
        assert!(pca_2d(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn recovers_dominant_axis_with_sign_convention() {
        // points along (-1, 2) with a little spread on the orthogonal axis
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|i| {
                let t = i as f64 - 3.0;
                let e = if i % 2 == 0 { 0.01 } else { -0.01 };
                vec![-t + 2.0 * e, 2.0 * t + e]
            })
            .collect();
        let c = pca_2d(&rows).unwrap();
        // first loading positive means axis is (1, -2)/sqrt5, so t>0 maps negative
        let norm = 5f64.sqrt();
        for (i, p) in c.iter().enumerate() {
            let t = i as f64 - 3.0;
            assert!((p[0] + t * norm).abs() < 0.05, "{p:?}");
        }
    }

    #[test]
    fn duplicate_rows_share_coordinates() {
        let rows = vec![vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 0.0], vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.5]];
        let c = pca_2d(&rows).unwrap();
        assert_eq!(c[0], c[2]);
    }

    #[test]
    fn projection_preserves_pairwise_distance_in_plane() {
        // rank-2 data: PCA to 2D is an isometry
        let rows: Vec<Vec<f64>> = [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (3.0, 1.0)]
            .iter()
            .map(|&(a, b)| vec![a + b, a - b, 0.5 * a])
            .collect();
        let c = pca_2d(&rows).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d_in: f64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| (x - y).powi(2)).sum();
                let d_out = (c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2);
                assert!((d_in - d_out).abs() < 1e-9);
            }
        }
    }
}
