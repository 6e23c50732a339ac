//! Obfuscation codecs mapping real-valued features to bit vectors.
//!
//! Both codecs are fitted on the training partition only and then applied
//! to every partition; classifiers see the bits as 0/1 real features.

use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Row-major 0/1 code matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    bits: Array2<u8>,
}

impl BitMatrix {
    pub fn bits(&self) -> &Array2<u8> {
        &self.bits
    }

    pub fn n_rows(&self) -> usize {
        self.bits.nrows()
    }

    pub fn n_bits(&self) -> usize {
        self.bits.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<u8> {
        self.bits.row(i).to_vec()
    }

    pub fn to_features(&self) -> Array2<f64> {
        self.bits.mapv(f64::from)
    }

    pub fn hamming(&self, a: usize, b: usize) -> usize {
        self.bits
            .row(a)
            .iter()
            .zip(self.bits.row(b))
            .filter(|(x, y)| x != y)
            .count()
    }
}

/// Where random hyperplanes are anchored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Each plane passes through a uniformly drawn training point.
    #[default]
    Data,
    /// Planes pass through the origin.
    Origin,
}

/// Random-hyperplane LSH. Row `j` of `hyperplanes` holds the normal
/// followed by the offset: bit `j` is `w·x + b ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LshCodec {
    pub hyperplanes: Array2<f64>,
    pub n_planes: usize,
    pub anchor: Anchor,
    pub seed: u64,
}

pub fn fit_lsh(train: ArrayView2<'_, f64>, n_planes: usize, seed: u64) -> Result<LshCodec> {
    fit_lsh_anchored(train, n_planes, seed, Anchor::Data)
}

pub fn fit_lsh_anchored(
    train: ArrayView2<'_, f64>,
    n_planes: usize,
    seed: u64,
    anchor: Anchor,
) -> Result<LshCodec> {
    if train.nrows() == 0 || train.ncols() == 0 {
        return Err(Error::Empty("LSH needs a non-empty training matrix".into()));
    }
    if n_planes == 0 {
        return Err(Error::InvalidSpec("n_planes must be at least 1".into()));
    }
    let d = train.ncols();
    let mut rng = seed::rng(seed::derive_tag(seed, "lsh"));
    let pick = Uniform::new(0, train.nrows()).expect("non-empty range");
    let mut hyperplanes = Array2::zeros((n_planes, d + 1));
    for mut plane in hyperplanes.outer_iter_mut() {
        let normal: Vec<f64> = loop {
            let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if w.iter().any(|&v| v != 0.0) {
                break w;
            }
        };
        let offset = match anchor {
            Anchor::Data => {
                let point = train.row(pick.sample(&mut rng));
                -normal.iter().zip(point).map(|(w, x)| w * x).sum::<f64>()
            }
            Anchor::Origin => 0.0,
        };
        for (slot, w) in plane.iter_mut().zip(&normal) {
            *slot = *w;
        }
        plane[d] = offset;
    }
    Ok(LshCodec {
        hyperplanes,
        n_planes,
        anchor,
        seed,
    })
}

impl LshCodec {
    pub fn n_features(&self) -> usize {
        self.hyperplanes.ncols() - 1
    }

    pub fn encode(&self, features: ArrayView2<'_, f64>) -> Result<BitMatrix> {
        encode_lsh(self, features)
    }
}

pub fn encode_lsh(codec: &LshCodec, features: ArrayView2<'_, f64>) -> Result<BitMatrix> {
    let d = codec.n_features();
    if features.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: features.ncols(),
        });
    }
    let bits = Array2::from_shape_fn((features.nrows(), codec.n_planes), |(i, j)| {
        let plane = codec.hyperplanes.row(j);
        let side: f64 = features.row(i).iter().zip(plane.iter()).map(|(x, w)| x * w).sum::<f64>() + plane[d];
        u8::from(side >= 0.0)
    });
    Ok(BitMatrix { bits })
}

/// Per-feature mean thresholds: bit is 1 when the value matches or
/// exceeds the training mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingCodec {
    pub means: Vec<f64>,
}

pub fn fit_hamming(train: ArrayView2<'_, f64>) -> Result<HammingCodec> {
    if train.nrows() == 0 || train.ncols() == 0 {
        return Err(Error::Empty("Hamming codec needs a non-empty training matrix".into()));
    }
    let means = train.mean_axis(Axis(0)).expect("non-empty").to_vec();
    Ok(HammingCodec { means })
}

impl HammingCodec {
    pub fn encode(&self, features: ArrayView2<'_, f64>) -> Result<BitMatrix> {
        encode_hamming(self, features)
    }
}

pub fn encode_hamming(codec: &HammingCodec, features: ArrayView2<'_, f64>) -> Result<BitMatrix> {
    if features.ncols() != codec.means.len() {
        return Err(Error::DimensionMismatch {
            expected: codec.means.len(),
            got: features.ncols(),
        });
    }
    let bits = Array2::from_shape_fn(features.dim(), |(i, j)| u8::from(features[[i, j]] >= codec.means[j]));
    Ok(BitMatrix { bits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    None,
    Lsh,
    Hamming,
}

impl CodecKind {
    pub fn name(self) -> &'static str {
        match self {
            CodecKind::None => "none",
            CodecKind::Lsh => "lsh",
            CodecKind::Hamming => "hamming",
        }
    }
}

/// A fitted codec of either family, serializable for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "codec", rename_all = "snake_case")]
pub enum Codec {
    Lsh(LshCodec),
    Hamming(HammingCodec),
}

impl Codec {
    /// Fits `kind` on training features; `n_planes` defaults to the
    /// feature count. Returns `None` for [`CodecKind::None`].
    pub fn fit(
        kind: CodecKind,
        train: ArrayView2<'_, f64>,
        n_planes: Option<usize>,
        seed: u64,
    ) -> Result<Option<Codec>> {
        Ok(match kind {
            CodecKind::None => None,
            CodecKind::Lsh => Some(Codec::Lsh(fit_lsh(train, n_planes.unwrap_or(train.ncols()), seed)?)),
            CodecKind::Hamming => Some(Codec::Hamming(fit_hamming(train)?)),
        })
    }

    pub fn encode(&self, features: ArrayView2<'_, f64>) -> Result<BitMatrix> {
        match self {
            Codec::Lsh(c) => c.encode(features),
            Codec::Hamming(c) => c.encode(features),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Codec> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    fn spearman(x: &[f64], y: &[f64]) -> f64 {
        crate::stats::spearman(x, y).unwrap()
    }

    #[test]
    fn opposite_points_get_complementary_codes() {
        let codec = fit_lsh_anchored(gaussian(50, 3, 1).view(), 8, 3, Anchor::Origin).unwrap();
        let pts = array![[1.0, -2.0, 0.5], [-1.0, 2.0, -0.5]];
        let codes = codec.encode(pts.view()).unwrap();
        for j in 0..8 {
            assert_eq!(codes.bits()[[0, j]] + codes.bits()[[1, j]], 1);
        }
    }

    #[test]
    fn identical_points_identical_codes_and_stable() {
        let train = gaussian(100, 4, 2);
        let codec = fit_lsh(train.view(), 16, 9).unwrap();
        let pts = array![[0.3, 0.1, -0.2, 1.0], [0.3, 0.1, -0.2, 1.0]];
        let a = codec.encode(pts.view()).unwrap();
        assert_eq!(a.row(0), a.row(1));
        assert_eq!(a, codec.encode(pts.view()).unwrap());
        assert_eq!(codec, fit_lsh(train.view(), 16, 9).unwrap());
        assert_ne!(codec, fit_lsh(train.view(), 16, 10).unwrap());
    }

    #[test]
    fn point_on_plane_encodes_one() {
        let codec = LshCodec {
            hyperplanes: array![[1.0, 0.0, -2.0]],
            n_planes: 1,
            anchor: Anchor::Data,
            seed: 0,
        };
        let codes = codec.encode(array![[2.0, 7.0], [1.9, 0.0]].view()).unwrap();
        assert_eq!(codes.bits().column(0).to_vec(), vec![1, 0]);
    }

    #[test]
    fn mirroring_across_a_plane_flips_one_bit() {
        let train = gaussian(200, 3, 4);
        let codec = fit_lsh(train.view(), 6, 1).unwrap();
        let plane = codec.hyperplanes.row(2);
        let (w, b) = (plane.slice(ndarray::s![..3]).to_owned(), plane[3]);
        let p = array![0.37, -0.21, 0.05];
        let on_plane = &p - &(&w * ((w.dot(&p) + b) / w.dot(&w)));
        let nudge = &w * (1e-3 / w.dot(&w).sqrt());
        let pts = ndarray::stack![Axis(0), &on_plane + &nudge, &on_plane - &nudge];
        let codes = codec.encode(pts.view()).unwrap();
        let flipped: Vec<usize> = (0..6).filter(|&j| codes.bits()[[0, j]] != codes.bits()[[1, j]]).collect();
        assert_eq!(flipped, vec![2]);
    }

    #[test]
    fn lsh_preserves_locality() {
        let data = gaussian(400, 16, 6);
        let codec = fit_lsh(data.view(), 16, 7).unwrap();
        let codes = codec.encode(data.view()).unwrap();
        let (mut euclid, mut ham) = (Vec::new(), Vec::new());
        for p in 0..200 {
            let (a, b) = (2 * p, 2 * p + 1);
            let diff = &data.row(a) - &data.row(b);
            euclid.push(diff.dot(&diff).sqrt());
            ham.push(codes.hamming(a, b) as f64);
        }
        let rho = spearman(&euclid, &ham);
        assert!(rho > 0.0, "rank correlation {rho}");
    }

    #[test]
    fn hamming_examples() {
        let codec = fit_hamming(array![[1.0], [3.0], [5.0]].view()).unwrap();
        assert_eq!(codec.means, vec![3.0]);
        let codes = codec.encode(array![[1.0], [3.0], [5.0]].view()).unwrap();
        assert_eq!(codes.bits().column(0).to_vec(), vec![0, 1, 1]);

        let constant = fit_hamming(array![[4.0, 1.0], [4.0, 2.0]].view()).unwrap();
        let codes = constant.encode(array![[4.0, 1.0], [4.0, 2.0]].view()).unwrap();
        assert_eq!(codes.bits().column(0).to_vec(), vec![1, 1]);

        let below = codec.encode(array![[0.0], [2.9]].view()).unwrap();
        assert!(below.bits().iter().all(|&b| b == 0));
    }

    #[test]
    fn hamming_means_come_from_training_only() {
        let train = array![[0.0], [2.0]];
        let test = array![[10.0], [10.0]];
        let codec = fit_hamming(train.view()).unwrap();
        let with_test = fit_hamming(ndarray::concatenate![Axis(0), train, test].view()).unwrap();
        assert_ne!(codec.means, with_test.means);
        codec.encode(test.view()).unwrap();
        assert_eq!(codec.means, vec![1.0]);
    }

    #[test]
    fn errors() {
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(fit_lsh(empty.view(), 3, 0).is_err());
        assert!(fit_hamming(empty.view()).is_err());
        let codec = fit_hamming(array![[1.0, 2.0]].view()).unwrap();
        assert!(matches!(codec.encode(array![[1.0]].view()), Err(Error::DimensionMismatch { .. })));
        let lsh = fit_lsh(array![[1.0, 2.0]].view(), 2, 0).unwrap();
        assert!(matches!(lsh.encode(array![[1.0]].view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn codec_json_replays_bit_exactly() {
        let train = gaussian(60, 5, 8);
        let codec = Codec::fit(CodecKind::Lsh, train.view(), None, 3).unwrap().unwrap();
        let replayed = Codec::from_json(&codec.to_json().unwrap()).unwrap();
        assert_eq!(codec.encode(train.view()).unwrap(), replayed.encode(train.view()).unwrap());
        assert!(Codec::fit(CodecKind::None, train.view(), None, 3).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn hamming_threshold_is_monotone(v in -5.0f64..5.0, bump in 0.0f64..3.0, m in -2.0f64..2.0) {
            let codec = HammingCodec { means: vec![m] };
            let lo = codec.encode(array![[v]].view()).unwrap().bits()[[0, 0]];
            let hi = codec.encode(array![[v + bump]].view()).unwrap().bits()[[0, 0]];
            prop_assert!(hi >= lo);
        }

        #[test]
        fn hamming_ignores_increasing_affine_maps(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..20),
            scale in 0.1f64..4.0, shift in -3.0f64..3.0,
        ) {
            let n = rows.len();
            let x = Array2::from_shape_fn((n, 3), |(i, j)| rows[i][j]);
            let y = x.mapv(|v| scale * v + shift);
            let split = n / 2 + 1;
            let (xtr, ytr) = (x.slice(ndarray::s![..split, ..]), y.slice(ndarray::s![..split, ..]));
            let a = fit_hamming(xtr).unwrap().encode(x.view()).unwrap();
            let b = fit_hamming(ytr).unwrap().encode(y.view()).unwrap();
            // values within rounding distance of the mean may legitimately differ
            let means = fit_hamming(xtr).unwrap().means;
            for i in 0..n {
                for j in 0..3 {
                    if (x[[i, j]] - means[j]).abs() > 1e-9 {
                        prop_assert_eq!(a.bits()[[i, j]], b.bits()[[i, j]]);
                    }
                }
            }
        }
    }
}
