//! Channel representation and the deterministic block-Toeplitz constructions.
//!
//! A SIMO channel with `M` receive antennas and order `L` is stored as the
//! stacked vector `h = [h_0; h_1; ...; h_L]`, each tap `h_l` being an
//! `M`-vector. Everything else in the crate is built from the matrices defined
//! here:
//!
//! * the convolution matrix `T_n(h)` of size `M(n+1) x (L+n+1)`,
//! * the shift matrix `H` whose `delta + 1` columns are the shifted
//!   zero-paddings of `h` for an over-modeled order `L' = L + delta`,
//! * the split of `H` minus its first column (and its all-zero first block
//!   row) into the top `ML` rows `A` and the bottom `M delta` rows `B`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stacked SIMO impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct ChannelVector {
    m: usize,
    l: usize,
    taps: Vec<f64>,
}

/// On-disk layout: `taps[l][m]` is entry `m` of tap `l`.
#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "L")]
    l: usize,
    taps: Vec<Vec<f64>>,
}

impl TryFrom<ChannelDoc> for ChannelVector {
    type Error = Error;

    fn try_from(doc: ChannelDoc) -> Result<Self> {
        ChannelVector::from_taps(doc.m, doc.l, &doc.taps)
    }
}

impl From<ChannelVector> for ChannelDoc {
    fn from(h: ChannelVector) -> Self {
        ChannelDoc {
            m: h.m,
            l: h.l,
            taps: h.taps.chunks(h.m).map(<[f64]>::to_vec).collect(),
        }
    }
}

fn validate_dims(m: usize, l: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Parameter(format!("antenna count M must be >= 2, got {m}")));
    }
    if l < 1 {
        return Err(Error::Parameter(format!("channel order L must be >= 1, got {l}")));
    }
    Ok(())
}

impl ChannelVector {
    /// Builds a channel from the flat stacked vector `[h_0; ...; h_L]`.
    pub fn from_flat(m: usize, l: usize, taps: Vec<f64>) -> Result<Self> {
        validate_dims(m, l)?;
        if taps.len() != (l + 1) * m {
            return Err(Error::Parameter(format!(
                "expected (L+1)*M = {} entries, got {}",
                (l + 1) * m,
                taps.len()
            )));
        }
        if taps.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("channel entries must be finite".into()));
        }
        if taps.iter().all(|&x| x == 0.0) {
            return Err(Error::Parameter("channel must not be identically zero".into()));
        }
        Ok(Self { m, l, taps })
    }

    /// Builds a channel from per-tap vectors, `taps[l][m]`.
    pub fn from_taps(m: usize, l: usize, taps: &[Vec<f64>]) -> Result<Self> {
        if taps.len() != l + 1 {
            return Err(Error::Parameter(format!(
                "expected L+1 = {} taps, got {}",
                l + 1,
                taps.len()
            )));
        }
        if let Some((i, t)) = taps.iter().enumerate().find(|(_, t)| t.len() != m) {
            return Err(Error::Parameter(format!(
                "tap {i} has {} entries, expected M = {m}",
                t.len()
            )));
        }
        Self::from_flat(m, l, taps.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, l: usize) -> &[f64] {
        &self.taps[l * self.m..(l + 1) * self.m]
    }

    /// `[h_1; ...; h_L]`, the part of the channel the sparsity criterion acts on.
    pub fn tail(&self) -> &[f64] {
        &self.taps[self.m..]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_flat(self.m, self.l, self.taps.iter().map(|x| c * x).collect())
    }

    /// `h` zero-padded to length `M(Lp+1)`.
    pub fn padded(&self, lp: usize) -> Result<DVector<f64>> {
        self.check_lp(lp)?;
        let mut v = DVector::zeros(self.m * (lp + 1));
        v.rows_mut(0, self.taps.len()).copy_from_slice(&self.taps);
        Ok(v)
    }

    /// The fixed part of the offset parameterization, `[h_1; ...; h_L; 0; ...; 0]`
    /// of length `M Lp`.
    pub fn fixed_offset(&self, lp: usize) -> Result<DVector<f64>> {
        self.check_lp(lp)?;
        let mut v = DVector::zeros(self.m * lp);
        v.rows_mut(0, self.m * self.l).copy_from_slice(self.tail());
        Ok(v)
    }

    fn check_lp(&self, lp: usize) -> Result<()> {
        if lp < self.l {
            return Err(Error::Parameter(format!(
                "over-modeled order L' = {lp} is below the channel order L = {}",
                self.l
            )));
        }
        Ok(())
    }
}

/// Draws a channel with i.i.d. `N(0, 1/(L+1))` entries from a seeded stream.
pub fn gen_channel(m: usize, l: usize, seed: u64) -> Result<ChannelVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_channel_with(m, l, &mut rng)
}

pub fn gen_channel_with<R: Rng + ?Sized>(m: usize, l: usize, rng: &mut R) -> Result<ChannelVector> {
    validate_dims(m, l)?;
    let normal = Normal::new(0.0, (1.0 / (l as f64 + 1.0)).sqrt())
        .expect("standard deviation is positive and finite");
    loop {
        let taps: Vec<f64> = (0..(l + 1) * m).map(|_| normal.sample(rng)).collect();
        // The all-zero draw has probability zero; redraw rather than fail.
        if taps.iter().any(|&x| x != 0.0) {
            return ChannelVector::from_flat(m, l, taps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Convolution,
    Shift,
    PartA,
    PartB,
}

/// Dense realization of one of the block-Toeplitz operators.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMatrix {
    pub kind: FilterKind,
    pub entries: DMatrix<f64>,
}

impl FilterMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// Banded block-Toeplitz convolution matrix of a stacked filter `f` with
/// `m`-vector taps: block row `r`, block column `c` holds `f_{c-r}`.
pub fn block_toeplitz(f: &[f64], m: usize, n: usize) -> DMatrix<f64> {
    assert!(m > 0 && !f.is_empty() && f.len().is_multiple_of(m), "filter length must be a multiple of M");
    let order = f.len() / m - 1;
    let mut t = DMatrix::zeros(m * (n + 1), order + n + 1);
    for r in 0..=n {
        for k in 0..=order {
            let col = r + k;
            for i in 0..m {
                t[(r * m + i, col)] = f[k * m + i];
            }
        }
    }
    t
}

/// `T_n(h)`.
pub fn build_filter_matrix(h: &ChannelVector, n: usize) -> FilterMatrix {
    FilterMatrix {
        kind: FilterKind::Convolution,
        entries: block_toeplitz(h.as_slice(), h.m, n),
    }
}

/// The shift matrix `H` for over-modeled order `lp`; column `j` is `h`
/// zero-padded and moved down by `j` blocks.
pub fn build_shift_matrix(h: &ChannelVector, lp: usize) -> Result<FilterMatrix> {
    h.check_lp(lp)?;
    let delta = lp - h.l;
    let rows = h.m * (lp + 1);
    let mut entries = DMatrix::zeros(rows, delta + 1);
    for j in 0..=delta {
        entries
            .view_mut((j * h.m, j), (h.taps.len(), 1))
            .copy_from_slice(&h.taps);
    }
    Ok(FilterMatrix { kind: FilterKind::Shift, entries })
}

/// `H` minus its first column and its first (identically zero) block row:
/// the `M Lp x delta` matrix acting on the offset coefficients. Accepts
/// `delta = 0`, in which case the matrix has no columns.
pub fn offset_matrix(h: &ChannelVector, lp: usize) -> Result<DMatrix<f64>> {
    let shift = build_shift_matrix(h, lp)?;
    let delta = lp - h.l;
    Ok(shift.entries.view((h.m, 1), (h.m * lp, delta)).into_owned())
}

/// Splits the offset matrix into its top `ML` rows `A` and bottom `M delta` rows `B`.
pub fn partition_ab(h: &ChannelVector, lp: usize) -> Result<(FilterMatrix, FilterMatrix)> {
    h.check_lp(lp)?;
    let delta = lp - h.l;
    if delta < 1 || delta > h.l {
        return Err(Error::Parameter(format!(
            "over-modeling degree delta = L' - L = {delta} must satisfy 1 <= delta <= L = {}",
            h.l
        )));
    }
    let tilde = offset_matrix(h, lp)?;
    let split = h.m * h.l;
    let a = tilde.rows(0, split).into_owned();
    let b = tilde.rows(split, h.m * delta).into_owned();
    Ok((
        FilterMatrix { kind: FilterKind::PartA, entries: a },
        FilterMatrix { kind: FilterKind::PartB, entries: b },
    ))
}

/// Sign pattern of `[h_1; ...; h_L]`, optionally weighted for the `lp` criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector {
    pub entries: DVector<f64>,
    pub p: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `p = 1`: entrywise sign (with `sign(0) = 0`).
/// `p < 1`: entrywise `p * sign(x) * |x|^(p-1)`, undefined for zero entries.
pub fn sign_vector(h: &ChannelVector, p: f64) -> Result<SignVector> {
    validate_exponent(p)?;
    let tail = h.tail();
    let entries = if p == 1.0 {
        DVector::from_iterator(tail.len(), tail.iter().map(|&x| sign(x)))
    } else {
        if let Some(i) = tail.iter().position(|&x| x == 0.0) {
            return Err(Error::Domain(format!(
                "entry {i} of [h_1..h_L] is zero; |x|^(p-1) diverges for p = {p}"
            )));
        }
        DVector::from_iterator(
            tail.len(),
            tail.iter().map(|&x| p * sign(x) * x.abs().powf(p - 1.0)),
        )
    };
    Ok(SignVector { entries, p })
}

pub(crate) fn validate_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!("exponent p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Channel diversity test: `T_L(h)` has full column rank, measured as
/// `sigma_min > tol * sigma_max`.
pub fn check_diversity(h: &ChannelVector, tol: f64) -> bool {
    let t = build_filter_matrix(h, h.l).entries;
    let sv = t.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > tol * max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(m: usize, taps: &[&[f64]]) -> ChannelVector {
        let taps: Vec<Vec<f64>> = taps.iter().map(|t| t.to_vec()).collect();
        ChannelVector::from_taps(m, taps.len() - 1, &taps).unwrap()
    }

    #[test]
    fn rejects_single_antenna_and_zero_channel() {
        assert!(matches!(gen_channel(1, 1, 0), Err(Error::Parameter(_))));
        assert!(matches!(gen_channel(2, 0, 0), Err(Error::Parameter(_))));
        assert!(ChannelVector::from_flat(2, 1, vec![0.0; 4]).is_err());
        assert!(ChannelVector::from_flat(2, 1, vec![1.0; 3]).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_channel(2, 1, 42).unwrap();
        let b = gen_channel(2, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_slice().len(), 4);
        assert_ne!(a, gen_channel(2, 1, 43).unwrap());
    }

    #[test]
    fn generated_variance_matches_order() {
        // 250k channels of 4 entries each: 1e6 draws of N(0, 1/2).
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for seed in 0..250_000u64 {
            for &x in gen_channel(2, 1, seed).unwrap().as_slice() {
                sum += x;
                sum_sq += x * x;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!((var - 0.5).abs() < 0.005, "sample variance {var}");
    }

    #[test]
    fn convolution_matrix_hand_expansion() {
        let h = fixture(2, &[&[1.0, 0.0], &[0.0, 1.0]]);
        let t = build_filter_matrix(&h, 1).entries;
        let expected = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn convolution_matrix_single_block_row() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let t = build_filter_matrix(&h, 0).entries;
        assert_eq!(t, DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
    }

    #[test]
    fn shift_matrix_hand_expansion() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let hm = build_shift_matrix(&h, 2).unwrap().entries;
        assert_eq!(hm.shape(), (6, 2));
        assert_eq!(hm.column(0).as_slice(), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        assert_eq!(hm.column(1).as_slice(), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);

        let single = build_shift_matrix(&h, 1).unwrap().entries;
        assert_eq!(single.shape(), (4, 1));
        assert_eq!(single.column(0).as_slice(), h.as_slice());

        assert!(build_shift_matrix(&h, 0).is_err());
    }

    #[test]
    fn shift_matrix_has_full_column_rank_for_gaussian_channels() {
        for seed in 0..20 {
            let h = gen_channel(3, 3, seed).unwrap();
            let hm = build_shift_matrix(&h, 6).unwrap().entries;
            let sv = hm.singular_values();
            assert!(sv.min() > 1e-10 * sv.max());
        }
    }

    #[test]
    fn partition_delta_one() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let (a, b) = partition_ab(&h, 2).unwrap();
        assert_eq!(a.entries.as_slice(), &[1.0, 2.0]);
        assert_eq!(b.entries.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn partition_delta_two() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let (a, b) = partition_ab(&h, 4).unwrap();
        let expected_b = DMatrix::from_row_slice(
            4,
            2,
            &[5.0, 3.0, 6.0, 4.0, 0.0, 5.0, 0.0, 6.0],
        );
        assert_eq!(b.entries, expected_b);
        let expected_a = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 2.0, 0.0, 3.0, 1.0, 4.0, 2.0],
        );
        assert_eq!(a.entries, expected_a);
        let hm = build_shift_matrix(&h, 4).unwrap();
        assert_eq!(a.rows() + b.rows(), hm.rows() - h.m());
    }

    #[test]
    fn partition_rejects_out_of_range_delta() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(partition_ab(&h, 1).is_err());
        assert!(partition_ab(&h, 3).is_err());
    }

    #[test]
    fn sign_vectors() {
        let h = fixture(2, &[&[9.0, 9.0], &[2.0, -3.0]]);
        assert_eq!(sign_vector(&h, 1.0).unwrap().entries.as_slice(), &[1.0, -1.0]);

        let ones = fixture(2, &[&[9.0, 9.0], &[1.0, 1.0]]);
        assert_eq!(sign_vector(&ones, 0.5).unwrap().entries.as_slice(), &[0.5, 0.5]);

        let four = fixture(2, &[&[9.0, 9.0], &[4.0, 4.0]]);
        let v = sign_vector(&four, 0.5).unwrap();
        assert!((v.entries[0] - 0.25).abs() < 1e-15);

        let zero = fixture(2, &[&[9.0, 9.0], &[0.0, 4.0]]);
        assert_eq!(sign_vector(&zero, 1.0).unwrap().entries.as_slice(), &[0.0, 1.0]);
        assert!(matches!(sign_vector(&zero, 0.5), Err(Error::Domain(_))));
        assert!(sign_vector(&h, 0.0).is_err());
        assert!(sign_vector(&h, 1.5).is_err());
    }

    #[test]
    fn diversity() {
        assert!(check_diversity(&fixture(2, &[&[1.0, 0.0], &[0.0, 1.0]]), 1e-10));
        assert!(!check_diversity(&fixture(2, &[&[1.0, 1.0], &[1.0, 1.0]]), 1e-10));
        let diverse = (0..10_000u64)
            .filter(|&s| check_diversity(&gen_channel(2, 2, s).unwrap(), 1e-10))
            .count();
        assert!(diverse >= 9_990, "{diverse} of 10000 diverse");
    }

    #[test]
    fn json_layout() {
        let h = fixture(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"M":2,"L":1,"taps":[[1.0,2.0],[3.0,4.0]]}"#);
        let back: ChannelVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<ChannelVector>(r#"{"M":2,"L":1,"taps":[[1.0],[3.0,4.0]]}"#).is_err());
    }
}
