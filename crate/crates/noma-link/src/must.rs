//! Multiuser superposition transmission (MUST) at the constellation level.
//!
//! A far (weak) and a near (strong) component constellation are superposed
//! as `sqrt(beta) * s_far + sqrt(1-beta) * s_near` with `beta in (0.5, 1)`.
//! The three categories differ only in how label bits are assigned to the
//! shared composite point set:
//!
//! * Category 1 concatenates far and near labels unchanged; the composite
//!   is generally not Gray-mapped.
//! * Category 2 flips the near user's axis bits in alternating far-level
//!   groups (an XOR mask selected by the far symbol), which makes the
//!   concatenated labeling Gray on the composite grid.
//! * Category 3 assigns a joint Gray code over the sorted composite grid,
//!   with the far user owning the most significant bits.
//!
//! Components are square QAM with per-axis Gray labels; QPSK and 16-QAM
//! are provided. Labels are bit strings with the in-phase axis bits ahead
//! of the quadrature bits, and the far user's bits ahead of the near
//! user's in composites.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{complex_gaussian, StreamFactory};
use crate::stats::format_sig12;

/// Tolerance for the unit-average-power invariant.
pub const POWER_TOL: f64 = 1e-12;
/// Geometric tolerance for grid detection and point coincidence.
pub const GRID_TOL: f64 = 1e-9;

const TRIAL_CHUNK: u64 = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MustError {
    #[error("constellation size {points} does not match 2^{bits} labels")]
    SizeMismatch { points: usize, bits: u32 },
    #[error("labels are not distinct")]
    DuplicateLabels,
    #[error("label {0:#x} does not fit the declared width")]
    LabelOverflow(u16),
    #[error("constellation points must be finite")]
    NonFinitePoint,
    #[error("component is not a square QAM with per-axis Gray labels: {0}")]
    InvalidComponent(String),
    #[error("power ratio must lie strictly inside (0.5, 1), got {0}")]
    InvalidPowerRatio(f64),
    #[error("component constellation must have unit average power, got {0}")]
    ComponentPower(f64),
    #[error("composite points coincide (minimum distance below {GRID_TOL:e})")]
    PointsCoincide,
    #[error(
        "power ratio {beta} interleaves far-level groups on the composite axis; \
         a Gray-mapped category-2 labeling does not exist"
    )]
    NotGroupable { beta: f64 },
    #[error("points do not form a rectangular grid; Gray adjacency is undefined")]
    NotAGrid,
    #[error("noise variance must be positive, got {0}")]
    InvalidNoiseVar(f64),
    #[error("link experiment needs at least 10^4 trials, got {0}")]
    TooFewTrials(u64),
}

/// Complex points with fixed-width bit labels and cached average power.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledConstellation {
    points: Vec<Complex64>,
    labels: Vec<u16>,
    label_bits: u32,
    average_power: f64,
}

impl LabeledConstellation {
    pub fn new(
        points: Vec<Complex64>,
        labels: Vec<u16>,
        label_bits: u32,
    ) -> Result<Self, MustError> {
        if label_bits == 0
            || label_bits > 16
            || points.len() != labels.len()
            || points.len() != 1usize << label_bits
        {
            return Err(MustError::SizeMismatch {
                points: points.len(),
                bits: label_bits,
            });
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(MustError::NonFinitePoint);
        }
        let limit = 1u32 << label_bits;
        if let Some(&bad) = labels.iter().find(|&&l| (l as u32) >= limit) {
            return Err(MustError::LabelOverflow(bad));
        }
        let mut seen = vec![false; limit as usize];
        for &l in &labels {
            if seen[l as usize] {
                return Err(MustError::DuplicateLabels);
            }
            seen[l as usize] = true;
        }
        let average_power =
            points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        Ok(Self {
            points,
            labels,
            label_bits,
            average_power,
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn label_bits(&self) -> u32 {
        self.label_bits
    }

    pub fn average_power(&self) -> f64 {
        self.average_power
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV rows `re,im,bits` for plotting, one point per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("re,im,bits\n");
        let width = self.label_bits as usize;
        for (p, l) in self.points.iter().zip(&self.labels) {
            out.push_str(&format!(
                "{},{},{:0width$b}\n",
                format_sig12(p.re),
                format_sig12(p.im),
                l,
            ));
        }
        out
    }
}

/// Gray QPSK: points `(+-1 +- i)/sqrt(2)`, one bit per axis.
pub fn qpsk() -> LabeledConstellation {
    let v = 1.0 / 2.0f64.sqrt();
    let mut points = Vec::with_capacity(4);
    let mut labels = Vec::with_capacity(4);
    let levels = [v, -v];
    for (bi, &re) in levels.iter().enumerate() {
        for (bq, &im) in levels.iter().enumerate() {
            points.push(Complex64::new(re, im));
            labels.push(((bi as u16) << 1) | bq as u16);
        }
    }
    LabeledConstellation::new(points, labels, 2).expect("static constellation")
}

/// Gray 16-QAM: per-axis levels `{3,1,-1,-3}/sqrt(10)` labeled
/// `{00,01,11,10}` in descending order.
pub fn qam16() -> LabeledConstellation {
    let s = 1.0 / 10.0f64.sqrt();
    let levels = [3.0 * s, s, -s, -3.0 * s];
    let gray = [0b00u16, 0b01, 0b11, 0b10];
    let mut points = Vec::with_capacity(16);
    let mut labels = Vec::with_capacity(16);
    for (ki, &re) in levels.iter().enumerate() {
        for (kq, &im) in levels.iter().enumerate() {
            points.push(Complex64::new(re, im));
            labels.push((gray[ki] << 2) | gray[kq]);
        }
    }
    LabeledConstellation::new(points, labels, 4).expect("static constellation")
}

/// MUST transmitter category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Cat1,
    Cat2,
    Cat3,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Cat1, Category::Cat2, Category::Cat3];

    pub fn name(&self) -> &'static str {
        match self {
            Category::Cat1 => "cat1",
            Category::Cat2 => "cat2",
            Category::Cat3 => "cat3",
        }
    }
}

/// Superposition description: components, far-user power share and the
/// labeling category.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionSpec {
    pub far_constellation: LabeledConstellation,
    pub near_constellation: LabeledConstellation,
    pub power_ratio: f64,
    pub category: Category,
}

impl SuperpositionSpec {
    pub fn new(
        far: LabeledConstellation,
        near: LabeledConstellation,
        power_ratio: f64,
        category: Category,
    ) -> Result<Self, MustError> {
        if !(power_ratio > 0.5 && power_ratio < 1.0) {
            return Err(MustError::InvalidPowerRatio(power_ratio));
        }
        for c in [&far, &near] {
            if (c.average_power() - 1.0).abs() > POWER_TOL {
                return Err(MustError::ComponentPower(c.average_power()));
            }
        }
        Ok(Self {
            far_constellation: far,
            near_constellation: near,
            power_ratio,
            category,
        })
    }
}

/// One axis of a square QAM: levels in descending order with their Gray
/// bit patterns.
#[derive(Debug, Clone)]
struct Axis {
    levels: Vec<f64>,
    bits: Vec<u16>,
    width: u32,
}

/// Cluster sorted-descending values into groups within `GRID_TOL`.
fn cluster_descending(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        match out.last() {
            Some(&last) if (last - v).abs() <= GRID_TOL => {}
            _ => out.push(v),
        }
    }
    out
}

fn level_index(levels: &[f64], v: f64) -> Option<usize> {
    levels.iter().position(|&l| (l - v).abs() <= GRID_TOL)
}

/// Validate that `c` is a square QAM with separable per-axis Gray labels
/// (in-phase bits ahead of quadrature bits) and extract the two axes.
fn axis_decompose(c: &LabeledConstellation) -> Result<(Axis, Axis), MustError> {
    let re_levels = cluster_descending(c.points().iter().map(|p| p.re).collect());
    let im_levels = cluster_descending(c.points().iter().map(|p| p.im).collect());
    let (ni, nq) = (re_levels.len(), im_levels.len());
    if ni * nq != c.len() || !ni.is_power_of_two() || !nq.is_power_of_two() {
        return Err(MustError::InvalidComponent(format!(
            "{}x{} levels for {} points",
            ni,
            nq,
            c.len()
        )));
    }
    let wi = ni.trailing_zeros();
    let wq = nq.trailing_zeros();
    if wi + wq != c.label_bits() {
        return Err(MustError::InvalidComponent(
            "axis widths do not add up to the label width".into(),
        ));
    }
    let mut i_bits: Vec<Option<u16>> = vec![None; ni];
    let mut q_bits: Vec<Option<u16>> = vec![None; nq];
    let mut occupied = vec![false; ni * nq];
    for (p, &label) in c.points().iter().zip(c.labels()) {
        let ki = level_index(&re_levels, p.re).ok_or(MustError::NotAGrid)?;
        let kq = level_index(&im_levels, p.im).ok_or(MustError::NotAGrid)?;
        if occupied[ki * nq + kq] {
            return Err(MustError::InvalidComponent("duplicate grid cell".into()));
        }
        occupied[ki * nq + kq] = true;
        let hi = label >> wq;
        let lo = label & ((1u16 << wq) - 1);
        for (slot, bits) in [(&mut i_bits[ki], hi), (&mut q_bits[kq], lo)] {
            match slot {
                None => *slot = Some(bits),
                Some(existing) if *existing == bits => {}
                _ => {
                    return Err(MustError::InvalidComponent(
                        "labels are not separable per axis".into(),
                    ))
                }
            }
        }
    }
    let to_axis = |levels: Vec<f64>, bits: Vec<Option<u16>>, width: u32| -> Result<Axis, MustError> {
        let bits: Vec<u16> = bits.into_iter().map(|b| b.unwrap()).collect();
        for pair in bits.windows(2) {
            if (pair[0] ^ pair[1]).count_ones() != 1 {
                return Err(MustError::InvalidComponent(
                    "axis labels are not Gray over descending levels".into(),
                ));
            }
        }
        Ok(Axis {
            levels,
            bits,
            width,
        })
    };
    Ok((
        to_axis(re_levels, i_bits, wi)?,
        to_axis(im_levels, q_bits, wq)?,
    ))
}

/// Per-axis composite label table: `table[kf][kn] = (far_bits, near_bits)`
/// already transformed for the category.
fn axis_label_table(
    far: &Axis,
    near: &Axis,
    sf: f64,
    sn: f64,
    beta: f64,
    category: Category,
) -> Result<Vec<Vec<(u16, u16)>>, MustError> {
    let nf = far.levels.len();
    let nn = near.levels.len();
    match category {
        Category::Cat1 => Ok((0..nf)
            .map(|kf| (0..nn).map(|kn| (far.bits[kf], near.bits[kn])).collect())
            .collect()),
        Category::Cat2 => {
            // a Gray concatenation exists only when far-level groups stay
            // separated on the composite axis
            let min_far_gap = far
                .levels
                .windows(2)
                .map(|w| w[0] - w[1])
                .fold(f64::INFINITY, f64::min);
            let near_span = near.levels[0] - near.levels[nn - 1];
            if nf > 1 && sf * min_far_gap <= sn * near_span {
                return Err(MustError::NotGroupable { beta });
            }
            let msb = 1u16 << (near.width - 1);
            Ok((0..nf)
                .map(|kf| {
                    let mask = if kf % 2 == 1 { msb } else { 0 };
                    (0..nn)
                        .map(|kn| (far.bits[kf], near.bits[kn] ^ mask))
                        .collect()
                })
                .collect())
        }
        Category::Cat3 => {
            // joint Gray assignment over the composite levels sorted by
            // value, far bits in the high positions
            let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(nf * nn);
            for kf in 0..nf {
                for kn in 0..nn {
                    entries.push((sf * far.levels[kf] + sn * near.levels[kn], kf, kn));
                }
            }
            entries.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut table = vec![vec![(0u16, 0u16); nn]; nf];
            let near_mask = (1u16 << near.width) - 1;
            for (rank, &(_, kf, kn)) in entries.iter().enumerate() {
                let joint = (rank ^ (rank >> 1)) as u16;
                table[kf][kn] = (joint >> near.width, joint & near_mask);
            }
            Ok(table)
        }
    }
}

/// Superpose the two components and label the composite according to the
/// category. The result is normalized to unit average power.
#[allow(clippy::needless_range_loop)] // level indices address two parallel tables
pub fn build_composite(spec: &SuperpositionSpec) -> Result<LabeledConstellation, MustError> {
    let (far_i, far_q) = axis_decompose(&spec.far_constellation)
        .map_err(|e| wrap_component("far", e))?;
    let (near_i, near_q) = axis_decompose(&spec.near_constellation)
        .map_err(|e| wrap_component("near", e))?;
    let beta = spec.power_ratio;
    let sf = beta.sqrt();
    let sn = (1.0 - beta).sqrt();

    let table_i = axis_label_table(&far_i, &near_i, sf, sn, beta, spec.category)?;
    let table_q = axis_label_table(&far_q, &near_q, sf, sn, beta, spec.category)?;

    let far_bits = spec.far_constellation.label_bits();
    let near_bits = spec.near_constellation.label_bits();
    let total_bits = far_bits + near_bits;
    let n = 1usize << total_bits;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for kfi in 0..far_i.levels.len() {
        for kfq in 0..far_q.levels.len() {
            for kni in 0..near_i.levels.len() {
                for knq in 0..near_q.levels.len() {
                    let re = sf * far_i.levels[kfi] + sn * near_i.levels[kni];
                    let im = sf * far_q.levels[kfq] + sn * near_q.levels[knq];
                    let (fi, ni) = table_i[kfi][kni];
                    let (fq, nq) = table_q[kfq][knq];
                    let far_label = (fi << far_q.width) | fq;
                    let near_label = (ni << near_q.width) | nq;
                    points.push(Complex64::new(re, im));
                    labels.push((far_label << near_bits) | near_label);
                }
            }
        }
    }

    // degenerate superpositions collapse points together
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if (points[i] - points[j]).norm() < GRID_TOL {
                return Err(MustError::PointsCoincide);
            }
        }
    }

    let mean_power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    let scale = mean_power.sqrt().recip();
    for p in &mut points {
        *p *= scale;
    }
    LabeledConstellation::new(points, labels, total_bits)
}

fn wrap_component(which: &str, e: MustError) -> MustError {
    match e {
        MustError::InvalidComponent(msg) => {
            MustError::InvalidComponent(format!("{which} component: {msg}"))
        }
        other => other,
    }
}

/// Result of the Gray adjacency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrayCheck {
    Gray,
    /// Point indices of the first grid-adjacent pair whose labels differ
    /// in more than one bit.
    Violation { a: usize, b: usize },
}

impl GrayCheck {
    pub fn is_gray(&self) -> bool {
        matches!(self, GrayCheck::Gray)
    }
}

/// True iff every pair of grid-adjacent points differs in exactly one
/// label bit. Errors when the points do not form a rectangular grid.
pub fn gray_check(c: &LabeledConstellation) -> Result<GrayCheck, MustError> {
    let re_levels = cluster_descending(c.points().iter().map(|p| p.re).collect());
    let im_levels = cluster_descending(c.points().iter().map(|p| p.im).collect());
    let (ni, nq) = (re_levels.len(), im_levels.len());
    if ni * nq != c.len() {
        return Err(MustError::NotAGrid);
    }
    let mut cell: Vec<Option<usize>> = vec![None; ni * nq];
    for (idx, p) in c.points().iter().enumerate() {
        let ki = level_index(&re_levels, p.re).ok_or(MustError::NotAGrid)?;
        let kq = level_index(&im_levels, p.im).ok_or(MustError::NotAGrid)?;
        if cell[ki * nq + kq].is_some() {
            return Err(MustError::NotAGrid);
        }
        cell[ki * nq + kq] = Some(idx);
    }
    let at = |ki: usize, kq: usize| cell[ki * nq + kq].expect("grid fully occupied");
    for ki in 0..ni {
        for kq in 0..nq {
            let a = at(ki, kq);
            let check = |b: usize| -> Option<GrayCheck> {
                ((c.labels()[a] ^ c.labels()[b]).count_ones() != 1)
                    .then_some(GrayCheck::Violation { a, b })
            };
            if ki + 1 < ni {
                if let Some(v) = check(at(ki + 1, kq)) {
                    return Ok(v);
                }
            }
            if kq + 1 < nq {
                if let Some(v) = check(at(ki, kq + 1)) {
                    return Ok(v);
                }
            }
        }
    }
    Ok(GrayCheck::Gray)
}

/// Hard decision and per-bit max-log LLRs.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulation {
    pub hard_label: u16,
    /// `llrs[k]` is for the k-th bit reading the label MSB-first;
    /// positive favours bit 0.
    pub llrs: Vec<f64>,
}

fn nearest_point(points: &[Complex64], received: Complex64) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (received - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Minimum-distance label plus exact max-log LLRs over the two label
/// subsets of each bit.
pub fn demodulate(
    c: &LabeledConstellation,
    received: Complex64,
    noise_var: f64,
) -> Result<Demodulation, MustError> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(MustError::InvalidNoiseVar(noise_var));
    }
    let width = c.label_bits();
    let mut min0 = vec![f64::INFINITY; width as usize];
    let mut min1 = vec![f64::INFINITY; width as usize];
    let mut best = (f64::INFINITY, 0usize);
    for (i, p) in c.points().iter().enumerate() {
        // clamp so squared distances that overflow still subtract cleanly
        let d = (received - p).norm_sqr().min(f64::MAX);
        if d < best.0 {
            best = (d, i);
        }
        let label = c.labels()[i];
        for k in 0..width {
            let bit = (label >> (width - 1 - k)) & 1;
            let slot = if bit == 0 { &mut min0 } else { &mut min1 };
            let entry = &mut slot[k as usize];
            if d < *entry {
                *entry = d;
            }
        }
    }
    let llrs = min0
        .iter()
        .zip(&min1)
        .map(|(&d0, &d1)| (d1 - d0) / noise_var)
        .collect();
    Ok(Demodulation {
        hard_label: c.labels()[best.1],
        llrs,
    })
}

/// Uncoded goodput of one category at one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGainRow {
    pub category: Category,
    pub snr_db: f64,
    pub ber_far: f64,
    pub ber_near: f64,
    /// Correct bits per channel use for the superposed transmission.
    pub goodput_far: f64,
    pub goodput_near: f64,
    /// OMA baseline: each user gets half the channel uses with its own
    /// non-superposed constellation at full power.
    pub oma_goodput_far: f64,
    pub oma_goodput_near: f64,
}

/// Uncoded BER/goodput table over the SNR grid for all three categories.
///
/// All categories share the composite point set, the symbol choices and
/// the noise draws, so differences isolate the labeling. Deterministic
/// per seed.
pub fn link_gain_experiment(
    spec: &SuperpositionSpec,
    snr_grid_db: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<LinkGainRow>, MustError> {
    if trials < 10_000 {
        return Err(MustError::TooFewTrials(trials));
    }
    let composites: Vec<LabeledConstellation> = Category::ALL
        .iter()
        .map(|&category| {
            build_composite(&SuperpositionSpec {
                category,
                ..spec.clone()
            })
        })
        .collect::<Result<_, _>>()?;
    let far = &spec.far_constellation;
    let near = &spec.near_constellation;
    let far_bits = far.label_bits();
    let near_bits = near.label_bits();
    let near_mask = (1u16 << near_bits) - 1;
    let n = composites[0].len();
    let factory = StreamFactory::new(seed);

    #[derive(Default, Clone, Copy)]
    struct Errors {
        far: [u64; 3],
        near: [u64; 3],
        oma_far: u64,
        oma_near: u64,
    }

    let mut rows = Vec::with_capacity(snr_grid_db.len() * 3);
    for (unit, &snr_db) in snr_grid_db.iter().enumerate() {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let chunks = trials.div_ceil(TRIAL_CHUNK);
        let errors = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * TRIAL_CHUNK;
                let hi = (lo + TRIAL_CHUNK).min(trials);
                let mut acc = Errors::default();
                for trial in lo..hi {
                    let mut rng = factory.stream(unit as u32, trial, 0);
                    let sent = rng.gen_range(0..n);
                    let noise = complex_gaussian(&mut rng, noise_var);
                    let received = composites[0].points()[sent] + noise;
                    let decided = nearest_point(composites[0].points(), received);
                    for (ci, composite) in composites.iter().enumerate() {
                        let diff = composite.labels()[sent] ^ composite.labels()[decided];
                        acc.far[ci] += (diff >> near_bits).count_ones() as u64;
                        acc.near[ci] += (diff & near_mask).count_ones() as u64;
                    }
                    // OMA baseline: dedicated channel uses per user
                    let mut rng_f = factory.stream(unit as u32, trial, 1);
                    let sent_f = rng_f.gen_range(0..far.len());
                    let rx_f = far.points()[sent_f] + complex_gaussian(&mut rng_f, noise_var);
                    let dec_f = nearest_point(far.points(), rx_f);
                    acc.oma_far +=
                        (far.labels()[sent_f] ^ far.labels()[dec_f]).count_ones() as u64;
                    let mut rng_n = factory.stream(unit as u32, trial, 2);
                    let sent_n = rng_n.gen_range(0..near.len());
                    let rx_n = near.points()[sent_n] + complex_gaussian(&mut rng_n, noise_var);
                    let dec_n = nearest_point(near.points(), rx_n);
                    acc.oma_near +=
                        (near.labels()[sent_n] ^ near.labels()[dec_n]).count_ones() as u64;
                }
                acc
            })
            .reduce(Errors::default, |mut a, b| {
                for i in 0..3 {
                    a.far[i] += b.far[i];
                    a.near[i] += b.near[i];
                }
                a.oma_far += b.oma_far;
                a.oma_near += b.oma_near;
                a
            });

        let t = trials as f64;
        let oma_ber_far = errors.oma_far as f64 / (t * far_bits as f64);
        let oma_ber_near = errors.oma_near as f64 / (t * near_bits as f64);
        for (ci, &category) in Category::ALL.iter().enumerate() {
            let ber_far = errors.far[ci] as f64 / (t * far_bits as f64);
            let ber_near = errors.near[ci] as f64 / (t * near_bits as f64);
            rows.push(LinkGainRow {
                category,
                snr_db,
                ber_far,
                ber_near,
                goodput_far: far_bits as f64 * (1.0 - ber_far),
                goodput_near: near_bits as f64 * (1.0 - ber_near),
                oma_goodput_far: 0.5 * far_bits as f64 * (1.0 - oma_ber_far),
                oma_goodput_near: 0.5 * near_bits as f64 * (1.0 - oma_ber_near),
            });
        }
    }
    Ok(rows)
}
