//! Procedurally generated rugged landscapes on a torus.
//!
//! A landscape is built from a set of peaks. The global peak sits at the
//! configured maximum elevation; secondary peaks are placed by rejection
//! sampling so that every pair is at least `min_peak_separation` cells apart.
//! The base field is the maximum over peaks of a linear cone
//! `h - slope * distance`, perturbed with periodic value noise, then projected
//! back onto the slope bound and the "every cell has an uphill neighbour"
//! constraint before clamping to the elevation bounds.

use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LandscapeError, ParseError};
use crate::grid::{DialSetting, Torus};

/// Candidate draws allowed across peak placement and repair retries.
pub const CANDIDATE_BUDGET: usize = 10_000;

/// Range of the per-landscape cone slope.
pub const SLOPE_RANGE: (f64, f64) = (1.5, 2.8);

/// Lattice spacing (in cells) of the value noise.
const NOISE_SPACING: f64 = 6.0;

/// Amount a tied non-global cell is lowered by so the global peak stays unique.
const TIE_EPSILON: f64 = 1e-6;

/// Slack allowed on the slope bound when validating.
pub const SLOPE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeConfig {
    pub width: usize,
    pub height: usize,
    pub peak_count: usize,
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub secondary_peak_low: f64,
    /// Largest allowed change between 4-adjacent cells (10% of a 33-unit range).
    pub max_neighbor_delta: f64,
    pub min_peak_separation: usize,
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            width: 24,
            height: 24,
            peak_count: 1,
            elevation_min: 0.0,
            elevation_max: 32.0,
            secondary_peak_low: 26.0,
            max_neighbor_delta: 3.3,
            min_peak_separation: 8,
            noise_amplitude: 0.5,
            seed: 0,
        }
    }
}

impl LandscapeConfig {
    pub fn with_peaks(peak_count: usize, seed: u64) -> Self {
        Self {
            peak_count,
            seed,
            ..Self::default()
        }
    }

    pub fn torus(&self) -> Torus {
        Torus::new(self.width, self.height)
    }

    pub fn toroidal_l1(&self, a: DialSetting, b: DialSetting) -> usize {
        self.torus().l1(a, b)
    }

    pub fn max_peaks(&self) -> usize {
        let sep = self.min_peak_separation.max(1);
        self.width * self.height / (sep * sep)
    }

    pub fn check(&self) -> Result<(), LandscapeError> {
        let bad = |m: String| Err(LandscapeError::InvalidConfig(m));
        if self.width < 4 || self.height < 4 {
            return bad(format!("grid {}x{} smaller than 4x4", self.width, self.height));
        }
        if self.peak_count < 1 || self.peak_count > self.max_peaks() {
            return bad(format!(
                "peak_count {} outside 1..={}",
                self.peak_count,
                self.max_peaks()
            ));
        }
        if !(self.elevation_min < self.secondary_peak_low
            && self.secondary_peak_low < self.elevation_max)
        {
            return bad("need elevation_min < secondary_peak_low < elevation_max".into());
        }
        if self.max_neighbor_delta.is_nan() || self.max_neighbor_delta <= 0.0 {
            return bad("max_neighbor_delta must be positive".into());
        }
        if self.noise_amplitude.is_nan() || self.noise_amplitude < 0.0 {
            return bad("noise_amplitude must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub cell: DialSetting,
    pub elevation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub config: LandscapeConfig,
    /// Row-major elevations, `width * height` long.
    pub grid: Vec<f64>,
    /// Global peak first.
    pub peaks: Vec<Peak>,
    pub global_peak: DialSetting,
}

impl Landscape {
    /// Assembles a landscape without checking any invariant; see [`validate`].
    pub fn from_parts(config: LandscapeConfig, grid: Vec<f64>, peaks: Vec<Peak>) -> Self {
        let global_peak = peaks
            .iter()
            .copied()
            .fold(None::<Peak>, |best, p| match best {
                Some(b) if b.elevation >= p.elevation => Some(b),
                _ => Some(p),
            })
            .map(|p| p.cell)
            .unwrap_or(DialSetting::ORIGIN);
        Self {
            config,
            grid,
            peaks,
            global_peak,
        }
    }

    pub fn torus(&self) -> Torus {
        self.config.torus()
    }

    pub fn elevation(&self, setting: DialSetting) -> f64 {
        self.grid[self.torus().index(setting)]
    }

    pub fn mean_elevation(&self) -> f64 {
        mean_elevation(self)
    }

    pub fn max_elevation(&self) -> f64 {
        self.elevation(self.global_peak)
    }

    /// Text form: a `width height peak_count seed` header, `height` rows of
    /// elevations with six decimals, then one `x y elevation` line per peak.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!("{} {} {} {}\n", c.width, c.height, self.peaks.len(), c.seed);
        for row in self.grid.chunks(c.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        for p in &self.peaks {
            let _ = writeln!(out, "{} {} {:.6}", p.cell.x, p.cell.y, p.elevation);
        }
        out
    }

    /// Parses the text form. Fields not carried by the format take their
    /// defaults.
    pub fn from_text(text: &str) -> Result<Self, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty input"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ParseError::new(ln, "header must be `width height peak_count seed`"));
        }
        let num = |s: &str| -> Result<u64, ParseError> {
            s.parse().map_err(|_| ParseError::new(ln, format!("bad integer `{s}`")))
        };
        let width = num(fields[0])? as usize;
        let height = num(fields[1])? as usize;
        let peak_count = num(fields[2])? as usize;
        let seed = num(fields[3])?;
        if width == 0 || height == 0 {
            return Err(ParseError::new(ln, "empty grid"));
        }

        let parse_f = |ln: usize, s: &str| -> Result<f64, ParseError> {
            s.parse::<f64>()
                .map_err(|_| ParseError::new(ln, format!("bad number `{s}`")))
        };
        let mut grid = Vec::with_capacity(width * height);
        for _ in 0..height {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| ParseError::new(0, "missing grid rows"))?;
            let values = row
                .split_whitespace()
                .map(|s| parse_f(ln, s))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != width {
                return Err(ParseError::new(
                    ln,
                    format!("expected {width} values, found {}", values.len()),
                ));
            }
            grid.extend(values);
        }
        let mut peaks = Vec::with_capacity(peak_count);
        for _ in 0..peak_count {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| ParseError::new(0, "missing peak lines"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(ParseError::new(ln, "peak line must be `x y elevation`"));
            }
            let x: usize = f[0]
                .parse()
                .map_err(|_| ParseError::new(ln, "bad peak x"))?;
            let y: usize = f[1]
                .parse()
                .map_err(|_| ParseError::new(ln, "bad peak y"))?;
            if x >= width || y >= height {
                return Err(ParseError::new(ln, "peak outside grid"));
            }
            peaks.push(Peak {
                cell: DialSetting::new(x, y),
                elevation: parse_f(ln, f[2])?,
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(ParseError::new(ln, "trailing content"));
        }
        let config = LandscapeConfig {
            width,
            height,
            peak_count,
            seed,
            ..LandscapeConfig::default()
        };
        Ok(Self::from_parts(config, grid, peaks))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Gain,
    Loss,
}

impl Frame {
    /// Inclusive range the frame offset is drawn from.
    pub fn offset_range(self) -> (f64, f64) {
        match self {
            Frame::Gain => (0.0, 67.0),
            Frame::Loss => (-100.0, -32.0),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Gain => "gain",
            Frame::Loss => "loss",
        })
    }
}

impl std::str::FromStr for Frame {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gain" => Ok(Frame::Gain),
            "loss" => Ok(Frame::Loss),
            other => Err(ParseError::new(0, format!("unknown frame `{other}`"))),
        }
    }
}

/// A landscape as participants see it: every value shifted by `offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramedLandscape {
    pub landscape: Landscape,
    pub frame: Frame,
    pub offset: f64,
}

impl FramedLandscape {
    pub fn new(landscape: Landscape, frame: Frame, offset: f64) -> Result<Self, LandscapeError> {
        let (lo, hi) = frame.offset_range();
        if !(lo..=hi).contains(&offset) {
            return Err(LandscapeError::InvalidOffset { frame, offset });
        }
        Ok(Self {
            landscape,
            frame,
            offset,
        })
    }

    pub fn raw(&self, setting: DialSetting) -> f64 {
        self.landscape.elevation(setting)
    }

    pub fn displayed(&self, setting: DialSetting) -> f64 {
        self.raw(setting) + self.offset
    }

    /// Displayed value of the global peak.
    pub fn best_displayed(&self) -> f64 {
        self.landscape.max_elevation() + self.offset
    }
}

/// Rounds a displayed value to one decimal, the precision shown on screen.
pub fn display_round(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

/// Draws a frame offset uniformly from the frame's range.
pub fn apply_frame<R: Rng + ?Sized>(landscape: Landscape, frame: Frame, rng: &mut R) -> FramedLandscape {
    let (lo, hi) = frame.offset_range();
    let offset = rng.gen_range(lo..=hi);
    FramedLandscape {
        landscape,
        frame,
        offset,
    }
}

pub fn mean_elevation(landscape: &Landscape) -> f64 {
    landscape.grid.iter().sum::<f64>() / landscape.grid.len() as f64
}

/// Periodic value noise in `[-1, 1]` on the torus, smoothstep-interpolated.
struct ValueNoise {
    nx: usize,
    ny: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new<R: Rng>(torus: Torus, rng: &mut R) -> Self {
        let nx = ((torus.width as f64 / NOISE_SPACING).round() as usize).max(1);
        let ny = ((torus.height as f64 / NOISE_SPACING).round() as usize).max(1);
        let lattice = (0..nx * ny).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { nx, ny, lattice }
    }

    fn sample(&self, torus: Torus, s: DialSetting) -> f64 {
        let fx = s.x as f64 * self.nx as f64 / torus.width as f64;
        let fy = s.y as f64 * self.ny as f64 / torus.height as f64;
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx - x0 as f64), smooth(fy - y0 as f64));
        let at = |i: usize, j: usize| self.lattice[(j % self.ny) * self.nx + (i % self.nx)];
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn place_peaks(
    config: &LandscapeConfig,
    rng: &mut ChaCha8Rng,
    budget: &mut usize,
) -> Result<Vec<Peak>, LandscapeError> {
    let torus = config.torus();
    let random_cell = |rng: &mut ChaCha8Rng| {
        DialSetting::new(rng.gen_range(0..config.width), rng.gen_range(0..config.height))
    };
    let mut peaks = vec![Peak {
        cell: random_cell(rng),
        elevation: config.elevation_max,
    }];
    while peaks.len() < config.peak_count {
        if *budget == 0 {
            return Err(LandscapeError::ConfigInfeasible {
                peak_count: config.peak_count,
                candidates: CANDIDATE_BUDGET,
            });
        }
        *budget -= 1;
        let cell = random_cell(rng);
        if peaks
            .iter()
            .all(|p| torus.l1(p.cell, cell) >= config.min_peak_separation)
        {
            let elevation = rng.gen_range(config.secondary_peak_low..config.elevation_max);
            peaks.push(Peak { cell, elevation });
        }
    }
    Ok(peaks)
}

/// Builds one candidate grid for a fixed peak layout.
fn build_field(config: &LandscapeConfig, peaks: &[Peak], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let torus = config.torus();
    let slope = rng.gen_range(SLOPE_RANGE.0..=SLOPE_RANGE.1);
    let noise = ValueNoise::new(torus, rng);

    let cone = |c: DialSetting, p: &Peak| p.elevation - slope * torus.l1(c, p.cell) as f64;
    let mut field = vec![0.0; torus.len()];
    // Cell one step closer to the peak that dominates it.
    let mut parent: Vec<Option<usize>> = vec![None; torus.len()];
    let mut pinned = vec![false; torus.len()];

    for c in torus.cells() {
        let i = torus.index(c);
        if let Some(p) = peaks.iter().find(|p| p.cell == c) {
            field[i] = p.elevation;
            pinned[i] = true;
            continue;
        }
        let mut best = &peaks[0];
        for p in &peaks[1..] {
            if cone(c, p) > cone(c, best) {
                best = p;
            }
        }
        let base = cone(c, best);
        field[i] = base + config.noise_amplitude * noise.sample(torus, c);
        parent[i] = Some(torus.index(torus.step_toward(c, best.cell)));
    }

    project(torus, config.max_neighbor_delta, &mut field, &parent, &pinned);

    for v in field.iter_mut() {
        *v = v.clamp(config.elevation_min, config.elevation_max);
    }
    let global = torus.index(peaks[0].cell);
    for (i, v) in field.iter_mut().enumerate() {
        if i != global && *v >= config.elevation_max {
            *v = config.elevation_max - TIE_EPSILON;
        }
    }
    field
}

/// Lowers unpinned cells until every cell is within `max_delta` above each
/// 4-neighbour and no higher than its parent. Only ever lowers values, so the
/// iteration reaches a fixpoint.
fn project(torus: Torus, max_delta: f64, field: &mut [f64], parent: &[Option<usize>], pinned: &[bool]) {
    loop {
        let mut changed = false;
        for c in torus.cells() {
            let i = torus.index(c);
            if pinned[i] {
                continue;
            }
            let mut bound = parent[i].map_or(f64::INFINITY, |p| field[p]);
            for n in torus.neighbors4(c) {
                bound = bound.min(field[torus.index(n)] + max_delta);
            }
            if field[i] > bound {
                field[i] = bound;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Generates a landscape deterministically from `config` (including its seed).
pub fn generate(config: &LandscapeConfig) -> Result<Landscape, LandscapeError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut budget = CANDIDATE_BUDGET;
    loop {
        let peaks = place_peaks(config, &mut rng, &mut budget)?;
        let grid = build_field(config, &peaks, &mut rng);
        let landscape = Landscape::from_parts(config.clone(), grid, peaks);
        if validate(&landscape).is_empty() {
            return Ok(landscape);
        }
        if budget == 0 {
            return Err(LandscapeError::ConfigInfeasible {
                peak_count: config.peak_count,
                candidates: CANDIDATE_BUDGET,
            });
        }
        budget -= 1;
    }
}

/// A broken landscape invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    GridSize { expected: usize, found: usize },
    NonFinite { cell: DialSetting },
    OutOfBounds { cell: DialSetting, value: f64 },
    GlobalPeakValue { cell: DialSetting, value: f64 },
    MaximumNotUnique { cell: DialSetting, value: f64 },
    PeakElevationMismatch { cell: DialSetting, listed: f64, grid: f64 },
    PeakNotStrictMax { cell: DialSetting },
    PeakCount { expected: usize, listed: usize, local_maxima: usize },
    PeaksTooClose { a: DialSetting, b: DialSetting, distance: usize },
    Slope { a: DialSetting, b: DialSetting, delta: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GridSize { expected, found } => {
                write!(f, "grid size: expected {expected} cells, found {found}")
            }
            Violation::NonFinite { cell } => write!(f, "non-finite elevation at {cell}"),
            Violation::OutOfBounds { cell, value } => {
                write!(f, "bounds: {value} at {cell}")
            }
            Violation::GlobalPeakValue { cell, value } => {
                write!(f, "global peak: {cell} has {value}, not the maximum elevation")
            }
            Violation::MaximumNotUnique { cell, value } => {
                write!(f, "unique maximum: {cell} ties or exceeds the global peak with {value}")
            }
            Violation::PeakElevationMismatch { cell, listed, grid } => {
                write!(f, "peak elevation: {cell} listed {listed}, grid {grid}")
            }
            Violation::PeakNotStrictMax { cell } => {
                write!(f, "peak: {cell} is not a strict local maximum")
            }
            Violation::PeakCount {
                expected,
                listed,
                local_maxima,
            } => write!(
                f,
                "peak count: expected {expected}, listed {listed}, local maxima {local_maxima}"
            ),
            Violation::PeaksTooClose { a, b, distance } => {
                write!(f, "separation: peaks {a} and {b} are {distance} apart")
            }
            Violation::Slope { a, b, delta } => write!(f, "slope: {a}-{b} differ by {delta}"),
        }
    }
}

/// Cells strictly higher than all 8 toroidal neighbours.
pub fn strict_local_maxima(landscape: &Landscape) -> Vec<DialSetting> {
    let torus = landscape.torus();
    torus
        .cells()
        .filter(|&c| {
            let v = landscape.elevation(c);
            torus
                .neighbors8(c)
                .iter()
                .all(|&n| landscape.elevation(n) < v)
        })
        .collect()
}

/// Checks every landscape invariant independently of how the grid was built.
pub fn validate(landscape: &Landscape) -> Vec<Violation> {
    let c = &landscape.config;
    let torus = landscape.torus();
    let mut out = Vec::new();
    if landscape.grid.len() != torus.len() {
        out.push(Violation::GridSize {
            expected: torus.len(),
            found: landscape.grid.len(),
        });
        return out;
    }

    for cell in torus.cells() {
        let v = landscape.elevation(cell);
        if !v.is_finite() {
            out.push(Violation::NonFinite { cell });
        } else if v < c.elevation_min || v > c.elevation_max {
            out.push(Violation::OutOfBounds { cell, value: v });
        }
    }

    let g = landscape.global_peak;
    if !torus.contains(g) || landscape.elevation(g) != c.elevation_max {
        let value = if torus.contains(g) {
            landscape.elevation(g)
        } else {
            f64::NAN
        };
        out.push(Violation::GlobalPeakValue { cell: g, value });
    }
    if torus.contains(g) {
        let top = landscape.elevation(g);
        for cell in torus.cells() {
            let v = landscape.elevation(cell);
            if cell != g && v >= top {
                out.push(Violation::MaximumNotUnique { cell, value: v });
            }
        }
    }

    for p in &landscape.peaks {
        if !torus.contains(p.cell) {
            out.push(Violation::PeakNotStrictMax { cell: p.cell });
            continue;
        }
        let v = landscape.elevation(p.cell);
        if v != p.elevation {
            out.push(Violation::PeakElevationMismatch {
                cell: p.cell,
                listed: p.elevation,
                grid: v,
            });
        }
        if torus.neighbors8(p.cell).iter().any(|&n| landscape.elevation(n) >= v) {
            out.push(Violation::PeakNotStrictMax { cell: p.cell });
        }
    }
    for (i, a) in landscape.peaks.iter().enumerate() {
        for b in &landscape.peaks[i + 1..] {
            let d = torus.l1(a.cell, b.cell);
            if d < c.min_peak_separation {
                out.push(Violation::PeaksTooClose {
                    a: a.cell,
                    b: b.cell,
                    distance: d,
                });
            }
        }
    }

    let maxima = strict_local_maxima(landscape).len();
    if landscape.peaks.len() != c.peak_count || maxima != c.peak_count {
        out.push(Violation::PeakCount {
            expected: c.peak_count,
            listed: landscape.peaks.len(),
            local_maxima: maxima,
        });
    }

    // East and south neighbours cover every 4-adjacent pair once, seams included.
    for a in torus.cells() {
        for b in [torus.offset(a, 1, 0), torus.offset(a, 0, 1)] {
            let delta = (landscape.elevation(a) - landscape.elevation(b)).abs();
            if delta > c.max_neighbor_delta + SLOPE_TOLERANCE {
                out.push(Violation::Slope { a, b, delta });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_peak_has_global_max_at_32() {
        for seed in 0..20 {
            let l = generate(&LandscapeConfig::with_peaks(1, seed)).unwrap();
            assert_eq!(l.elevation(l.global_peak), 32.0);
            assert_eq!(strict_local_maxima(&l), vec![l.global_peak]);
            for n in l.torus().neighbors4(l.global_peak) {
                assert!(l.elevation(n) >= 32.0 - 3.3);
            }
        }
    }

    #[test]
    fn noise_free_single_peak_is_a_pure_cone() {
        let config = LandscapeConfig {
            noise_amplitude: 0.0,
            ..LandscapeConfig::with_peaks(1, 9)
        };
        let l = generate(&config).unwrap();
        let torus = l.torus();
        let n = l.torus().offset(l.global_peak, 1, 0);
        let slope = 32.0 - l.elevation(n);
        assert!((SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope));
        for c in torus.cells() {
            let d = torus.l1(c, l.global_peak) as f64;
            let expected = (32.0 - slope * d).max(0.0);
            assert!((l.elevation(c) - expected).abs() < 1e-9, "{c}");
        }
        // Monotone non-increasing in distance.
        let mut by_distance: Vec<(usize, f64)> = torus
            .cells()
            .map(|c| (torus.l1(c, l.global_peak), l.elevation(c)))
            .collect();
        by_distance.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in by_distance.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 <= w[0].1 + 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let config = LandscapeConfig::with_peaks(4, 77);
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        let bits = |l: &Landscape| l.grid.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            LandscapeConfig {
                width: 3,
                ..Default::default()
            },
            LandscapeConfig {
                peak_count: 0,
                ..Default::default()
            },
            LandscapeConfig {
                peak_count: 10,
                ..Default::default()
            },
            LandscapeConfig {
                secondary_peak_low: 40.0,
                ..Default::default()
            },
            LandscapeConfig {
                max_neighbor_delta: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(generate(&c), Err(LandscapeError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn crowded_layout_is_infeasible() {
        // Nine peaks fit on 24x24 at separation 8, but this seed's
        // sequential placement jams before the candidate budget runs out.
        let config = LandscapeConfig::with_peaks(9, 2);
        assert!(matches!(
            generate(&config),
            Err(LandscapeError::ConfigInfeasible { peak_count: 9, .. })
        ));
    }

    #[test]
    fn validate_flags_out_of_bounds_cell() {
        let mut l = generate(&LandscapeConfig::with_peaks(1, 5)).unwrap();
        let cell = l.torus().offset(l.global_peak, 12, 12);
        let i = l.torus().index(cell);
        l.grid[i] = 50.0;
        let v = validate(&l);
        assert!(v.contains(&Violation::OutOfBounds { cell, value: 50.0 }), "{v:?}");
    }

    #[test]
    fn validate_flags_steep_pair() {
        let config = LandscapeConfig::with_peaks(1, 0);
        let torus = config.torus();
        // Flat field at 10 with a single cell at 15 next to the peak region.
        let mut grid = vec![10.0; torus.len()];
        let peak = DialSetting::new(0, 0);
        grid[torus.index(peak)] = 12.0;
        let a = DialSetting::new(10, 10);
        grid[torus.index(a)] = 15.0;
        let l = Landscape::from_parts(
            config,
            grid,
            vec![Peak {
                cell: peak,
                elevation: 12.0,
            }],
        );
        let v = validate(&l);
        assert!(v.iter().any(|x| matches!(x,
            Violation::Slope { a: p, b: q, delta } if (*p == a || *q == a) && (*delta - 5.0).abs() < 1e-12)));
    }

    #[test]
    fn text_round_trip_is_stable() {
        let l = generate(&LandscapeConfig::with_peaks(4, 12)).unwrap();
        let text = l.to_text();
        let back = Landscape::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.global_peak, l.global_peak);
        assert!(validate(&back).is_empty());
        assert!(Landscape::from_text("24 24 1").is_err());
    }

    #[test]
    fn frame_shifts_every_value() {
        let l = generate(&LandscapeConfig::with_peaks(1, 2)).unwrap();
        let f = FramedLandscape::new(l.clone(), Frame::Gain, 0.0).unwrap();
        for c in l.torus().cells() {
            assert_eq!(f.displayed(c), l.elevation(c));
        }
        assert!(FramedLandscape::new(l.clone(), Frame::Loss, -10.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for frame in [Frame::Gain, Frame::Loss] {
            for _ in 0..100 {
                let f = apply_frame(l.clone(), frame, &mut rng);
                let (lo, hi) = match frame {
                    Frame::Gain => (0.0, 100.0),
                    Frame::Loss => (-100.0, 0.0),
                };
                for c in l.torus().cells() {
                    let v = f.displayed(c);
                    assert!(v >= lo && v <= hi);
                }
            }
        }
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_round(54.24), 54.2);
        assert_eq!(display_round(-7.96), -8.0);
    }
}
