//! k-space sampling masks.
//!
//! Grids are stored in native DFT layout: the DC coefficient sits at
//! row 0, column 0 and negative frequencies wrap to the high indices.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScheme {
    #[default]
    PseudoRadial,
    RandomUniform,
    Full,
}

impl MaskScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskScheme::PseudoRadial => "pseudo-radial",
            MaskScheme::RandomUniform => "random-uniform",
            MaskScheme::Full => "full",
        }
    }
}

impl fmt::Display for MaskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo-radial" | "radial" => Ok(MaskScheme::PseudoRadial),
            "random-uniform" | "random" => Ok(MaskScheme::RandomUniform),
            "full" => Ok(MaskScheme::Full),
            other => Err(Error::invalid(format!("unknown mask scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    h: usize,
    w: usize,
    grid: Vec<bool>,
    ratio: f64,
    scheme: MaskScheme,
    seed: u64,
}

impl SamplingMask {
    pub fn full(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            grid: vec![true; h * w],
            ratio: 1.0,
            scheme: MaskScheme::Full,
            seed: 0,
        }
    }

    /// Builds a mask from an explicit grid (native DFT layout).
    pub fn from_grid(h: usize, w: usize, grid: Vec<bool>, ratio: f64, scheme: MaskScheme, seed: u64) -> Result<Self> {
        if h == 0 || w == 0 || grid.len() != h * w {
            return Err(Error::shape(
                "mask",
                format!("{} cells for a {h}×{w} mask", grid.len()),
            ));
        }
        check_ratio(ratio)?;
        Ok(Self {
            h,
            w,
            grid,
            ratio,
            scheme,
            seed,
        })
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn grid(&self) -> &[bool] {
        &self.grid
    }

    /// Requested sampling ratio.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn scheme(&self) -> MaskScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    pub fn sampled_fraction(&self) -> f64 {
        self.count() as f64 / self.grid.len() as f64
    }

    pub fn is_sampled(&self, y: usize, x: usize) -> bool {
        self.grid[y * self.w + x]
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mask {} {} {} {} {}\n",
            self.h, self.w, self.ratio, self.scheme, self.seed
        );
        for row in self.grid.chunks(self.w) {
            s.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format { kind: "mask", detail };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "mask" {
            return Err(bad(format!("bad header {header:?}")));
        }
        let h: usize = fields[1].parse().map_err(|_| bad(format!("bad height {:?}", fields[1])))?;
        let w: usize = fields[2].parse().map_err(|_| bad(format!("bad width {:?}", fields[2])))?;
        let ratio: f64 = fields[3].parse().map_err(|_| bad(format!("bad ratio {:?}", fields[3])))?;
        let scheme: MaskScheme = fields[4].parse()?;
        let seed: u64 = fields[5].parse().map_err(|_| bad(format!("bad seed {:?}", fields[5])))?;
        let mut grid = Vec::with_capacity(h * w);
        for r in 0..h {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("missing row {r}")))?
                .trim_end();
            if line.len() != w {
                return Err(bad(format!("row {r} has {} cells, expected {w}", line.len())));
            }
            for c in line.chars() {
                match c {
                    '0' => grid.push(false),
                    '1' => grid.push(true),
                    other => return Err(bad(format!("unexpected character {other:?} in row {r}"))),
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing rows after grid".into()));
        }
        Self::from_grid(h, w, grid, ratio, scheme, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("sampling ratio {ratio} outside (0, 1]")));
    }
    Ok(())
}

/// Deterministic mask of about `round(ratio·H·W)` samples with DC included.
///
/// Every generated mask is conjugate-symmetric: `(u, v)` is sampled exactly
/// when `(-u mod H, -v mod W)` is. Selection therefore works on conjugate
/// pairs, and the count can land one below the budget when only pairs remain.
///
/// Pseudo-radial: the fewest evenly-angled spokes through the k-space
/// origin (with a seeded angular offset) whose union reaches the budget,
/// trimmed from the highest frequencies inward.
pub fn generate_mask(h: usize, w: usize, ratio: f64, scheme: MaskScheme, seed: u64) -> Result<SamplingMask> {
    if h == 0 || w == 0 {
        return Err(Error::invalid(format!("zero-sized mask {h}×{w}")));
    }
    check_ratio(ratio)?;
    let n = h * w;
    let target = ((ratio * n as f64).round() as usize).clamp(1, n);
    if scheme == MaskScheme::Full || target == n {
        let mut m = SamplingMask::full(h, w);
        m.ratio = ratio;
        m.scheme = scheme;
        m.seed = seed;
        return Ok(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = match scheme {
        MaskScheme::RandomUniform => {
            let mut orbits = conjugate_orbits(h, w);
            let dc = orbits.remove(0);
            orbits.shuffle(&mut rng);
            let mut grid = vec![false; n];
            let mut count = take(&mut grid, &dc);
            for o in &orbits {
                if count + o.len() <= target {
                    count += take(&mut grid, o);
                }
            }
            grid
        }
        MaskScheme::PseudoRadial => radial_grid(h, w, target, &mut rng),
        MaskScheme::Full => unreachable!(),
    };
    SamplingMask::from_grid(h, w, grid, ratio, scheme, seed)
}

fn conjugate(i: usize, h: usize, w: usize) -> usize {
    let (u, v) = (i / w, i % w);
    ((h - u) % h) * w + (w - v) % w
}

/// Partition of the grid into `{k, -k}` classes, DC first.
fn conjugate_orbits(h: usize, w: usize) -> Vec<Vec<usize>> {
    (0..h * w)
        .filter_map(|i| {
            let j = conjugate(i, h, w);
            match i.cmp(&j) {
                std::cmp::Ordering::Less => Some(vec![i, j]),
                std::cmp::Ordering::Equal => Some(vec![i]),
                std::cmp::Ordering::Greater => None,
            }
        })
        .collect()
}

fn take(grid: &mut [bool], orbit: &[usize]) -> usize {
    orbit.iter().for_each(|&i| grid[i] = true);
    orbit.len()
}

/// Centered frequency of native index `i` on an axis of length `n`.
fn centered(i: usize, n: usize) -> f64 {
    let half = n / 2;
    ((i + half) % n) as f64 - half as f64
}

fn spokes(h: usize, w: usize, count: usize, offset: f64) -> Vec<bool> {
    let mut grid = vec![false; h * w];
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let reach = h.max(w) as f64;
    let steps = (4.0 * reach) as i64;
    for s in 0..count {
        let theta = offset + std::f64::consts::PI * s as f64 / count as f64;
        let (sin, cos) = theta.sin_cos();
        for j in -steps..=steps {
            let t = j as f64 * 0.25;
            let yy = (cy + t * sin).round();
            let xx = (cx + t * cos).round();
            if yy < 0.0 || xx < 0.0 || yy >= h as f64 || xx >= w as f64 {
                continue;
            }
            // centered → native layout
            let y = (yy as usize + h - h / 2) % h;
            let x = (xx as usize + w - w / 2) % w;
            grid[y * w + x] = true;
            grid[conjugate(y * w + x, h, w)] = true;
        }
    }
    grid
}

fn radial_grid(h: usize, w: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = h * w;
    let offset_frac: f64 = rng.gen();
    let tiebreak: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let radius = |i: usize| {
        let fy = centered(i / w, h);
        let fx = centered(i % w, w);
        fy * fy + fx * fx
    };

    let max_spokes = 4 * (h + w);
    let mut grid = Vec::new();
    for count in 1..=max_spokes {
        let offset = offset_frac * std::f64::consts::PI / count as f64;
        grid = spokes(h, w, count, offset);
        if grid.iter().filter(|&&b| b).count() >= target {
            break;
        }
    }

    // a conjugate pair shares one radius, so orbits order by their first member
    let mut orbits = conjugate_orbits(h, w);
    orbits.sort_by(|a, b| {
        radius(a[0])
            .total_cmp(&radius(b[0]))
            .then(tiebreak[a[0]].cmp(&tiebreak[b[0]]))
    });
    let (inside, outside): (Vec<_>, Vec<_>) = orbits.into_iter().partition(|o| grid[o[0]]);
    let mut count: usize = inside.iter().map(Vec::len).sum();
    if count > target {
        // drop the highest frequencies first, never DC
        for o in inside.iter().rev() {
            if o[0] != 0 && count - o.len() >= target {
                o.iter().for_each(|&i| grid[i] = false);
                count -= o.len();
            }
        }
    } else {
        for o in &outside {
            if count + o.len() <= target {
                count += take(&mut grid, o);
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_one_is_all_true() {
        for scheme in [MaskScheme::PseudoRadial, MaskScheme::RandomUniform, MaskScheme::Full] {
            let m = generate_mask(16, 8, 1.0, scheme, 3).unwrap();
            assert!(m.grid().iter().all(|&b| b));
        }
    }

    #[test]
    fn random_uniform_count_and_dc() {
        let m = generate_mask(64, 64, 0.10, MaskScheme::RandomUniform, 11).unwrap();
        assert!((408..=412).contains(&m.count()), "{}", m.count());
        assert!(m.is_sampled(0, 0));
    }

    #[test]
    fn generated_masks_are_conjugate_symmetric() {
        for scheme in [MaskScheme::PseudoRadial, MaskScheme::RandomUniform] {
            for &(h, w) in &[(8, 11), (16, 16), (9, 7)] {
                let m = generate_mask(h, w, 0.3, scheme, 2).unwrap();
                for i in 0..h * w {
                    assert_eq!(m.grid()[i], m.grid()[conjugate(i, h, w)], "{scheme} {h}×{w} at {i}");
                }
            }
        }
    }

    #[test]
    fn radial_hits_budget_and_contains_dc() {
        for &ratio in &[0.05, 0.1, 0.2, 0.3, 0.5, 0.9] {
            let m = generate_mask(64, 64, ratio, MaskScheme::PseudoRadial, 5).unwrap();
            assert!((m.sampled_fraction() - ratio).abs() <= 0.005, "{ratio}: {}", m.sampled_fraction());
            assert!(m.is_sampled(0, 0));
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        for scheme in [MaskScheme::PseudoRadial, MaskScheme::RandomUniform] {
            let a = generate_mask(32, 48, 0.2, scheme, 99).unwrap();
            let b = generate_mask(32, 48, 0.2, scheme, 99).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ratio_out_of_range() {
        assert!(generate_mask(8, 8, 0.0, MaskScheme::RandomUniform, 0).is_err());
        assert!(generate_mask(8, 8, 1.5, MaskScheme::RandomUniform, 0).is_err());
        assert!(generate_mask(8, 8, f64::NAN, MaskScheme::PseudoRadial, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = generate_mask(12, 10, 0.3, MaskScheme::PseudoRadial, 4).unwrap();
        let back = SamplingMask::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(m.to_text().starts_with("mask 12 10 0.3 pseudo-radial 4\n"));
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(SamplingMask::from_text("mask 2 2 0.5 full 0\n10\n").is_err());
        assert!(SamplingMask::from_text("mask 2 2 0.5 full 0\n10\n1x\n").is_err());
        assert!(SamplingMask::from_text("grid 2 2 0.5 full 0\n10\n01\n").is_err());
    }
}
