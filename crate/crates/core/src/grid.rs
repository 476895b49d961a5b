//! Toroidal lattice geometry and dial settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

const LETTERS: &[u8; 26] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// Position of both dials. `x` is the left (east-west) dial, `y` the right
/// (north-south) dial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DialSetting {
    pub x: usize,
    pub y: usize,
}

impl DialSetting {
    pub const ORIGIN: DialSetting = DialSetting { x: 0, y: 0 };

    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Letter shown on a dial for a position: 0 → `A`, 23 → `X`.
///
/// Positions past `Z` fall back to their decimal index.
pub fn dial_letter(position: usize) -> String {
    match LETTERS.get(position) {
        Some(&b) => (b as char).to_string(),
        None => position.to_string(),
    }
}

fn parse_dial(token: &str) -> Result<usize, ParseError> {
    let token = token.trim();
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => {
            Ok((c.to_ascii_uppercase() as u8 - b'A') as usize)
        }
        _ => token
            .parse()
            .map_err(|_| ParseError::new(0, format!("bad dial position `{token}`"))),
    }
}

impl fmt::Display for DialSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", dial_letter(self.x), dial_letter(self.y))
    }
}

impl FromStr for DialSetting {
    type Err = ParseError;

    /// Accepts `[A,D]`, `A,D` or numeric positions such as `0,3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| ParseError::new(0, format!("expected `x,y`, got `{s}`")))?;
        Ok(DialSetting::new(parse_dial(a)?, parse_dial(b)?))
    }
}

/// A `width × height` lattice whose opposite edges are identified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    pub width: usize,
    pub height: usize,
}

impl Torus {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, s: DialSetting) -> bool {
        s.x < self.width && s.y < self.height
    }

    /// Row-major index; rows run along `y`.
    pub fn index(&self, s: DialSetting) -> usize {
        s.y * self.width + s.x
    }

    pub fn setting(&self, index: usize) -> DialSetting {
        DialSetting::new(index % self.width, index / self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = DialSetting> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| DialSetting::new(x, y)))
    }

    /// Wrap-around distance along one axis of length `size`.
    pub fn axis_distance(a: usize, b: usize, size: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(size - d)
    }

    /// Wrap-around L1 distance.
    pub fn l1(&self, a: DialSetting, b: DialSetting) -> usize {
        Self::axis_distance(a.x, b.x, self.width) + Self::axis_distance(a.y, b.y, self.height)
    }

    /// Signed shift of a coordinate with wrap.
    pub fn wrap(pos: usize, delta: isize, size: usize) -> usize {
        (pos as isize + delta).rem_euclid(size as isize) as usize
    }

    pub fn offset(&self, s: DialSetting, dx: isize, dy: isize) -> DialSetting {
        DialSetting::new(Self::wrap(s.x, dx, self.width), Self::wrap(s.y, dy, self.height))
    }

    /// East, west, south and north neighbours.
    pub fn neighbors4(&self, s: DialSetting) -> [DialSetting; 4] {
        [
            self.offset(s, 1, 0),
            self.offset(s, -1, 0),
            self.offset(s, 0, 1),
            self.offset(s, 0, -1),
        ]
    }

    pub fn neighbors8(&self, s: DialSetting) -> [DialSetting; 8] {
        [
            self.offset(s, 1, 0),
            self.offset(s, -1, 0),
            self.offset(s, 0, 1),
            self.offset(s, 0, -1),
            self.offset(s, 1, 1),
            self.offset(s, 1, -1),
            self.offset(s, -1, 1),
            self.offset(s, -1, -1),
        ]
    }

    /// One step from `from` toward `to` along a shortest wrap-around path,
    /// moving in `x` first. Returns `from` when they coincide.
    pub fn step_toward(&self, from: DialSetting, to: DialSetting) -> DialSetting {
        fn dir(a: usize, b: usize, size: usize) -> isize {
            if a == b {
                return 0;
            }
            let forward = (b + size - a) % size;
            if forward <= size - forward {
                1
            } else {
                -1
            }
        }
        let dx = dir(from.x, to.x, self.width);
        if dx != 0 {
            return self.offset(from, dx, 0);
        }
        self.offset(from, 0, dir(from.y, to.y, self.height))
    }
}

/// Wrap-around L1 distance between two settings on a `width × height` torus.
pub fn toroidal_l1(a: DialSetting, b: DialSetting, width: usize, height: usize) -> usize {
    Torus::new(width, height).l1(a, b)
}
