//! Discrete design space of core configurations and LLC way allocations.
//!
//! A core is split into three independently sized sections (front end,
//! back end, load/store). A configuration index combines one core
//! configuration with one cache-way option, laid out core-major:
//! `index = core_index * cache_count + cache_index`.
//!
//! Core configurations are enumerated from widest to narrowest, with the
//! load/store width varying slowest, then front end, then back end.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widths of the three pipeline sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreConfig {
    pub fe: u32,
    pub be: u32,
    pub ls: u32,
}

impl CoreConfig {
    pub const fn new(fe: u32, be: u32, ls: u32) -> Self {
        CoreConfig { fe, be, ls }
    }

    pub const fn uniform(width: u32) -> Self {
        CoreConfig::new(width, width, width)
    }

    pub fn widths(&self) -> [u32; 3] {
        [self.fe, self.be, self.ls]
    }
}

impl fmt::Display for CoreConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{},{}}}", self.fe, self.be, self.ls)
    }
}

/// A homogeneous space: every section takes a width from `levels`, and
/// every core configuration may be paired with any cache option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    levels: Vec<u32>,
    cache_options: Vec<f64>,
}

impl ConfigSpace {
    pub const DEFAULT_LEVELS: [u32; 3] = [2, 4, 6];
    pub const DEFAULT_CACHE_OPTIONS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

    /// Builds a space; `levels` are sorted ascending, `cache_options` must be
    /// positive and strictly increasing.
    pub fn new(levels: &[u32], cache_options: &[f64]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("a config space needs at least one width level"));
        }
        if levels.contains(&0) {
            return Err(Error::domain("section widths must be positive"));
        }
        let mut sorted = levels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != levels.len() {
            return Err(Error::domain("duplicate width level"));
        }
        if cache_options.is_empty() {
            return Err(Error::domain("a config space needs at least one cache option"));
        }
        if cache_options.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::domain("cache options must be positive"));
        }
        if cache_options.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("cache options must be strictly increasing"));
        }
        Ok(ConfigSpace {
            levels: sorted,
            cache_options: cache_options.to_vec(),
        })
    }

    /// 27 core configurations over {2,4,6} and four cache options.
    pub fn homogeneous() -> Self {
        ConfigSpace::new(&Self::DEFAULT_LEVELS, &Self::DEFAULT_CACHE_OPTIONS).expect("default space is well-formed")
    }

    /// Width levels, ascending.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn cache_options(&self) -> &[f64] {
        &self.cache_options
    }

    /// Number of core configurations, `|levels|^3`.
    pub fn core_count(&self) -> usize {
        self.levels.len().pow(3)
    }

    pub fn cache_count(&self) -> usize {
        self.cache_options.len()
    }

    /// Number of indexable configurations, `core_count * cache_count`.
    pub fn len(&self) -> usize {
        self.core_count() * self.cache_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn level_pos(&self, width: u32) -> Option<usize> {
        self.levels.iter().position(|&w| w == width)
    }

    /// Position of a core configuration in the enumeration order.
    pub fn core_index(&self, config: CoreConfig) -> Result<usize> {
        let l = self.levels.len();
        let desc = |w: u32| -> Result<usize> {
            self.level_pos(w)
                .map(|p| l - 1 - p)
                .ok_or_else(|| Error::domain(format!("width {w} is not a level of this space")))
        };
        let (fe, be, ls) = (desc(config.fe)?, desc(config.be)?, desc(config.ls)?);
        Ok(ls * l * l + fe * l + be)
    }

    pub fn core_config(&self, core_index: usize) -> Result<CoreConfig> {
        let l = self.levels.len();
        if core_index >= self.core_count() {
            return Err(Error::domain(format!(
                "core index {core_index} out of range 0..{}",
                self.core_count()
            )));
        }
        let width = |d: usize| self.levels[l - 1 - d];
        Ok(CoreConfig {
            ls: width(core_index / (l * l)),
            fe: width((core_index / l) % l),
            be: width(core_index % l),
        })
    }

    pub fn encode(&self, config: CoreConfig, cache_index: usize) -> Result<usize> {
        if cache_index >= self.cache_count() {
            return Err(Error::domain(format!(
                "cache index {cache_index} out of range 0..{}",
                self.cache_count()
            )));
        }
        Ok(self.core_index(config)? * self.cache_count() + cache_index)
    }

    pub fn decode(&self, index: usize) -> Result<(CoreConfig, usize)> {
        self.check(index)?;
        let p = self.cache_count();
        Ok((self.core_config(index / p)?, index % p))
    }

    /// Cache ways held by an application running at `index`.
    pub fn cache_ways_of(&self, index: usize) -> Result<f64> {
        self.check(index)?;
        Ok(self.cache_options[index % self.cache_count()])
    }

    /// All `(config, cache ways)` pairs in index order.
    pub fn enumerate_configs(&self) -> Vec<(CoreConfig, f64)> {
        (0..self.core_count())
            .flat_map(|j| {
                let c = self.core_config(j).expect("in range");
                self.cache_options.iter().map(move |&w| (c, w))
            })
            .collect()
    }

    /// Per-section level codes of a core configuration, 0 = narrowest.
    pub fn level_code(&self, core_index: usize) -> Result<[usize; 3]> {
        let c = self.core_config(core_index)?;
        let pos = |w| self.level_pos(w).expect("width belongs to the space");
        Ok([pos(c.fe), pos(c.be), pos(c.ls)])
    }

    /// Index of the cache option closest to `ways` (lower option on ties).
    pub fn nearest_cache_index(&self, ways: f64) -> usize {
        let mut best = 0;
        for (k, &w) in self.cache_options.iter().enumerate() {
            if (w - ways).abs() < (self.cache_options[best] - ways).abs() {
                best = k;
            }
        }
        best
    }

    pub fn widest(&self) -> CoreConfig {
        CoreConfig::uniform(*self.levels.last().expect("non-empty"))
    }

    pub fn narrowest(&self) -> CoreConfig {
        CoreConfig::uniform(self.levels[0])
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::domain(format!("configuration index {index} out of range 0..{}", self.len())));
        }
        Ok(())
    }
}

/// Core class of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreClass {
    /// A reconfigurable core of a homogeneous multicore.
    Reconfigurable,
    Big,
    Small,
}

/// Big/small variant: small cores have two lanes per section (widths 1 or 2),
/// big cores have four lanes with three usable levels {2,3,4}. Small
/// configurations occupy indices 0..8, big ones 8..35. No cache dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroSpace {
    small: ConfigSpace,
    big: ConfigSpace,
}

impl Default for HeteroSpace {
    fn default() -> Self {
        HeteroSpace {
            small: ConfigSpace::new(&[1, 2], &[1.0]).expect("well-formed"),
            big: ConfigSpace::new(&[2, 3, 4], &[1.0]).expect("well-formed"),
        }
    }
}

impl HeteroSpace {
    pub fn small(&self) -> &ConfigSpace {
        &self.small
    }

    pub fn big(&self) -> &ConfigSpace {
        &self.big
    }

    pub fn small_range(&self) -> Range<usize> {
        0..self.small.core_count()
    }

    pub fn big_range(&self) -> Range<usize> {
        let s = self.small.core_count();
        s..s + self.big.core_count()
    }

    pub fn len(&self) -> usize {
        self.small.core_count() + self.big.core_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn class_of(&self, index: usize) -> Result<CoreClass> {
        if self.small_range().contains(&index) {
            Ok(CoreClass::Small)
        } else if self.big_range().contains(&index) {
            Ok(CoreClass::Big)
        } else {
            Err(Error::domain(format!("hetero index {index} out of range 0..{}", self.len())))
        }
    }

    /// Global index of a configuration within one class.
    pub fn encode(&self, class: CoreClass, config: CoreConfig) -> Result<usize> {
        match class {
            CoreClass::Small => self.small.core_index(config),
            CoreClass::Big => Ok(self.big_range().start + self.big.core_index(config)?),
            CoreClass::Reconfigurable => Err(Error::domain("hetero space has no reconfigurable class")),
        }
    }

    pub fn decode(&self, index: usize) -> Result<(CoreClass, CoreConfig)> {
        match self.class_of(index)? {
            CoreClass::Small => Ok((CoreClass::Small, self.small.core_config(index)?)),
            _ => Ok((CoreClass::Big, self.big.core_config(index - self.big_range().start)?)),
        }
    }

    /// Fully provisioned configuration of a class: (4,4,4) big, (2,2,2) small.
    pub fn full_index(&self, class: CoreClass) -> usize {
        match class {
            CoreClass::Small => self.small.core_index(self.small.widest()).expect("in space"),
            _ => self.big_range().start + self.big.core_index(self.big.widest()).expect("in space"),
        }
    }
}

/// Either design space, behind one indexing interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    Homogeneous(ConfigSpace),
    Hetero(HeteroSpace),
}

impl Default for Space {
    fn default() -> Self {
        Space::Homogeneous(ConfigSpace::homogeneous())
    }
}

impl Space {
    pub fn len(&self) -> usize {
        match self {
            Space::Homogeneous(s) => s.len(),
            Space::Hetero(h) => h.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `m`: number of core configurations.
    pub fn core_count(&self) -> usize {
        match self {
            Space::Homogeneous(s) => s.core_count(),
            Space::Hetero(h) => h.len(),
        }
    }

    /// `p`: number of cache options.
    pub fn cache_count(&self) -> usize {
        match self {
            Space::Homogeneous(s) => s.cache_count(),
            Space::Hetero(_) => 1,
        }
    }

    pub fn core_of(&self, index: usize) -> usize {
        index / self.cache_count()
    }

    pub fn cache_of(&self, index: usize) -> usize {
        index % self.cache_count()
    }

    pub fn index_of(&self, core_index: usize, cache_index: usize) -> usize {
        core_index * self.cache_count() + cache_index
    }

    pub fn cache_ways_of(&self, index: usize) -> Result<f64> {
        match self {
            Space::Homogeneous(s) => s.cache_ways_of(index),
            Space::Hetero(h) => h.class_of(index).map(|_| 1.0),
        }
    }

    /// Class, widths and per-section level codes of a core configuration.
    pub fn describe_core(&self, core_index: usize) -> Result<(CoreClass, CoreConfig, [usize; 3])> {
        match self {
            Space::Homogeneous(s) => Ok((CoreClass::Reconfigurable, s.core_config(core_index)?, s.level_code(core_index)?)),
            Space::Hetero(h) => {
                let (class, cfg) = h.decode(core_index)?;
                let (sub, local) = match class {
                    CoreClass::Small => (&h.small, core_index),
                    _ => (&h.big, core_index - h.big_range().start),
                };
                Ok((class, cfg, sub.level_code(local)?))
            }
        }
    }

    pub fn as_homogeneous(&self) -> Option<&ConfigSpace> {
        match self {
            Space::Homogeneous(s) => Some(s),
            Space::Hetero(_) => None,
        }
    }

    pub fn as_hetero(&self) -> Option<&HeteroSpace> {
        match self {
            Space::Hetero(h) => Some(h),
            Space::Homogeneous(_) => None,
        }
    }

    pub fn to_file(&self) -> SpaceFile {
        match self {
            Space::Homogeneous(s) => SpaceFile {
                levels: s.levels.clone(),
                cache_options: s.cache_options.clone(),
                hetero: false,
            },
            Space::Hetero(h) => SpaceFile {
                levels: h.big.levels.clone(),
                cache_options: vec![1.0],
                hetero: true,
            },
        }
    }

    pub fn from_file(file: &SpaceFile) -> Result<Self> {
        if file.hetero {
            Ok(Space::Hetero(HeteroSpace::default()))
        } else {
            Ok(Space::Homogeneous(ConfigSpace::new(&file.levels, &file.cache_options)?))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_file())?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Space::from_file(&toml::from_str(text)?)
    }

    /// Short stable digest of the space definition.
    pub fn hash(&self) -> String {
        crate::short_hash(self.to_toml().expect("space serializes").as_bytes())
    }
}

/// On-disk form of a space definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub levels: Vec<u32>,
    #[serde(default)]
    pub cache_options: Vec<f64>,
    #[serde(default)]
    pub hetero: bool,
}
