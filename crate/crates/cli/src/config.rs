//! TOML run configuration.
//!
//! ```toml
//! moduli = [2]
//! master_seed = 7
//!
//! [[atoms]]
//! element = "2:(1; {})"
//! weight = "7/10"
//!
//! [walk]
//! n = 20000
//! trials = 200
//! depth = 20
//! ```
//!
//! `master_seed` is required by every subcommand.

use std::path::Path;

use serde::Deserialize;
use treewalk::group::ProductElem;
use treewalk::walk::parse_rational;
use treewalk::{Alphabet, Error, Measure, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Modulus {
    Int(u32),
    Text(String),
}

impl Modulus {
    fn alphabet(&self) -> Result<Alphabet> {
        match self {
            Modulus::Int(q) => Alphabet::cyclic(*q),
            Modulus::Text(s) => s.parse(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Text(String),
    Float(f64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub element: String,
    pub weight: Weight,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    pub n: usize,
    pub trials: usize,
    #[serde(default = "default_walk_depth")]
    pub depth: u32,
}

fn default_walk_depth() -> u32 {
    20
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingSection {
    pub depth: u32,
    pub n: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    /// Defaults to the atoms of the measure.
    pub generators: Option<Vec<String>>,
    pub word_bound: Option<usize>,
    pub closure_search: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    pub elements: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosetTreeSection {
    pub q: u32,
    pub m: u32,
    pub j_min: i64,
    pub j_max: i64,
    pub depth: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub moduli: Vec<Modulus>,
    pub master_seed: u64,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    pub walk: Option<WalkSection>,
    pub hitting: Option<HittingSection>,
    pub classify: Option<ClassifySection>,
    pub scale: Option<ScaleSection>,
    pub coset_tree: Option<CosetTreeSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn alphabets(&self) -> Result<Vec<Alphabet>> {
        if self.moduli.is_empty() {
            return Err(Error::Parse("`moduli` is missing or empty".into()));
        }
        self.moduli.iter().map(Modulus::alphabet).collect()
    }

    pub fn element(&self, text: &str) -> Result<ProductElem> {
        let alphabets = self.alphabets()?;
        let g: ProductElem = text.parse()?;
        g.check(&alphabets)?;
        Ok(g)
    }

    pub fn measure(&self) -> Result<Measure> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidMeasure("no [[atoms]]".into()));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let w = match &a.weight {
                    Weight::Text(s) => parse_rational(s)?,
                    Weight::Float(x) => parse_rational(&x.to_string())?,
                };
                Ok((self.element(&a.element)?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        Measure::new(self.alphabets()?, atoms)
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section.as_ref().ok_or_else(|| Error::Parse(format!("missing [{name}] section")))
    }
}
