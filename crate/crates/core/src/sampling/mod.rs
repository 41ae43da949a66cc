//! Element-wise sampling distributions and the samplers that draw Ω.

mod bernoulli;
mod multinomial;
mod plan;
mod product;
mod samples;

pub use bernoulli::draw_bernoulli;
pub use multinomial::{draw_multinomial, draw_multinomial_audited, draw_multinomial_with, MultinomialCost, WithinRowLaw};
pub use plan::{build_plan, ElementLaw, SamplingPlan};
pub use product::{build_product_plan, materialize_product_samples, ProductSamplingPlan};
pub use samples::{Sample, SampleSet};

pub(crate) use bernoulli::bernoulli_row;

/// Which sampler realizes Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    /// Independent coin per cell, exact law, O(n·d).
    Bernoulli,
    /// Row counts then with-replacement column draws, O(nnz + m log d).
    #[default]
    Multinomial,
    /// As `Multinomial` with the column law that omits the uniform part.
    MultinomialStated,
}

impl std::str::FromStr for SamplerKind {
    type Err = crate::LelaError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "bernoulli" => Ok(Self::Bernoulli),
            "multinomial" => Ok(Self::Multinomial),
            "multinomial-stated" => Ok(Self::MultinomialStated),
            other => Err(crate::LelaError::param(format!("unknown sampler mode {other}"))),
        }
    }
}
