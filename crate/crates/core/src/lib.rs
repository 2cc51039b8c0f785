pub mod bundled;
pub mod env;
pub mod experiment;
pub mod learner;
pub mod product;
pub mod regions;
pub mod trm;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/machines.md")]
    mod machines {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/products.md")]
    mod products {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
