pub mod certified;
pub mod counterexample;
pub mod dyadic;
pub mod error;
pub mod fourier;
pub mod rat;
pub mod walsh;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/walsh.md")]
    mod walsh {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/means.md")]
    mod means {}
    #[doc = include_str!("../../../book/src/construction.md")]
    mod construction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
