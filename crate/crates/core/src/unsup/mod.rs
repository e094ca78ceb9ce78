//! Label-free feature learners: a four-member clustering ensemble over a
//! 2-D PCA projection, a variational autoencoder over character ids, and an
//! LDA topic model over word uni/bi-grams.
//!
//! No fit function here accepts labels.

mod birch;
mod ensemble;
mod gmm;
mod kmeans;
mod lda;
mod vae;
mod ward;

pub use birch::{fit_birch, BirchConfig, BirchModel};
pub use ensemble::{ClusterEnsemble, ENSEMBLE_DIM};
pub use gmm::{fit_gmm, GmmConfig, GmmModel};
pub use kmeans::{fit_kmeans, KMeansConfig, KMeansModel};
pub use lda::{fit_lda, fit_lda_traced, GibbsSampler, LdaConfig, LdaModel, NUM_TOPICS};
pub use vae::{default_vae_config, fit_vae, kl_standard_normal, VaeBatch, VaeLoss, VaeModel, LATENT_DIM};
pub use ward::{fit_agglomerative, AgglomerativeModel};
