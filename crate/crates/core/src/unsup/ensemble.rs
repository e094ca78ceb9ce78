use serde::{Deserialize, Serialize};

use super::{
    fit_agglomerative, fit_birch, fit_gmm, fit_kmeans, AgglomerativeModel, BirchConfig, BirchModel,
    GmmConfig, GmmModel, KMeansConfig, KMeansModel,
};
use crate::error::Result;
use crate::features::{fit_pca, PcaModel};
use crate::matrix::Matrix;
use crate::seed;

const CLUSTERS: usize = 4;
const MEMBERS: usize = 4;

/// Length of the one-hot ensemble vector.
pub const ENSEMBLE_DIM: usize = CLUSTERS * MEMBERS;

/// Four clusterers sharing one 2-D PCA projection of the scaled statistical
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEnsemble {
    pub pca: PcaModel,
    pub kmeans: KMeansModel,
    pub gmm: GmmModel,
    pub birch: BirchModel,
    pub agglomerative: AgglomerativeModel,
}

impl ClusterEnsemble {
    pub fn fit(x: &Matrix, seed: u64) -> Result<Self> {
        let pca = fit_pca(x, 2)?;
        let z = pca.transform_matrix(x)?;
        let kmeans = fit_kmeans(&z, &KMeansConfig::default(), seed::derive(seed, "kmeans"))?;
        let gmm = fit_gmm(&z, &GmmConfig::default(), seed::derive(seed, "gmm"))?;
        let birch = fit_birch(&z, &BirchConfig::default())?;
        let agglomerative = fit_agglomerative(&z, CLUSTERS)?;
        Ok(Self { pca, kmeans, gmm, birch, agglomerative })
    }

    pub(crate) fn prepare(&mut self) -> Result<()> {
        self.gmm.prepare()
    }

    /// Input dimensionality (the scaled statistical feature width).
    pub fn dim(&self) -> usize {
        self.pca.dim()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.pca.transform(x)
    }

    /// Cluster ids in member order k-means, GMM, Birch, agglomerative.
    pub fn assignments(&self, x: &[f64]) -> Result<[usize; MEMBERS]> {
        let z = self.project(x)?;
        self.assign_projected(&z)
    }

    fn assign_projected(&self, z: &[f64]) -> Result<[usize; MEMBERS]> {
        Ok([
            self.kmeans.assign(z)?,
            self.gmm.assign(z)?,
            self.birch.assign(z)?,
            self.agglomerative.assign(z)?,
        ])
    }

    /// One-hot encoded assignments: 16 entries, exactly four ones.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ids = self.assignments(x)?;
        let mut v = vec![0.0; ENSEMBLE_DIM];
        for (m, id) in ids.iter().enumerate() {
            v[m * CLUSTERS + id] = 1.0;
        }
        Ok(v)
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), ENSEMBLE_DIM);
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.features(r)?);
        }
        Ok(out)
    }
}
