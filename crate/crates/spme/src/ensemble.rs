//! Parallel ensembles.
//!
//! Paths are computed on a rayon pool and collected in path-index order
//! before the reduction, so results do not depend on the thread count.
//! [`Field`] caches lazily and is not `Sync`, so workers rebuild their
//! start fields from coefficient vectors.

use rayon::prelude::*;

use spme_core::galerkin::{observable_names, Ensemble, Observable};
use spme_core::stats::StatTable;
use spme_core::triple::Field;
use spme_core::Result;

/// `f(i)` for `i in 0..n`, in index order.
pub fn map_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Row-major `times × observables` per path.
pub fn observe_paths(ens: &Ensemble<'_>, n: usize, observables: &[Observable]) -> Result<Vec<Vec<f64>>> {
    let dom = ens.system.dom;
    let x0 = ens.x0.coeffs(dom).to_vec();
    let y0 = ens.y0.as_ref().map(|y| y.coeffs(dom).to_vec());
    let (system, config, master_seed) = (ens.system, &ens.config, ens.master_seed);
    map_paths(n, |i| {
        let local = Ensemble {
            system,
            config: config.clone(),
            x0: Field::from_coeffs(x0.clone()),
            y0: y0.clone().map(Field::from_coeffs),
            master_seed,
        };
        local.observe_path(i, observables)
    })
}

/// Parallel counterpart of [`spme_core::galerkin::monte_carlo`], with an
/// identical result.
pub fn monte_carlo(ens: &Ensemble<'_>, n: usize, observables: &[Observable]) -> Result<StatTable> {
    let paths = observe_paths(ens, n, observables)?;
    StatTable::from_paths(ens.saved_times()?, observable_names(observables), &paths)
}

/// Column `obs` of a row-major path record.
pub fn column(path: &[f64], n_obs: usize, obs: usize) -> Vec<f64> {
    path.iter().skip(obs).step_by(n_obs).copied().collect()
}
