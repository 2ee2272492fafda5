use super::{PathBundle, PathsError, TimeGrid};

/// Anything that can draw a contiguous block of paths on a grid.
pub trait PathGenerator: Sync {
    /// Paths `first_path .. first_path + n_paths` of the simulation keyed by
    /// `root_seed`; path `k` always uses random stream `k`.
    fn generate(
        &self,
        grid: &TimeGrid,
        first_path: u64,
        n_paths: usize,
        root_seed: u64,
    ) -> Result<PathBundle, PathsError>;

    /// Whether the sampler is exact in law at the grid points, so that a fine
    /// simulation restricted to a coarser grid is itself a valid coarse sample.
    fn supports_exact_refinement(&self) -> bool;
}

/// Coupled coarse/fine bundles sharing the same driving noise: the fine
/// bundle is simulated on `coarse.refine(factor)` and the coarse bundle is
/// its restriction.
pub fn refine_grid(
    generator: &dyn PathGenerator,
    coarse: &TimeGrid,
    factor: usize,
    first_path: u64,
    n_paths: usize,
    root_seed: u64,
) -> Result<(PathBundle, PathBundle), PathsError> {
    if !generator.supports_exact_refinement() {
        return Err(PathsError::RefinementUnsupported);
    }
    let fine_grid = coarse.refine(factor)?;
    let fine = generator.generate(&fine_grid, first_path, n_paths, root_seed)?;
    let coarse_bundle = fine.restrict(factor)?;
    Ok((coarse_bundle, fine))
}
