//! Synthetic phantoms and limited-arc acquisitions with known ground truth.

mod acquire;
mod phantom;

pub use acquire::{
    inverse_crime_dataset, mean_object_signal, simulate_acquisition, smooth_field, strip_taper,
    Acquisition, ArtifactKind, ArtifactSpec, NoiseSpec,
};
pub use phantom::{inclusion_masks, make_phantom, voxelize, Inclusion, PhantomSpec, TextureSpec};
