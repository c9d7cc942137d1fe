//! Conditional-GAN label interpolation toolkit.
//!
//! Trains conditional DCGANs on categorically labelled image sets, moves
//! conditioning mass between classes at inference time, and measures the
//! resulting transitions with separately trained judges (a softmax
//! classifier and a valence/arousal regressor).

pub mod cgan;
pub mod datasets;
pub mod error;
pub mod image;
pub mod judges;
pub mod label_space;
pub mod metrics;
pub mod rng;
pub mod sweep;
pub mod weights;

pub use error::{Error, Result};
pub use image::ImageTensor;
pub use label_space::{build_schedule, one_hot, transfer_mass, validate, ClassIndex, ConditioningVector, InterpolationSchedule, LabelMap};

/// Version recorded in every manifest this crate writes.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's contents, streamed.
pub fn sha256_file(path: &std::path::Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut f = std::fs::File::open(path).map_err(Error::io(format!("opening {}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = std::io::Read::read(&mut f, &mut buf).map_err(Error::io(format!("hashing {}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}
