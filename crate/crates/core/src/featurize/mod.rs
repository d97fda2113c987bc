//! Non-trainable molecular representations.

mod descriptors;
mod ecfp;

pub use descriptors::{
    descriptor_vector, DescriptorVector, DESCRIPTOR_COUNT, DESCRIPTOR_NAMES, DESCRIPTOR_SET_VERSION,
};
pub use ecfp::{ecfp, ecfp_identifiers, hash_words, Fingerprint, DEFAULT_NBITS, DEFAULT_RADIUS};
